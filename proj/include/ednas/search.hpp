#pragma once
// One-shot search machinery: per-block architecture logits, stochastic
// single-path sampling, the weight-sharing supernet, and argmax derivation.

#include <cstdint>
#include <memory>
#include <vector>

#include "ednas/bignat.hpp"
#include "ednas/model.hpp"

namespace ednas {

// One logit row per block: M rows over {SA, FFN}, N rows over
// {SA, RSA, GA, FFN}. Zero-initialized (uniform prior).
struct ArchitectureWeights {
  std::vector<TensorPtr> enc_rows;  // each [2]
  std::vector<TensorPtr> dec_rows;  // each [4]

  static ArchitectureWeights zeros(int M, int N);
  int M() const { return static_cast<int>(enc_rows.size()); }
  int N() const { return static_cast<int>(dec_rows.size()); }
  std::vector<TensorPtr> params() const;
  bool all_finite() const;
  std::vector<double> softmax_enc(int block) const;
  std::vector<double> softmax_dec(int block) const;
  double entropy_enc(int block) const;
  double entropy_dec(int block) const;
  ArchitectureWeights clone() const;
};

// 2^M * 4^N, exact.
BigNat count_search_space(int M, int N);

// Disjoint index split with |D_m| / |D_a| = ratio within one sample,
// deterministic per seed. Rejects datasets smaller than two samples.
std::pair<std::vector<int>, std::vector<int>> split_train_set(
    int dataset_size, double ratio, std::uint64_t seed);

enum class SampleMode { uniform, softmax };

// Exactly one op per block; softmax mode draws each block's op from the
// categorical softmax of its row, uniform mode ignores theta.
Architecture sample_architecture(const ArchitectureWeights& theta,
                                 SampleMode mode, Rng& rng);

// Per-block argmax, ties to the lowest op index.
Architecture derive_architecture(const ArchitectureWeights& theta);

// Straight-through gate for a sampled op: forward value exactly 1, backward
// routes d(loss)/d(gate) through the softmax Jacobian of the theta row.
TensorPtr ste_gate(Tape* tape, const TensorPtr& theta_row, int index);

class Supernet {
 public:
  Supernet(const ModelConfig& cfg, int M, int N, Rng& rng);

  const ModelConfig& config() const { return cfg_; }
  int M() const { return M_; }
  int N() const { return N_; }

  ArchitectureWeights& theta() { return theta_; }
  const ArchitectureWeights& theta() const { return theta_; }

  // Single-path forward. When gate_theta is set, every block output is
  // multiplied by a straight-through gate so theta receives gradient.
  BackboneOut forward(const EvalCtx& ctx, const MultimodalSample& s,
                      const Architecture& path, bool gate_theta = false) const;
  TensorPtr loss(const EvalCtx& ctx, const MultimodalSample& s,
                 const Architecture& path, bool gate_theta = false) const;
  TensorPtr itm_score(const EvalCtx& ctx, const MultimodalSample& s,
                      const Architecture& path, bool gate_theta = false) const;

  // Trunk + head (always trained) plus the ops active on the given path.
  std::vector<TensorPtr> active_params(const Architecture& path) const;
  std::vector<TensorPtr> all_w_params() const;
  std::vector<TensorPtr> theta_params() const { return theta_.params(); }

  // Per block/op parameter records: M x 2 + N x 4.
  int block_record_count() const;
  BlockOp* encoder_candidate(int block, int op_index) const;
  BlockOp* decoder_candidate(int block, int op_index) const;
  static int pool_index(OperationKind k, bool decoder);

  // Standalone model with copied weights; forward-bitwise identical to this
  // supernet evaluated on the same path.
  Model instantiate(const Architecture& arch) const;

  NamedParams named_params() const;  // W and theta
  const HeadSet& heads() const { return heads_; }

 private:
  ModelConfig cfg_;
  int M_ = 0, N_ = 0;
  Trunk trunk_;
  std::vector<std::vector<std::unique_ptr<BlockOp>>> enc_cands_;  // [M][2]
  std::vector<std::vector<std::unique_ptr<BlockOp>>> dec_cands_;  // [N][4]
  HeadSet heads_;
  ArchitectureWeights theta_;
};

}  // namespace ednas
