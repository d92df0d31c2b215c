#include "ednas/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ednas {
namespace {

std::vector<double> softmax_of(const TensorPtr& row) {
  double mx = row->data()[0];
  for (std::size_t i = 1; i < row->size(); ++i)
    mx = std::max(mx, row->data()[i]);
  std::vector<double> p(row->size());
  double s = 0.0;
  for (std::size_t i = 0; i < row->size(); ++i) {
    p[i] = std::exp(row->data()[i] - mx);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

double entropy_of(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

int argmax_lowest_tie(const TensorPtr& row) {
  int best = 0;
  for (std::size_t i = 1; i < row->size(); ++i)
    if (row->data()[i] > row->data()[static_cast<std::size_t>(best)])
      best = static_cast<int>(i);
  return best;
}

int draw_categorical(const std::vector<double>& p, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cum += p[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace

ArchitectureWeights ArchitectureWeights::zeros(int M, int N) {
  ArchitectureWeights w;
  for (int i = 0; i < M; ++i)
    w.enc_rows.push_back(Tensor::zeros({2}, /*requires_grad=*/true));
  for (int i = 0; i < N; ++i)
    w.dec_rows.push_back(Tensor::zeros({4}, /*requires_grad=*/true));
  return w;
}

std::vector<TensorPtr> ArchitectureWeights::params() const {
  std::vector<TensorPtr> out;
  out.insert(out.end(), enc_rows.begin(), enc_rows.end());
  out.insert(out.end(), dec_rows.begin(), dec_rows.end());
  return out;
}

bool ArchitectureWeights::all_finite() const {
  for (const auto& r : enc_rows)
    if (!r->all_finite()) return false;
  for (const auto& r : dec_rows)
    if (!r->all_finite()) return false;
  return true;
}

std::vector<double> ArchitectureWeights::softmax_enc(int block) const {
  return softmax_of(enc_rows[static_cast<std::size_t>(block)]);
}

std::vector<double> ArchitectureWeights::softmax_dec(int block) const {
  return softmax_of(dec_rows[static_cast<std::size_t>(block)]);
}

double ArchitectureWeights::entropy_enc(int block) const {
  return entropy_of(softmax_enc(block));
}

double ArchitectureWeights::entropy_dec(int block) const {
  return entropy_of(softmax_dec(block));
}

ArchitectureWeights ArchitectureWeights::clone() const {
  ArchitectureWeights c;
  for (const auto& r : enc_rows)
    c.enc_rows.push_back(Tensor::from(r->shape(), r->values(), true));
  for (const auto& r : dec_rows)
    c.dec_rows.push_back(Tensor::from(r->shape(), r->values(), true));
  return c;
}

BigNat count_search_space(int M, int N) {
  require(M >= 0 && N >= 0, "count_search_space: M, N must be non-negative");
  return BigNat::pow2(M + 2 * N);  // 2^M * 4^N
}

std::pair<std::vector<int>, std::vector<int>> split_train_set(
    int dataset_size, double ratio, std::uint64_t seed) {
  require(dataset_size >= 2, "split_train_set: need at least two samples");
  require(ratio > 0.0, "split_train_set: ratio must be positive");
  std::vector<int> idx(static_cast<std::size_t>(dataset_size));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(splitmix64(seed ^ 0x5bd1e995u));
  rng.shuffle(idx);
  int n_a = static_cast<int>(std::llround(dataset_size / (ratio + 1.0)));
  n_a = std::clamp(n_a, 1, dataset_size - 1);
  std::vector<int> d_m(idx.begin(), idx.end() - n_a);
  std::vector<int> d_a(idx.end() - n_a, idx.end());
  return {std::move(d_m), std::move(d_a)};
}

Architecture sample_architecture(const ArchitectureWeights& theta,
                                 SampleMode mode, Rng& rng) {
  require(theta.all_finite(), "sample_architecture: theta has non-finite values");
  Architecture arch;
  for (int i = 0; i < theta.M(); ++i) {
    const int idx = mode == SampleMode::uniform
                        ? rng.uniform_int(2)
                        : draw_categorical(theta.softmax_enc(i), rng);
    arch.encoder_ops.push_back(encoder_pool()[static_cast<std::size_t>(idx)]);
  }
  for (int i = 0; i < theta.N(); ++i) {
    const int idx = mode == SampleMode::uniform
                        ? rng.uniform_int(4)
                        : draw_categorical(theta.softmax_dec(i), rng);
    arch.decoder_ops.push_back(decoder_pool()[static_cast<std::size_t>(idx)]);
  }
  return arch;
}

Architecture derive_architecture(const ArchitectureWeights& theta) {
  require(theta.all_finite(), "derive_architecture: theta has non-finite values");
  Architecture arch;
  for (const auto& row : theta.enc_rows)
    arch.encoder_ops.push_back(
        encoder_pool()[static_cast<std::size_t>(argmax_lowest_tie(row))]);
  for (const auto& row : theta.dec_rows)
    arch.decoder_ops.push_back(
        decoder_pool()[static_cast<std::size_t>(argmax_lowest_tie(row))]);
  return arch;
}

TensorPtr ste_gate(Tape* tape, const TensorPtr& theta_row, int index) {
  auto gate = Tensor::scalar(1.0);
  if (tape && tape->recording() && theta_row->requires_grad()) {
    gate->set_requires_grad(true);
    const std::vector<double> p = softmax_of(theta_row);
    tape->record("ste_gate", [theta_row, gate, index, p] {
      const double g = gate->grad()[0];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double jac =
            p[static_cast<std::size_t>(index)] *
            ((static_cast<int>(j) == index ? 1.0 : 0.0) - p[j]);
        theta_row->grad()[j] += g * jac;
      }
    });
  }
  return gate;
}

// ---------------------------------------------------------------------------
// Supernet

Supernet::Supernet(const ModelConfig& cfg, int M, int N, Rng& rng)
    : cfg_(cfg), M_(M), N_(N), trunk_(cfg.backbone, rng) {
  require(M >= 0 && N >= 0, "supernet: M, N must be non-negative");
  const auto& b = cfg.backbone;
  for (int i = 0; i < M; ++i) {
    std::vector<std::unique_ptr<BlockOp>> cands;
    for (OperationKind k : encoder_pool())
      cands.push_back(make_block_op(k, b.d, b.d, b.h, b.d_r, rng, b.dropout));
    enc_cands_.push_back(std::move(cands));
  }
  for (int i = 0; i < N; ++i) {
    std::vector<std::unique_ptr<BlockOp>> cands;
    for (OperationKind k : decoder_pool())
      cands.push_back(make_block_op(k, b.d, b.d, b.h, b.d_r, rng, b.dropout));
    dec_cands_.push_back(std::move(cands));
  }
  heads_ = HeadSet(cfg, rng);
  theta_ = ArchitectureWeights::zeros(M, N);
}

int Supernet::pool_index(OperationKind k, bool decoder) {
  const auto& pool = decoder ? decoder_pool() : encoder_pool();
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i] == k) return static_cast<int>(i);
  throw std::invalid_argument("operation not in pool");
}

BlockOp* Supernet::encoder_candidate(int block, int op_index) const {
  return enc_cands_[static_cast<std::size_t>(block)]
                   [static_cast<std::size_t>(op_index)]
                       .get();
}

BlockOp* Supernet::decoder_candidate(int block, int op_index) const {
  return dec_cands_[static_cast<std::size_t>(block)]
                   [static_cast<std::size_t>(op_index)]
                       .get();
}

int Supernet::block_record_count() const { return 2 * M_ + 4 * N_; }

BackboneOut Supernet::forward(const EvalCtx& ctx, const MultimodalSample& s,
                              const Architecture& path,
                              bool gate_theta) const {
  validate_architecture(path, M_, N_);
  Tape* tape = ctx.tape;
  BackboneOut out;

  TensorPtr x =
      trunk_.sent.forward(ctx, s.tokens, cfg_.backbone.m_max, &out.x_mask);
  if (trunk_.adapt_x) x = trunk_.adapt_x->apply(tape, x);

  BlockInputs enc_in;
  enc_in.self_mask = &out.x_mask;
  for (int i = 0; i < M_; ++i) {
    const int k = pool_index(path.encoder_ops[static_cast<std::size_t>(i)],
                             /*decoder=*/false);
    enc_in.x = x;
    x = encoder_candidate(i, k)->forward(ctx, enc_in);
    if (gate_theta)
      x = ops::mul_scalar(
          tape, x,
          ste_gate(tape, theta_.enc_rows[static_cast<std::size_t>(i)], k));
  }
  out.x_final = x;

  require(s.objects_t != nullptr && s.relation_t != nullptr,
          "supernet: sample tensors not prepared");
  TensorPtr y = s.objects_t;
  if (trunk_.adapt_y) y = trunk_.adapt_y->apply(tape, y);

  BlockInputs dec_in;
  dec_in.relation = s.relation_t;
  dec_in.cross = out.x_final;
  dec_in.cross_mask = &out.x_mask;
  for (int i = 0; i < N_; ++i) {
    const int k = pool_index(path.decoder_ops[static_cast<std::size_t>(i)],
                             /*decoder=*/true);
    dec_in.x = y;
    y = decoder_candidate(i, k)->forward(ctx, dec_in);
    if (gate_theta)
      y = ops::mul_scalar(
          tape, y,
          ste_gate(tape, theta_.dec_rows[static_cast<std::size_t>(i)], k));
  }
  out.y_final = y;
  return out;
}

TensorPtr Supernet::loss(const EvalCtx& ctx, const MultimodalSample& s,
                         const Architecture& path, bool gate_theta) const {
  BackboneOut out = forward(ctx, s, path, gate_theta);
  return head_loss(ctx, heads_, cfg_, out, s);
}

TensorPtr Supernet::itm_score(const EvalCtx& ctx, const MultimodalSample& s,
                              const Architecture& path,
                              bool gate_theta) const {
  BackboneOut out = forward(ctx, s, path, gate_theta);
  return heads_.itm.score(ctx, out.x_final, out.y_final, &out.x_mask);
}

std::vector<TensorPtr> Supernet::active_params(
    const Architecture& path) const {
  validate_architecture(path, M_, N_);
  std::vector<TensorPtr> out;
  trunk_.collect(out);
  heads_.collect(out);
  for (int i = 0; i < M_; ++i)
    encoder_candidate(
        i, pool_index(path.encoder_ops[static_cast<std::size_t>(i)], false))
        ->collect(out);
  for (int i = 0; i < N_; ++i)
    decoder_candidate(
        i, pool_index(path.decoder_ops[static_cast<std::size_t>(i)], true))
        ->collect(out);
  return out;
}

std::vector<TensorPtr> Supernet::all_w_params() const {
  std::vector<TensorPtr> out;
  trunk_.collect(out);
  heads_.collect(out);
  for (const auto& block : enc_cands_)
    for (const auto& op : block) op->collect(out);
  for (const auto& block : dec_cands_)
    for (const auto& op : block) op->collect(out);
  return out;
}

Model Supernet::instantiate(const Architecture& arch) const {
  validate_architecture(arch, M_, N_);
  std::vector<std::unique_ptr<BlockOp>> enc, dec;
  for (int i = 0; i < M_; ++i)
    enc.push_back(
        encoder_candidate(
            i, pool_index(arch.encoder_ops[static_cast<std::size_t>(i)], false))
            ->clone());
  for (int i = 0; i < N_; ++i)
    dec.push_back(
        decoder_candidate(
            i, pool_index(arch.decoder_ops[static_cast<std::size_t>(i)], true))
            ->clone());
  return Model(cfg_, arch, trunk_.clone(), std::move(enc), std::move(dec),
               heads_.clone());
}

NamedParams Supernet::named_params() const {
  NamedParams out;
  auto push = [&out](const std::string& prefix,
                     const std::vector<TensorPtr>& ts) {
    for (std::size_t i = 0; i < ts.size(); ++i)
      out.emplace_back(prefix + "." + std::to_string(i), ts[i]);
  };
  std::vector<TensorPtr> tmp;
  trunk_.collect(tmp);
  push("trunk", tmp);
  for (int i = 0; i < M_; ++i)
    for (std::size_t k = 0; k < encoder_pool().size(); ++k) {
      tmp.clear();
      enc_cands_[static_cast<std::size_t>(i)][k]->collect(tmp);
      push("enc" + std::to_string(i) + "." +
               std::string(op_name(encoder_pool()[k])),
           tmp);
    }
  for (int i = 0; i < N_; ++i)
    for (std::size_t k = 0; k < decoder_pool().size(); ++k) {
      tmp.clear();
      dec_cands_[static_cast<std::size_t>(i)][k]->collect(tmp);
      push("dec" + std::to_string(i) + "." +
               std::string(op_name(decoder_pool()[k])),
           tmp);
    }
  tmp.clear();
  heads_.collect(tmp);
  push("head", tmp);
  for (int i = 0; i < M_; ++i)
    out.emplace_back("theta.enc" + std::to_string(i),
                     theta_.enc_rows[static_cast<std::size_t>(i)]);
  for (int i = 0; i < N_; ++i)
    out.emplace_back("theta.dec" + std::to_string(i),
                     theta_.dec_rows[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace ednas
