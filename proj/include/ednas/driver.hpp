#pragma once
// End-to-end machinery: supernet training stages (warm-up, iterative
// alternation), standalone training, exhaustive enumeration, and the
// search -> derive -> retrain -> evaluate pipeline.

#include <map>
#include <string>

#include "ednas/search.hpp"
#include "ednas/serialize.hpp"
#include "ednas/synthetic.hpp"

namespace ednas {

enum class ThetaEstimator { ste, reinforce };

struct SearchConfig {
  int M = 2, N = 3;
  int d = 64, h = 4;
  int d_z = 0;  // 0 -> 2d
  int T_w = 50, T_j = 20, u = 5;
  double split_ratio = 4.0;
  double lr_w = 1e-4, lr_theta = 3e-3;
  int batch = 32;
  std::uint64_t seed = 1;
  ThetaEstimator estimator = ThetaEstimator::ste;
  int patience = 3;  // early stop on the held-out loss
  int retrain_epochs = 15;
  double retrain_lr = 1e-3;
  int mine_sample = 64, mine_top = 5;
  double vg_lambda = 1.0;
  double dropout = 0.1;

  std::string canonical_string() const;
  std::uint64_t hash() const { return fnv1a64(canonical_string()); }
};

ModelConfig model_config_for(const SearchConfig& cfg, const Dataset& data);

struct EpochRow {
  int epoch = 0;
  std::string stage;  // warmup | iterative | retrain
  std::string split;  // dm | da | train | val
  double loss = 0.0;
  double metric = -1.0;  // -1 when not measured
  std::vector<double> theta_entropy;
};

std::string epoch_rows_csv(const std::vector<EpochRow>& rows);

// Per block/op gradient-update instrumentation plus stage counters.
struct TrainerStats {
  long w_updates = 0;
  long theta_updates = 0;
  std::map<std::pair<int, int>, long> enc_updates;  // (block, op) -> count
  std::map<std::pair<int, int>, long> dec_updates;
};

class SupernetTrainer {
 public:
  SupernetTrainer(Supernet& net, const SearchConfig& cfg, const Dataset& train,
                  std::vector<int> d_m, std::vector<int> d_a, Rng& rng);

  void warmup(int epochs, std::vector<EpochRow>* log);
  // Runs at most epochs; returns the number actually completed before the
  // early-stopping rule fired.
  int iterative(int epochs, int u, std::vector<EpochRow>* log);

  const TrainerStats& stats() const { return stats_; }
  Adam& w_optimizer() { return opt_w_; }
  Adam& theta_optimizer() { return opt_theta_; }

 private:
  double w_step(const Architecture& arch, const std::vector<int>& batch);
  double theta_step_ste(const Architecture& arch,
                        const std::vector<int>& batch);
  double theta_step_reinforce(const Architecture& arch,
                              const std::vector<int>& batch);
  TensorPtr sample_loss(const EvalCtx& ctx, int idx, const Architecture& arch,
                        bool gate_theta);
  void mine_epoch_negatives();
  double heldout_loss(const Architecture& arch);
  void bump_counts(const Architecture& arch);

  Supernet& net_;
  SearchConfig cfg_;
  const Dataset& train_;
  std::vector<int> d_m_, d_a_;
  std::vector<int> d_m_train_, d_a_train_;  // itm: positives only
  Rng& rng_;
  Adam opt_w_, opt_theta_;
  TrainerStats stats_;
  double reinforce_baseline_ = 0.0;
  bool baseline_init_ = false;
  std::map<int, MinedNegatives> mined_;  // per positive sample index
};

struct TrainOptions {
  int epochs = 15;
  double lr = 1e-3;
  int batch = 32;
  int mine_sample = 64, mine_top = 5;
  std::uint64_t seed = 1;
};

// From-scratch training of a standalone model (mining per epoch for itm).
void train_standalone(Model& model, const Dataset& train,
                      const TrainOptions& opts, std::vector<EpochRow>* log,
                      const Dataset* val = nullptr);

// ---------------------------------------------------------------------------

struct ArchScore {
  Architecture arch;
  double val_loss = 0.0;
  double val_metric = 0.0;
};

// Trains every architecture in the (tiny) search space from scratch under an
// identical budget and returns them sorted by ascending validation loss.
// Rejects search spaces above 256 candidates. Candidates run on worker
// threads with per-candidate derived seeds, so the ranking is deterministic.
std::vector<ArchScore> exhaustive_oracle(const SearchConfig& cfg,
                                         const SyntheticTaskSpec& spec,
                                         int threads = 2);

// 0-based position of `arch` in the ranking (ascending loss).
int oracle_rank_of(const std::vector<ArchScore>& ranking,
                   const Architecture& arch);

// ---------------------------------------------------------------------------

struct RunReport {
  std::string config;
  std::string task;
  std::uint64_t seed = 0;
  Architecture searched;
  std::vector<EpochRow> curve;
  double supernet_val_loss = 0.0;
  double supernet_val_metric = 0.0;
  double final_val_loss = 0.0;
  double final_val_metric = 0.0;
  int search_epochs_run = 0;
  double wall_clock_sec = 0.0;

  std::string to_json() const;  // stable key order
};

// split -> warm-up -> iterative -> derive -> retrain from scratch ->
// evaluate. When out_dir is non-empty, writes arch.json, supernet.ckpt,
// model.ckpt, report.json, metrics.csv and search_log.csv there.
RunReport run_search(const SearchConfig& cfg, const SyntheticTaskSpec& spec,
                     const std::string& out_dir = "");
RunReport run_search_data(const SearchConfig& cfg, const TaskData& data,
                          const std::string& out_dir = "");

// Continues a run from a supernet checkpoint written after warm-up.
RunReport resume_search(const SearchConfig& cfg, const SyntheticTaskSpec& spec,
                        const std::string& checkpoint_path,
                        const std::string& out_dir = "");
RunReport resume_search_data(const SearchConfig& cfg, const TaskData& data,
                             const std::string& checkpoint_path,
                             const std::string& out_dir = "");

// Per-task metric table (tab-delimited); itm adds recall@K over candidate
// pools drawn with the given seed.
std::string eval_report(const Model& model, const Dataset& val,
                        std::uint64_t seed);

}  // namespace ednas
