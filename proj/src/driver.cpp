#include "ednas/driver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

namespace ednas {

using nlohmann::ordered_json;

std::string SearchConfig::canonical_string() const {
  std::ostringstream os;
  os << "M=" << M << ";N=" << N << ";d=" << d << ";h=" << h << ";dz=" << d_z
     << ";Tw=" << T_w << ";Tj=" << T_j << ";u=" << u << ";split=" << split_ratio
     << ";lrw=" << lr_w << ";lrth=" << lr_theta << ";batch=" << batch
     << ";seed=" << seed
     << ";est=" << (estimator == ThetaEstimator::ste ? "ste" : "reinforce")
     << ";patience=" << patience << ";retrain=" << retrain_epochs
     << ";retrain_lr=" << retrain_lr << ";mine=" << mine_sample
     << ";top=" << mine_top << ";lambda=" << vg_lambda
     << ";dropout=" << dropout;
  return os.str();
}

ModelConfig model_config_for(const SearchConfig& cfg, const Dataset& data) {
  ModelConfig mc;
  mc.backbone.vocab = data.vocab;
  mc.backbone.m_max = data.m_max;
  mc.backbone.d_x = cfg.d;
  mc.backbone.d_y = data.d_y;
  mc.backbone.d = cfg.d;
  mc.backbone.h = cfg.h;
  mc.backbone.d_r = 4;
  mc.backbone.dropout = cfg.dropout;
  mc.d_z = cfg.d_z > 0 ? cfg.d_z : 2 * cfg.d;
  mc.answer_count = data.answer_count;
  mc.task = data.task;
  mc.vg_lambda = cfg.vg_lambda;
  return mc;
}

std::string epoch_rows_csv(const std::vector<EpochRow>& rows) {
  std::ostringstream os;
  os << "epoch,stage,split,loss,metric\n";
  for (const auto& r : rows) {
    os << r.epoch << ',' << r.stage << ',' << r.split << ',' << r.loss << ','
       << r.metric << "\n";
  }
  return os.str();
}

namespace {

std::vector<std::vector<int>> make_batches(const std::vector<int>& indices,
                                           int batch) {
  std::vector<std::vector<int>> out;
  for (std::size_t i = 0; i < indices.size(); i += batch) {
    const std::size_t end = std::min(indices.size(), i + batch);
    out.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(i),
                     indices.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (out.empty()) out.push_back({});
  return out;
}

std::vector<int> itm_positives(const Dataset& data,
                               const std::vector<int>& indices) {
  std::vector<int> out;
  for (int i : indices)
    if (data.samples[static_cast<std::size_t>(i)].match == 1) out.push_back(i);
  return out;
}

std::vector<double> theta_entropies(const Supernet& net) {
  std::vector<double> out;
  for (int i = 0; i < net.M(); ++i) out.push_back(net.theta().entropy_enc(i));
  for (int i = 0; i < net.N(); ++i) out.push_back(net.theta().entropy_dec(i));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// SupernetTrainer

SupernetTrainer::SupernetTrainer(Supernet& net, const SearchConfig& cfg,
                                 const Dataset& train, std::vector<int> d_m,
                                 std::vector<int> d_a, Rng& rng)
    : net_(net),
      cfg_(cfg),
      train_(train),
      d_m_(std::move(d_m)),
      d_a_(std::move(d_a)),
      rng_(rng),
      opt_w_({.lr = cfg.lr_w}),
      opt_theta_({.lr = cfg.lr_theta}) {
  if (train_.task == TaskKind::itm) {
    d_m_train_ = itm_positives(train_, d_m_);
    d_a_train_ = itm_positives(train_, d_a_);
    require(!d_m_train_.empty() && !d_a_train_.empty(),
            "trainer: itm split has no positive pairs");
  } else {
    d_m_train_ = d_m_;
    d_a_train_ = d_a_;
  }
}

void SupernetTrainer::bump_counts(const Architecture& arch) {
  for (std::size_t i = 0; i < arch.encoder_ops.size(); ++i)
    ++stats_.enc_updates[{static_cast<int>(i),
                          Supernet::pool_index(arch.encoder_ops[i], false)}];
  for (std::size_t i = 0; i < arch.decoder_ops.size(); ++i)
    ++stats_.dec_updates[{static_cast<int>(i),
                          Supernet::pool_index(arch.decoder_ops[i], true)}];
}

void SupernetTrainer::mine_epoch_negatives() {
  if (train_.task != TaskKind::itm) return;
  const Architecture arch =
      sample_architecture(net_.theta(), SampleMode::softmax, rng_);
  mined_.clear();
  std::vector<int> all = d_m_train_;
  all.insert(all.end(), d_a_train_.begin(), d_a_train_.end());
  for (int idx : all) {
    const auto& pos = train_.samples[static_cast<std::size_t>(idx)];
    auto score_text = [&](int j) {
      Tape tape;
      tape.set_recording(false);
      EvalCtx ctx{&tape, false, nullptr, nullptr};
      MultimodalSample pair = make_pair_sample(
          pos, train_.samples[static_cast<std::size_t>(j)]);
      return net_.itm_score(ctx, pair, arch)->value();
    };
    auto score_image = [&](int j) {
      Tape tape;
      tape.set_recording(false);
      EvalCtx ctx{&tape, false, nullptr, nullptr};
      MultimodalSample pair = make_pair_sample(
          train_.samples[static_cast<std::size_t>(j)], pos);
      return net_.itm_score(ctx, pair, arch)->value();
    };
    mined_[idx] = mine_hard_negatives(
        score_text, score_image, idx, train_.negative_text_pool(idx),
        train_.negative_image_pool(idx), rng_, cfg_.mine_sample, cfg_.mine_top);
  }
}

TensorPtr SupernetTrainer::sample_loss(const EvalCtx& ctx, int idx,
                                       const Architecture& arch,
                                       bool gate_theta) {
  const auto& s = train_.samples[static_cast<std::size_t>(idx)];
  if (train_.task != TaskKind::itm)
    return net_.loss(ctx, s, arch, gate_theta);
  const MinedNegatives& neg = mined_.at(idx);
  MultimodalSample neg_text = make_pair_sample(
      s, train_.samples[static_cast<std::size_t>(neg.text_idx)]);
  MultimodalSample neg_image = make_pair_sample(
      train_.samples[static_cast<std::size_t>(neg.image_idx)], s);
  TensorPtr s_pos = net_.itm_score(ctx, s, arch, gate_theta);
  TensorPtr s_nt = net_.itm_score(ctx, neg_text, arch, gate_theta);
  TensorPtr s_ni = net_.itm_score(ctx, neg_image, arch, gate_theta);
  return itm_loss_from_scores(ctx.tape, s_pos, s_nt, s_ni);
}

double SupernetTrainer::w_step(const Architecture& arch,
                               const std::vector<int>& batch) {
  require(!batch.empty(), "trainer: empty batch");
  Tape tape;
  EvalCtx ctx{&tape, true, &rng_, nullptr};
  TensorPtr total;
  for (int idx : batch) {
    TensorPtr l = sample_loss(ctx, idx, arch, false);
    total = total ? ops::add(&tape, total, l) : l;
  }
  TensorPtr mean =
      ops::scale(&tape, total, 1.0 / static_cast<double>(batch.size()));
  tape.backward(mean);
  const auto params = net_.active_params(arch);
  opt_w_.step(params);
  Adam::zero_grad(params);
  ++stats_.w_updates;
  bump_counts(arch);
  return mean->value();
}

double SupernetTrainer::theta_step_ste(const Architecture& arch,
                                       const std::vector<int>& batch) {
  Tape tape;
  EvalCtx ctx{&tape, true, &rng_, nullptr};
  TensorPtr total;
  for (int idx : batch) {
    TensorPtr l = sample_loss(ctx, idx, arch, true);
    total = total ? ops::add(&tape, total, l) : l;
  }
  TensorPtr mean =
      ops::scale(&tape, total, 1.0 / static_cast<double>(batch.size()));
  tape.backward(mean);
  opt_theta_.step(net_.theta_params());
  Adam::zero_grad(net_.theta_params());
  Adam::zero_grad(net_.all_w_params());  // W values untouched by this step
  ++stats_.theta_updates;
  return mean->value();
}

double SupernetTrainer::theta_step_reinforce(const Architecture& arch,
                                             const std::vector<int>& batch) {
  Tape tape;
  tape.set_recording(false);
  EvalCtx ctx{&tape, true, &rng_, nullptr};
  double loss = 0.0;
  for (int idx : batch) loss += sample_loss(ctx, idx, arch, false)->value();
  loss /= static_cast<double>(batch.size());
  if (!baseline_init_) {
    reinforce_baseline_ = loss;
    baseline_init_ = true;
  } else {
    reinforce_baseline_ = 0.9 * reinforce_baseline_ + 0.1 * loss;
  }
  const double advantage = loss - reinforce_baseline_;
  auto& theta = net_.theta();
  for (int i = 0; i < theta.M(); ++i) {
    const auto p = theta.softmax_enc(i);
    const int k = Supernet::pool_index(
        arch.encoder_ops[static_cast<std::size_t>(i)], false);
    auto& row = theta.enc_rows[static_cast<std::size_t>(i)];
    row->ensure_grad();
    for (std::size_t j = 0; j < p.size(); ++j)
      row->grad()[j] +=
          advantage * ((static_cast<int>(j) == k ? 1.0 : 0.0) - p[j]);
  }
  for (int i = 0; i < theta.N(); ++i) {
    const auto p = theta.softmax_dec(i);
    const int k = Supernet::pool_index(
        arch.decoder_ops[static_cast<std::size_t>(i)], true);
    auto& row = theta.dec_rows[static_cast<std::size_t>(i)];
    row->ensure_grad();
    for (std::size_t j = 0; j < p.size(); ++j)
      row->grad()[j] +=
          advantage * ((static_cast<int>(j) == k ? 1.0 : 0.0) - p[j]);
  }
  opt_theta_.step(net_.theta_params());
  Adam::zero_grad(net_.theta_params());
  ++stats_.theta_updates;
  return loss;
}

double SupernetTrainer::heldout_loss(const Architecture& arch) {
  std::vector<double> sample_losses;
  sample_losses.reserve(d_a_.size());
  for (int idx : d_a_) {
    Tape tape;
    tape.set_recording(false);
    EvalCtx ctx{&tape, false, nullptr, nullptr};
    sample_losses.push_back(
        net_.loss(ctx, train_.samples[static_cast<std::size_t>(idx)], arch)
            ->value());
  }
  std::sort(sample_losses.begin(), sample_losses.end());
  double s = 0.0;
  for (double v : sample_losses) s += v;
  return s / std::max<std::size_t>(1, sample_losses.size());
}

void SupernetTrainer::warmup(int epochs, std::vector<EpochRow>* log) {
  for (int e = 1; e <= epochs; ++e) {
    mine_epoch_negatives();
    std::vector<int> order = d_m_train_;
    rng_.shuffle(order);
    const auto batches = make_batches(order, cfg_.batch);
    double sum = 0.0;
    for (const auto& batch : batches) {
      const Architecture arch =
          sample_architecture(net_.theta(), SampleMode::uniform, rng_);
      const double l = w_step(arch, batch);
      if (!std::isfinite(l))
        throw std::runtime_error("warmup: loss diverged (non-finite) at epoch " +
                                 std::to_string(e));
      sum += l;
    }
    if (log)
      log->push_back({e, "warmup", "dm",
                      sum / static_cast<double>(batches.size()), -1.0,
                      theta_entropies(net_)});
  }
}

int SupernetTrainer::iterative(int epochs, int u, std::vector<EpochRow>* log) {
  require(u >= 1, "iterative: u must be >= 1");
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;
  int completed = 0;
  std::size_t da_cursor = 0;
  std::vector<int> da_order = d_a_train_;
  rng_.shuffle(da_order);
  auto da_batches = make_batches(da_order, cfg_.batch);

  for (int e = 1; e <= epochs; ++e) {
    mine_epoch_negatives();
    std::vector<int> order = d_m_train_;
    rng_.shuffle(order);
    const auto batches = make_batches(order, cfg_.batch);
    const int n_groups =
        std::max<int>(1, static_cast<int>(batches.size()) / u);
    double wl = 0.0, tl = 0.0;
    int wn = 0, tn = 0;
    for (int g = 0; g < n_groups; ++g) {
      for (int j = 0; j < u; ++j) {
        const Architecture arch =
            sample_architecture(net_.theta(), SampleMode::softmax, rng_);
        const auto& batch =
            batches[static_cast<std::size_t>(g * u + j) % batches.size()];
        wl += w_step(arch, batch);
        ++wn;
      }
      const Architecture arch =
          sample_architecture(net_.theta(), SampleMode::softmax, rng_);
      const auto& da_batch = da_batches[da_cursor % da_batches.size()];
      ++da_cursor;
      tl += cfg_.estimator == ThetaEstimator::ste
                ? theta_step_ste(arch, da_batch)
                : theta_step_reinforce(arch, da_batch);
      ++tn;
      if (!net_.theta().all_finite())
        throw std::runtime_error(
            "iterative: theta became non-finite at epoch " + std::to_string(e));
    }
    completed = e;
    if (log) {
      log->push_back({e, "iterative", "dm", wl / std::max(1, wn), -1.0,
                      theta_entropies(net_)});
      log->push_back({e, "iterative", "da", tl / std::max(1, tn), -1.0,
                      theta_entropies(net_)});
    }
    const double held = heldout_loss(derive_architecture(net_.theta()));
    if (log)
      log->push_back(
          {e, "iterative", "da_eval", held, -1.0, theta_entropies(net_)});
    if (held < best - 1e-12) {
      best = held;
      stall = 0;
    } else if (++stall >= cfg_.patience) {
      break;
    }
  }
  return completed;
}

// ---------------------------------------------------------------------------
// Standalone training

namespace {

std::map<int, MinedNegatives> mine_for_model(const Model& model,
                                             const Dataset& train,
                                             const std::vector<int>& positives,
                                             const TrainOptions& opts,
                                             Rng& rng) {
  std::map<int, MinedNegatives> mined;
  for (int idx : positives) {
    const auto& pos = train.samples[static_cast<std::size_t>(idx)];
    auto score_text = [&](int j) {
      Tape tape;
      tape.set_recording(false);
      EvalCtx ctx{&tape, false, nullptr, nullptr};
      return model
          .itm_score(ctx, make_pair_sample(
                              pos, train.samples[static_cast<std::size_t>(j)]))
          ->value();
    };
    auto score_image = [&](int j) {
      Tape tape;
      tape.set_recording(false);
      EvalCtx ctx{&tape, false, nullptr, nullptr};
      return model
          .itm_score(ctx, make_pair_sample(
                              train.samples[static_cast<std::size_t>(j)], pos))
          ->value();
    };
    mined[idx] = mine_hard_negatives(score_text, score_image, idx,
                                     train.negative_text_pool(idx),
                                     train.negative_image_pool(idx), rng,
                                     opts.mine_sample, opts.mine_top);
  }
  return mined;
}

}  // namespace

void train_standalone(Model& model, const Dataset& train,
                      const TrainOptions& opts, std::vector<EpochRow>* log,
                      const Dataset* val) {
  Rng rng(splitmix64(opts.seed ^ 0x74726169ULL));
  Adam opt({.lr = opts.lr});
  const auto params = model.params();

  std::vector<int> all(train.samples.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> pool =
      train.task == TaskKind::itm ? itm_positives(train, all) : all;
  require(!pool.empty(), "train: no usable samples");

  for (int e = 1; e <= opts.epochs; ++e) {
    std::map<int, MinedNegatives> mined;
    if (train.task == TaskKind::itm)
      mined = mine_for_model(model, train, pool, opts, rng);
    std::vector<int> order = pool;
    rng.shuffle(order);
    const auto batches = make_batches(order, opts.batch);
    double sum = 0.0;
    for (const auto& batch : batches) {
      Tape tape;
      EvalCtx ctx{&tape, true, &rng, nullptr};
      TensorPtr total;
      for (int idx : batch) {
        const auto& s = train.samples[static_cast<std::size_t>(idx)];
        TensorPtr l;
        if (train.task == TaskKind::itm) {
          const MinedNegatives& neg = mined.at(idx);
          MultimodalSample neg_text = make_pair_sample(
              s, train.samples[static_cast<std::size_t>(neg.text_idx)]);
          MultimodalSample neg_image = make_pair_sample(
              train.samples[static_cast<std::size_t>(neg.image_idx)], s);
          l = itm_loss_from_scores(&tape, model.itm_score(ctx, s),
                                   model.itm_score(ctx, neg_text),
                                   model.itm_score(ctx, neg_image));
        } else {
          l = model.loss(ctx, s);
        }
        total = total ? ops::add(&tape, total, l) : l;
      }
      TensorPtr mean =
          ops::scale(&tape, total, 1.0 / static_cast<double>(batch.size()));
      tape.backward(mean);
      if (!std::isfinite(mean->value()))
        throw std::runtime_error("train: loss diverged (non-finite) at epoch " +
                                 std::to_string(e));
      opt.step(params);
      Adam::zero_grad(params);
      sum += mean->value();
    }
    if (log)
      log->push_back({e, "retrain", "train",
                      sum / static_cast<double>(batches.size()), -1.0, {}});
    if (log && val) {
      const EvalResult ev = evaluate_model(model, *val);
      log->push_back({e, "retrain", "val", ev.loss, ev.metric, {}});
    }
  }
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

std::vector<ArchScore> exhaustive_oracle(const SearchConfig& cfg,
                                         const SyntheticTaskSpec& spec,
                                         int threads) {
  require(cfg.M >= 0 && cfg.N >= 0, "oracle: bad dimensions");
  require(cfg.M + 2 * cfg.N <= 8,
          "oracle: search space exceeds the 256-architecture budget");
  const int total = 1 << (cfg.M + 2 * cfg.N);

  const TaskData data = generate_task_data(spec);
  const ModelConfig mc = model_config_for(cfg, data.train);

  std::vector<Architecture> archs;
  archs.reserve(static_cast<std::size_t>(total));
  for (int code = 0; code < total; ++code) {
    Architecture a;
    int rem = code;
    for (int i = 0; i < cfg.M; ++i) {
      a.encoder_ops.push_back(encoder_pool()[static_cast<std::size_t>(rem % 2)]);
      rem /= 2;
    }
    for (int i = 0; i < cfg.N; ++i) {
      a.decoder_ops.push_back(decoder_pool()[static_cast<std::size_t>(rem % 4)]);
      rem /= 4;
    }
    archs.push_back(std::move(a));
  }

  std::vector<ArchScore> results(static_cast<std::size_t>(total));
  std::atomic<int> cursor{0};
  auto worker = [&] {
    for (;;) {
      const int i = cursor.fetch_add(1);
      if (i >= total) return;
      Rng init(splitmix64(cfg.seed ^ (0xACE1ull + static_cast<std::uint64_t>(i))));
      Model model(mc, archs[static_cast<std::size_t>(i)], init);
      TrainOptions opts;
      opts.epochs = cfg.retrain_epochs;
      opts.lr = cfg.retrain_lr;
      opts.batch = cfg.batch;
      opts.mine_sample = cfg.mine_sample;
      opts.mine_top = cfg.mine_top;
      opts.seed = splitmix64(cfg.seed ^ (0xBEEFull + static_cast<std::uint64_t>(i)));
      train_standalone(model, data.train, opts, nullptr);
      const EvalResult ev = evaluate_model(model, data.val);
      results[static_cast<std::size_t>(i)] = {archs[static_cast<std::size_t>(i)],
                                              ev.loss, ev.metric};
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = std::max(1, threads);
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::stable_sort(results.begin(), results.end(),
                   [](const ArchScore& a, const ArchScore& b) {
                     return a.val_loss < b.val_loss;
                   });
  return results;
}

int oracle_rank_of(const std::vector<ArchScore>& ranking,
                   const Architecture& arch) {
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (ranking[i].arch == arch) return static_cast<int>(i);
  throw std::invalid_argument("oracle_rank_of: architecture not in ranking");
}

// ---------------------------------------------------------------------------
// run_search

namespace {

ordered_json arch_json(const Architecture& arch) {
  ordered_json a;
  a["encoder"] = ordered_json::array();
  a["decoder"] = ordered_json::array();
  for (auto k : arch.encoder_ops) a["encoder"].push_back(op_name(k));
  for (auto k : arch.decoder_ops) a["decoder"].push_back(op_name(k));
  return a;
}

std::string search_log_csv(const std::vector<EpochRow>& rows) {
  std::ostringstream os;
  os << "epoch,stage,split,loss,theta_entropy\n";
  for (const auto& r : rows) {
    os << r.epoch << ',' << r.stage << ',' << r.split << ',' << r.loss << ",\"";
    for (std::size_t i = 0; i < r.theta_entropy.size(); ++i)
      os << (i ? " " : "") << r.theta_entropy[i];
    os << "\"\n";
  }
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << text;
}

Checkpoint supernet_checkpoint(const Supernet& net, const SearchConfig& cfg,
                               SupernetTrainer& trainer, Rng& rng,
                               std::int64_t epoch, const std::string& stage) {
  Checkpoint ckpt;
  ckpt.kind = "supernet";
  ckpt.config_hash = cfg.hash();
  ckpt.epoch = epoch;
  ckpt.stage = stage;
  ckpt.rng_state = rng.save_state();
  const NamedParams named = net.named_params();
  pack_params(ckpt, named);
  pack_optimizer(ckpt.optim_w, trainer.w_optimizer(), named);
  pack_optimizer(ckpt.optim_theta, trainer.theta_optimizer(), named);
  return ckpt;
}

RunReport finish_search(const SearchConfig& cfg, const TaskData& data,
                        Supernet& net, SupernetTrainer& trainer, Rng& run_rng,
                        std::vector<EpochRow>& log, int epochs_run,
                        const std::string& out_dir,
                        std::chrono::steady_clock::time_point t0) {
  if (!out_dir.empty())
    write_checkpoint(out_dir + "/supernet.ckpt",
                     supernet_checkpoint(net, cfg, trainer, run_rng,
                                         epochs_run, "search"));

  const Architecture arch = derive_architecture(net.theta());

  Model path_model = net.instantiate(arch);
  const EvalResult sup_ev = evaluate_model(path_model, data.val);

  Rng retrain_rng = run_rng.child(0x52455452ULL);
  Model final_model(model_config_for(cfg, data.train), arch, retrain_rng);
  TrainOptions opts;
  opts.epochs = cfg.retrain_epochs;
  opts.lr = cfg.retrain_lr;
  opts.batch = cfg.batch;
  opts.mine_sample = cfg.mine_sample;
  opts.mine_top = cfg.mine_top;
  opts.seed = splitmix64(cfg.seed ^ 0x46494e414cULL);
  train_standalone(final_model, data.train, opts, &log, &data.val);
  const EvalResult final_ev = evaluate_model(final_model, data.val);

  RunReport report;
  report.config = cfg.canonical_string();
  report.task = std::string(task_name(data.train.task));
  report.seed = cfg.seed;
  report.searched = arch;
  report.curve = log;
  report.supernet_val_loss = sup_ev.loss;
  report.supernet_val_metric = sup_ev.metric;
  report.final_val_loss = final_ev.loss;
  report.final_val_metric = final_ev.metric;
  report.search_epochs_run = epochs_run;
  report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  if (!out_dir.empty()) {
    save_architecture(out_dir + "/arch.json", arch);
    Checkpoint mc;
    mc.kind = "model";
    mc.config_hash = cfg.hash();
    mc.epoch = cfg.retrain_epochs;
    mc.stage = "final";
    pack_params(mc, final_model.named_params());
    write_checkpoint(out_dir + "/model.ckpt", mc);
    write_text(out_dir + "/report.json", report.to_json() + "\n");
    write_text(out_dir + "/metrics.csv", epoch_rows_csv(log));
    write_text(out_dir + "/search_log.csv", search_log_csv(log));
  }
  return report;
}

}  // namespace

std::string RunReport::to_json() const {
  ordered_json j;
  j["config"] = config;
  j["task"] = task;
  j["seed"] = seed;
  j["architecture"] = arch_json(searched);
  ordered_json curve_rows = ordered_json::array();
  for (const auto& r : curve) {
    ordered_json row;
    row["epoch"] = r.epoch;
    row["stage"] = r.stage;
    row["split"] = r.split;
    row["loss"] = r.loss;
    row["metric"] = r.metric;
    curve_rows.push_back(row);
  }
  j["curve"] = curve_rows;
  j["supernet_val_loss"] = supernet_val_loss;
  j["supernet_val_metric"] = supernet_val_metric;
  j["final_val_loss"] = final_val_loss;
  j["final_val_metric"] = final_val_metric;
  j["search_epochs_run"] = search_epochs_run;
  j["wall_clock_sec"] = wall_clock_sec;
  return j.dump(2);
}

RunReport run_search_data(const SearchConfig& cfg, const TaskData& data,
                          const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  auto [d_m, d_a] = split_train_set(static_cast<int>(data.train.size()),
                                    cfg.split_ratio, cfg.seed);

  Rng run_rng(splitmix64(cfg.seed));
  Rng init_rng = run_rng.child(0x494e4954ULL);
  Supernet net(model_config_for(cfg, data.train), cfg.M, cfg.N, init_rng);
  SupernetTrainer trainer(net, cfg, data.train, d_m, d_a, run_rng);

  std::vector<EpochRow> log;
  trainer.warmup(cfg.T_w, &log);
  if (!out_dir.empty())
    write_checkpoint(out_dir + "/supernet_warmup.ckpt",
                     supernet_checkpoint(net, cfg, trainer, run_rng, cfg.T_w,
                                         "warmup"));
  const int epochs_run = trainer.iterative(cfg.T_j, cfg.u, &log);
  return finish_search(cfg, data, net, trainer, run_rng, log, epochs_run,
                       out_dir, t0);
}

RunReport run_search(const SearchConfig& cfg, const SyntheticTaskSpec& spec,
                     const std::string& out_dir) {
  return run_search_data(cfg, generate_task_data(spec), out_dir);
}

RunReport resume_search_data(const SearchConfig& cfg, const TaskData& data,
                             const std::string& checkpoint_path,
                             const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  auto [d_m, d_a] = split_train_set(static_cast<int>(data.train.size()),
                                    cfg.split_ratio, cfg.seed);

  Rng run_rng(splitmix64(cfg.seed));
  Rng init_rng = run_rng.child(0x494e4954ULL);
  Supernet net(model_config_for(cfg, data.train), cfg.M, cfg.N, init_rng);
  SupernetTrainer trainer(net, cfg, data.train, d_m, d_a, run_rng);

  const Checkpoint ckpt = read_checkpoint(checkpoint_path, cfg.hash());
  require(ckpt.kind == "supernet",
          "resume: checkpoint does not hold a supernet");
  require(ckpt.stage == "warmup",
          "resume: only warm-up checkpoints can seed the iterative stage");
  const NamedParams named = net.named_params();
  unpack_params(ckpt, named);
  unpack_optimizer(ckpt.optim_w, trainer.w_optimizer(), named);
  unpack_optimizer(ckpt.optim_theta, trainer.theta_optimizer(), named);
  run_rng.load_state(ckpt.rng_state);

  std::vector<EpochRow> log;
  const int epochs_run = trainer.iterative(cfg.T_j, cfg.u, &log);
  return finish_search(cfg, data, net, trainer, run_rng, log, epochs_run,
                       out_dir, t0);
}

RunReport resume_search(const SearchConfig& cfg, const SyntheticTaskSpec& spec,
                        const std::string& checkpoint_path,
                        const std::string& out_dir) {
  return resume_search_data(cfg, generate_task_data(spec), checkpoint_path,
                            out_dir);
}

std::string eval_report(const Model& model, const Dataset& val,
                        std::uint64_t seed) {
  const EvalResult ev = evaluate_model(model, val);
  std::ostringstream os;
  os << "metric\tvalue\n";
  os << "samples\t" << ev.total << "\n";
  os << "loss\t" << ev.loss << "\n";
  switch (val.task) {
    case TaskKind::vqa:
      os << "accuracy\t" << ev.metric << "\n";
      break;
    case TaskKind::vg:
      os << "accuracy_iou_0.5\t" << ev.metric << "\n";
      break;
    case TaskKind::itm: {
      os << "pair_accuracy\t" << ev.metric << "\n";
      // recall@K: rank the true image among a pool of distractor images
      Rng rng(splitmix64(seed ^ 0x524543ULL));
      const int pool_size = 10;
      int hits1 = 0, hits5 = 0, total = 0;
      for (std::size_t i = 0; i < val.samples.size(); ++i) {
        const auto& s = val.samples[i];
        if (s.match != 1) continue;
        Tape tape;
        tape.set_recording(false);
        EvalCtx ctx{&tape, false, nullptr, nullptr};
        const double true_score = model.itm_score(ctx, s)->value();
        int better = 0;
        for (int c = 1; c < pool_size; ++c) {
          const int j = rng.uniform_int(static_cast<int>(val.samples.size()));
          if (static_cast<std::size_t>(j) == i) continue;
          MultimodalSample pair =
              make_pair_sample(val.samples[static_cast<std::size_t>(j)], s);
          if (model.itm_score(ctx, pair)->value() > true_score) ++better;
        }
        if (better < 1) ++hits1;
        if (better < 5) ++hits5;
        ++total;
      }
      if (total > 0) {
        os << "recall@1_pool10\t" << static_cast<double>(hits1) / total << "\n";
        os << "recall@5_pool10\t" << static_cast<double>(hits5) / total << "\n";
      }
      break;
    }
  }
  return os.str();
}

}  // namespace ednas
