// Command line front end: search / train / evaluate / generate / enumerate /
// inspect. Exit codes: 0 success, 1 stage failure, 2 usage error.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "ednas/driver.hpp"

using namespace ednas;

namespace {

struct CliOptions {
  std::string task = "vqa";
  SearchConfig cfg;
  SyntheticTaskSpec spec;
  std::string arch_file;
  std::string out_dir = "out";
  std::string data_dir;
  std::string checkpoint;
  std::string resume;
  std::string estimator = "ste";
  bool fixed_code = false;
};

TaskKind parse_task(const std::string& name) {
  if (name == "vqa") return TaskKind::vqa;
  if (name == "itm") return TaskKind::itm;
  if (name == "vg") return TaskKind::vg;
  throw std::invalid_argument("unknown task \"" + name + "\" (vqa|itm|vg)");
}

void add_common_flags(CLI::App* cmd, CliOptions& o) {
  cmd->add_option("--task", o.task, "task kind: vqa, itm or vg");
  cmd->add_option("--M", o.cfg.M, "encoder block count");
  cmd->add_option("--N", o.cfg.N, "decoder block count");
  cmd->add_option("--d", o.cfg.d, "latent width");
  cmd->add_option("--heads", o.cfg.h, "attention head count");
  cmd->add_option("--d-z", o.cfg.d_z, "fused width (default 2d)");
  cmd->add_option("--warmup-epochs", o.cfg.T_w, "warm-up epochs T_w");
  cmd->add_option("--search-epochs", o.cfg.T_j, "iterative epochs T_j");
  cmd->add_option("--u", o.cfg.u, "W:theta update ratio");
  cmd->add_option("--split-ratio", o.cfg.split_ratio, "|D_m| / |D_a|");
  cmd->add_option("--seed", o.cfg.seed, "run seed");
  cmd->add_option("--batch", o.cfg.batch, "mini-batch size");
  cmd->add_option("--lr-w", o.cfg.lr_w, "model-weight learning rate");
  cmd->add_option("--lr-theta", o.cfg.lr_theta,
                  "architecture-weight learning rate");
  cmd->add_option("--retrain-epochs", o.cfg.retrain_epochs,
                  "from-scratch epochs");
  cmd->add_option("--retrain-lr", o.cfg.retrain_lr,
                  "from-scratch learning rate");
  cmd->add_option("--estimator", o.estimator,
                  "theta estimator: ste or reinforce");
  cmd->add_option("--mine-sample", o.cfg.mine_sample,
                  "itm negatives sampled per direction");
  cmd->add_option("--mine-top", o.cfg.mine_top,
                  "itm hard-negative shortlist size");
  cmd->add_option("--samples", o.spec.train_samples, "train sample count");
  cmd->add_option("--val-samples", o.spec.val_samples,
                  "validation sample count");
  cmd->add_option("--objects", o.spec.n_objects, "objects per image");
  cmd->add_option("--codes", o.spec.attribute_count, "latent attribute codes");
  cmd->add_option("--d-y", o.spec.d_y, "object feature width");
  cmd->add_option("--m-len", o.spec.m_len, "question token length");
  cmd->add_option("--m-max", o.spec.m_max, "padded sequence length");
  cmd->add_option("--w-count", o.spec.w_count, "vqa counting-question weight");
  cmd->add_option("--w-presence", o.spec.w_presence,
                  "vqa presence-question weight");
  cmd->add_option("--w-nearest", o.spec.w_nearest,
                  "vqa nearest-attribute question weight");
  cmd->add_flag("--fixed-code", o.fixed_code,
                "pin every question to code 0 (counting stress)");
  cmd->add_option("--arch-file", o.arch_file, "architecture JSON file");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
  cmd->add_option("--data", o.data_dir, "dataset directory (from `generate`)");
}

void finalize(CliOptions& o) {
  o.spec.task = parse_task(o.task);
  o.spec.seed = o.cfg.seed;
  if (o.fixed_code) {
    o.spec.fixed_code = true;
    o.spec.w_count = 1.0;
    o.spec.w_presence = 0.0;
    o.spec.w_nearest = 0.0;
  }
  if (o.estimator == "ste")
    o.cfg.estimator = ThetaEstimator::ste;
  else if (o.estimator == "reinforce")
    o.cfg.estimator = ThetaEstimator::reinforce;
  else
    throw std::invalid_argument("unknown estimator \"" + o.estimator + "\"");
}

TaskData load_or_generate(const CliOptions& o) {
  if (o.data_dir.empty()) return generate_task_data(o.spec);
  const Dataset meta = load_task_meta(o.data_dir + "/task.json");
  TaskData td;
  td.train = load_samples(o.data_dir + "/train.jsonl", meta);
  td.val = load_samples(o.data_dir + "/val.jsonl", meta);
  return td;
}

int cmd_generate(CliOptions& o) {
  finalize(o);
  const TaskData data = generate_task_data(o.spec);
  std::filesystem::create_directories(o.out_dir);
  save_task_meta(o.out_dir + "/task.json", data.train);
  save_samples(o.out_dir + "/train.jsonl", data.train);
  save_samples(o.out_dir + "/val.jsonl", data.val);
  std::cout << "wrote " << data.train.size() << " train / " << data.val.size()
            << " val samples to " << o.out_dir << "\n";
  return 0;
}

int cmd_search(CliOptions& o) {
  finalize(o);
  const TaskData data = load_or_generate(o);
  const RunReport report =
      o.resume.empty() ? run_search_data(o.cfg, data, o.out_dir)
                       : resume_search_data(o.cfg, data, o.resume, o.out_dir);
  std::cout << "searched architecture: " << arch_to_string(report.searched)
            << "\n"
            << "supernet val metric:   " << report.supernet_val_metric << "\n"
            << "retrained val metric:  " << report.final_val_metric << "\n"
            << "artifacts in " << o.out_dir << "\n";
  return 0;
}

int cmd_train(CliOptions& o) {
  finalize(o);
  if (o.arch_file.empty())
    throw std::invalid_argument("train requires --arch-file");
  const Architecture arch = load_architecture(o.arch_file);
  const TaskData data = load_or_generate(o);
  Rng rng(splitmix64(o.cfg.seed ^ 0x545241494eULL));
  Model model(model_config_for(o.cfg, data.train), arch, rng);
  TrainOptions opts;
  opts.epochs = o.cfg.retrain_epochs;
  opts.lr = o.cfg.retrain_lr;
  opts.batch = o.cfg.batch;
  opts.mine_sample = o.cfg.mine_sample;
  opts.mine_top = o.cfg.mine_top;
  opts.seed = o.cfg.seed;
  std::vector<EpochRow> log;
  train_standalone(model, data.train, opts, &log, &data.val);

  std::filesystem::create_directories(o.out_dir);
  Checkpoint ckpt;
  ckpt.kind = "model";
  ckpt.config_hash = o.cfg.hash();
  ckpt.epoch = opts.epochs;
  ckpt.stage = "final";
  pack_params(ckpt, model.named_params());
  write_checkpoint(o.out_dir + "/model.ckpt", ckpt);
  {
    std::ofstream out(o.out_dir + "/metrics.csv");
    out << epoch_rows_csv(log);
  }
  const std::string table = eval_report(model, data.val, o.cfg.seed);
  {
    std::ofstream out(o.out_dir + "/eval.txt");
    out << table;
  }
  std::cout << table;
  return 0;
}

int cmd_evaluate(CliOptions& o) {
  finalize(o);
  if (o.arch_file.empty())
    throw std::invalid_argument("evaluate requires --arch-file");
  if (o.checkpoint.empty())
    throw std::invalid_argument("evaluate requires --checkpoint");
  const Architecture arch = load_architecture(o.arch_file);
  const TaskData data = load_or_generate(o);
  Rng rng(1);
  Model model(model_config_for(o.cfg, data.train), arch, rng);
  const Checkpoint ckpt = read_checkpoint(o.checkpoint);
  require(ckpt.kind == "model", "evaluate: checkpoint does not hold a model");
  unpack_params(ckpt, model.named_params());
  std::cout << eval_report(model, data.val, o.cfg.seed);
  return 0;
}

int cmd_enumerate(CliOptions& o) {
  finalize(o);
  const auto ranking = exhaustive_oracle(o.cfg, o.spec);
  std::filesystem::create_directories(o.out_dir);
  std::ofstream out(o.out_dir + "/ranking.csv");
  out << "rank,architecture,val_loss,val_metric\n";
  for (std::size_t i = 0; i < ranking.size(); ++i)
    out << i << ",\"" << arch_to_string(ranking[i].arch) << "\","
        << ranking[i].val_loss << ',' << ranking[i].val_metric << "\n";
  std::cout << "enumerated " << ranking.size()
            << " architectures; best: " << arch_to_string(ranking.front().arch)
            << " (val loss " << ranking.front().val_loss << ")\n"
            << "ranking written to " << o.out_dir << "/ranking.csv\n";
  return 0;
}

int cmd_inspect(CliOptions& o) {
  finalize(o);
  std::cout << std::fixed << std::setprecision(4);
  if (!o.arch_file.empty()) {
    std::cout << arch_to_string(load_architecture(o.arch_file)) << "\n";
    return 0;
  }
  if (!o.checkpoint.empty()) {
    const Checkpoint ckpt = read_checkpoint(o.checkpoint);
    for (const auto& blob : ckpt.blobs) {
      if (blob.name.rfind("theta.", 0) != 0) continue;
      double mx = blob.data[0];
      for (double v : blob.data) mx = std::max(mx, v);
      double z = 0.0;
      std::vector<double> p(blob.data.size());
      for (std::size_t i = 0; i < blob.data.size(); ++i) {
        p[i] = std::exp(blob.data[i] - mx);
        z += p[i];
      }
      const auto& pool =
          blob.data.size() == 2 ? encoder_pool() : decoder_pool();
      std::cout << blob.name << ":";
      for (std::size_t i = 0; i < p.size(); ++i)
        std::cout << ' ' << op_name(pool[i]) << ' ' << p[i] / z;
      std::cout << "\n";
    }
    return 0;
  }
  // fresh supernet: print the uniform softmax rows
  Rng rng(o.cfg.seed);
  SyntheticTaskSpec tiny = o.spec;
  const Dataset d = generate_synthetic(tiny, 2, 1);
  Supernet net(model_config_for(o.cfg, d), o.cfg.M, o.cfg.N, rng);
  for (int i = 0; i < net.M(); ++i) {
    const auto p = net.theta().softmax_enc(i);
    std::cout << "theta.enc" << i << ":";
    for (std::size_t k = 0; k < p.size(); ++k)
      std::cout << ' ' << op_name(encoder_pool()[k]) << ' ' << p[k];
    std::cout << "\n";
  }
  for (int i = 0; i < net.N(); ++i) {
    const auto p = net.theta().softmax_dec(i);
    std::cout << "theta.dec" << i << ":";
    for (std::size_t k = 0; k < p.size(); ++k)
      std::cout << ' ' << op_name(decoder_pool()[k]) << ' ' << p[k];
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "one-shot encoder-decoder architecture search on synthetic multimodal "
      "tasks"};
  app.require_subcommand(1);

  CliOptions o;
  auto* c_search =
      app.add_subcommand("search", "run the one-shot search end to end");
  c_search->add_option("--resume", o.resume,
                       "supernet warm-up checkpoint to resume from");
  auto* c_train =
      app.add_subcommand("train", "train a fixed architecture from scratch");
  auto* c_eval = app.add_subcommand("evaluate", "evaluate a trained checkpoint");
  c_eval->add_option("--checkpoint", o.checkpoint, "model checkpoint path");
  auto* c_gen = app.add_subcommand("generate", "write a synthetic dataset");
  auto* c_enum = app.add_subcommand(
      "enumerate", "train every architecture in a tiny space");
  auto* c_inspect =
      app.add_subcommand("inspect", "print theta or an architecture file");
  c_inspect->add_option("--checkpoint", o.checkpoint,
                        "supernet checkpoint path");
  for (CLI::App* cmd : {c_search, c_train, c_eval, c_gen, c_enum, c_inspect})
    add_common_flags(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (app.got_subcommand(c_search)) return cmd_search(o);
    if (app.got_subcommand(c_train)) return cmd_train(o);
    if (app.got_subcommand(c_eval)) return cmd_evaluate(o);
    if (app.got_subcommand(c_gen)) return cmd_generate(o);
    if (app.got_subcommand(c_enum)) return cmd_enumerate(o);
    if (app.got_subcommand(c_inspect)) return cmd_inspect(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
