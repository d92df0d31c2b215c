#include "ednas/serialize.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace ednas {

using nlohmann::json;
using nlohmann::ordered_json;

std::string arch_to_json(const Architecture& arch) {
  ordered_json j;
  j["encoder"] = json::array();
  j["decoder"] = json::array();
  for (auto k : arch.encoder_ops) j["encoder"].push_back(op_name(k));
  for (auto k : arch.decoder_ops) j["decoder"].push_back(op_name(k));
  return j.dump();
}

Architecture arch_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("architecture file: ") + e.what());
  }
  require(j.contains("encoder") && j.contains("decoder"),
          "architecture file: missing encoder/decoder lists");
  Architecture arch;
  for (const auto& name : j["encoder"]) {
    auto k = op_from_name(name.get<std::string>());
    require(k.has_value(), "architecture file: unknown encoder op \"" +
                               name.get<std::string>() + "\"");
    arch.encoder_ops.push_back(*k);
  }
  for (const auto& name : j["decoder"]) {
    auto k = op_from_name(name.get<std::string>());
    require(k.has_value(), "architecture file: unknown decoder op \"" +
                               name.get<std::string>() + "\"");
    arch.decoder_ops.push_back(*k);
  }
  validate_architecture(arch, static_cast<int>(arch.encoder_ops.size()),
                        static_cast<int>(arch.decoder_ops.size()));
  return arch;
}

void save_architecture(const std::string& path, const Architecture& arch) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << arch_to_json(arch) << "\n";
}

Architecture load_architecture(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return arch_from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Samples

void save_samples(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    ordered_json j;
    j["tokens"] = s.tokens;
    j["n"] = s.n;
    j["d_y"] = s.d_y;
    j["objects"] = s.objects;
    json boxes = json::array();
    for (const Box& b : s.boxes) {
      boxes.push_back(b.x);
      boxes.push_back(b.y);
      boxes.push_back(b.w);
      boxes.push_back(b.h);
    }
    j["boxes"] = boxes;
    switch (data.task) {
      case TaskKind::vqa: j["label"] = s.answer; break;
      case TaskKind::itm: j["label"] = s.match; break;
      case TaskKind::vg:
        j["label"] = {s.gt_box.x, s.gt_box.y, s.gt_box.w, s.gt_box.h};
        break;
    }
    if (i < data.latents.size()) {
      const auto& lat = data.latents[i];
      j["codes"] = lat.codes;
      j["qkind"] = lat.question_kind;
      j["qcode"] = lat.question_code;
      j["qtarget"] = lat.target_object;
    }
    out << j.dump() << "\n";
  }
}

Dataset load_samples(const std::string& path, const Dataset& meta) {
  std::ifstream in(path);
  require(in.good(), "cannot read " + path);
  Dataset data = meta;
  data.samples.clear();
  data.latents.clear();
  data.text_codes.clear();
  data.image_codes.clear();
  std::string line;
  int id = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    MultimodalSample s;
    s.id = id++;
    s.tokens = j.at("tokens").get<std::vector<int>>();
    s.n = j.at("n").get<int>();
    s.d_y = j.at("d_y").get<int>();
    s.objects = j.at("objects").get<std::vector<double>>();
    const auto boxes = j.at("boxes").get<std::vector<double>>();
    require(boxes.size() == static_cast<std::size_t>(4 * s.n),
            "sample record: boxes must hold 4n reals");
    for (int i = 0; i < s.n; ++i)
      s.boxes.push_back(Box{boxes[static_cast<std::size_t>(4 * i)],
                            boxes[static_cast<std::size_t>(4 * i + 1)],
                            boxes[static_cast<std::size_t>(4 * i + 2)],
                            boxes[static_cast<std::size_t>(4 * i + 3)]});
    switch (data.task) {
      case TaskKind::vqa: s.answer = j.at("label").get<int>(); break;
      case TaskKind::itm: s.match = j.at("label").get<int>(); break;
      case TaskKind::vg: {
        const auto gb = j.at("label").get<std::vector<double>>();
        require(gb.size() == 4, "sample record: vg label must be a box");
        s.gt_box = Box{gb[0], gb[1], gb[2], gb[3]};
        break;
      }
    }
    Dataset::SampleLatents lat;
    if (j.contains("codes")) {
      lat.codes = j["codes"].get<std::vector<int>>();
      lat.question_kind = j.value("qkind", -1);
      lat.question_code = j.value("qcode", -1);
      lat.target_object = j.value("qtarget", -1);
    }
    data.latents.push_back(std::move(lat));
    data.samples.push_back(std::move(s));
  }
  if (data.task == TaskKind::itm) {
    for (const auto& lat : data.latents) {
      data.text_codes.push_back(lat.question_code);
      std::vector<int> distinct;
      for (int c : lat.codes)
        if (std::find(distinct.begin(), distinct.end(), c) == distinct.end())
          distinct.push_back(c);
      std::sort(distinct.begin(), distinct.end());
      data.image_codes.push_back(std::move(distinct));
    }
  }
  data.prepare();
  return data;
}

void save_task_meta(const std::string& path, const Dataset& data) {
  ordered_json j;
  j["task"] = task_name(data.task);
  j["vocab"] = data.vocab;
  j["m_max"] = data.m_max;
  j["n_objects"] = data.n_objects;
  j["d_y"] = data.d_y;
  j["answer_count"] = data.answer_count;
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << j.dump(2) << "\n";
}

Dataset load_task_meta(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot read " + path);
  json j = json::parse(in);
  Dataset d;
  const std::string t = j.at("task").get<std::string>();
  if (t == "vqa")
    d.task = TaskKind::vqa;
  else if (t == "itm")
    d.task = TaskKind::itm;
  else if (t == "vg")
    d.task = TaskKind::vg;
  else
    throw std::invalid_argument("task meta: unknown task \"" + t + "\"");
  d.vocab = j.at("vocab").get<int>();
  d.m_max = j.at("m_max").get<int>();
  d.n_objects = j.at("n_objects").get<int>();
  d.d_y = j.at("d_y").get<int>();
  d.answer_count = j.at("answer_count").get<int>();
  return d;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.good(), "checkpoint: truncated file");
  return v;
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  require(in.good(), "checkpoint: truncated string");
  return s;
}

void put_doubles(std::ofstream& out, const std::vector<double>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::ifstream& in) {
  const auto n = get<std::uint64_t>(in);
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  require(in.good(), "checkpoint: truncated data");
  return v;
}

void put_optim(std::ofstream& out,
               const std::vector<Checkpoint::OptimSlot>& slots) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(slots.size()));
  for (const auto& s : slots) {
    put_string(out, s.name);
    put<std::int64_t>(out, s.t);
    put_doubles(out, s.m);
    put_doubles(out, s.v);
  }
}

std::vector<Checkpoint::OptimSlot> get_optim(std::ifstream& in) {
  const auto n = get<std::uint32_t>(in);
  std::vector<Checkpoint::OptimSlot> slots(n);
  for (auto& s : slots) {
    s.name = get_string(in);
    s.t = get<std::int64_t>(in);
    s.m = get_doubles(in);
    s.v = get_doubles(in);
  }
  return slots;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write " + path);
  put<std::uint32_t>(out, Checkpoint::kMagic);
  put<std::uint32_t>(out, Checkpoint::kVersion);
  put_string(out, ckpt.kind);
  put<std::uint64_t>(out, ckpt.config_hash);
  put<std::int64_t>(out, ckpt.epoch);
  put_string(out, ckpt.stage);
  put_string(out, ckpt.rng_state);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.blobs.size()));
  for (const auto& b : ckpt.blobs) {
    put_string(out, b.name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(b.shape.size()));
    for (int d : b.shape) put<std::int32_t>(out, d);
    put_doubles(out, b.data);
  }
  put_optim(out, ckpt.optim_w);
  put_optim(out, ckpt.optim_theta);
  require(out.good(), "checkpoint: write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path,
                           std::optional<std::uint64_t> expected_hash) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot read " + path);
  require(get<std::uint32_t>(in) == Checkpoint::kMagic,
          "checkpoint: bad magic in " + path);
  require(get<std::uint32_t>(in) == Checkpoint::kVersion,
          "checkpoint: unsupported version in " + path);
  Checkpoint ckpt;
  ckpt.kind = get_string(in);
  ckpt.config_hash = get<std::uint64_t>(in);
  ckpt.epoch = get<std::int64_t>(in);
  ckpt.stage = get_string(in);
  ckpt.rng_state = get_string(in);
  if (expected_hash)
    require(ckpt.config_hash == *expected_hash,
            "checkpoint: config hash mismatch (checkpoint was written by a "
            "different configuration)");
  const auto n = get<std::uint32_t>(in);
  ckpt.blobs.resize(n);
  for (auto& b : ckpt.blobs) {
    b.name = get_string(in);
    const auto nd = get<std::uint8_t>(in);
    for (int i = 0; i < nd; ++i) b.shape.push_back(get<std::int32_t>(in));
    b.data = get_doubles(in);
  }
  ckpt.optim_w = get_optim(in);
  ckpt.optim_theta = get_optim(in);
  return ckpt;
}

void pack_params(Checkpoint& ckpt, const NamedParams& params) {
  for (const auto& [name, t] : params)
    ckpt.blobs.push_back({name, t->shape(), t->values()});
}

void unpack_params(const Checkpoint& ckpt, const NamedParams& params) {
  require(ckpt.blobs.size() == params.size(),
          "checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& blob = ckpt.blobs[i];
    const auto& [name, t] = params[i];
    require(blob.name == name, "checkpoint: parameter name mismatch at \"" +
                                   name + "\" vs \"" + blob.name + "\"");
    require(blob.shape == t->shape(),
            "checkpoint: shape mismatch for \"" + name + "\"");
    t->values() = blob.data;
  }
}

void pack_optimizer(std::vector<Checkpoint::OptimSlot>& out, const Adam& opt,
                    const NamedParams& params) {
  const auto& slots = opt.slots();
  for (const auto& [name, t] : params) {
    auto it = slots.find(t.get());
    if (it == slots.end()) continue;
    out.push_back({name, it->second.t, it->second.m, it->second.v});
  }
}

void unpack_optimizer(const std::vector<Checkpoint::OptimSlot>& in, Adam& opt,
                      const NamedParams& params) {
  for (const auto& slot : in) {
    const Tensor* key = nullptr;
    for (const auto& [name, t] : params)
      if (name == slot.name) key = t.get();
    require(key != nullptr,
            "checkpoint: optimizer slot for unknown parameter \"" + slot.name +
                "\"");
    Adam::Slot s;
    s.t = slot.t;
    s.m = slot.m;
    s.v = slot.v;
    opt.slots()[key] = std::move(s);
  }
}

}  // namespace ednas
