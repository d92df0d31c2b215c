#pragma once
// File formats: architecture JSON documents, line-delimited sample records,
// and versioned binary checkpoints with an embedded config hash.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ednas/dataset.hpp"
#include "ednas/model.hpp"
#include "ednas/optim.hpp"

namespace ednas {

// {"encoder": ["SA", ...], "decoder": ["GA", ...]}
std::string arch_to_json(const Architecture& arch);
Architecture arch_from_json(const std::string& text);
void save_architecture(const std::string& path, const Architecture& arch);
Architecture load_architecture(const std::string& path);

// One JSON object per line: tokens, n, d_y, objects (flat), boxes (4n
// reals), label, plus the generator latents needed for negative pools.
void save_samples(const std::string& path, const Dataset& data);
Dataset load_samples(const std::string& path, const Dataset& meta);

// Small sidecar describing a generated task directory.
void save_task_meta(const std::string& path, const Dataset& data);
Dataset load_task_meta(const std::string& path);

std::uint64_t fnv1a64(const std::string& s);

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  static constexpr std::uint32_t kMagic = 0x53414445u;  // "EDAS"
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;  // "model" | "supernet"
  std::uint64_t config_hash = 0;
  std::int64_t epoch = 0;
  std::string stage;
  std::string rng_state;

  struct TensorBlob {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
  };
  std::vector<TensorBlob> blobs;

  struct OptimSlot {
    std::string name;
    std::int64_t t = 0;
    std::vector<double> m, v;
  };
  std::vector<OptimSlot> optim_w, optim_theta;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws on bad magic, wrong version, or (when expected_hash is given) a
// config hash mismatch.
Checkpoint read_checkpoint(const std::string& path,
                           std::optional<std::uint64_t> expected_hash = {});

// Fill / restore helpers.
void pack_params(Checkpoint& ckpt, const NamedParams& params);
void unpack_params(const Checkpoint& ckpt, const NamedParams& params);
void pack_optimizer(std::vector<Checkpoint::OptimSlot>& out, const Adam& opt,
                    const NamedParams& params);
void unpack_optimizer(const std::vector<Checkpoint::OptimSlot>& in, Adam& opt,
                      const NamedParams& params);

}  // namespace ednas
