#pragma once
// Synthetic multimodal task generators. Objects carry latent attribute codes
// embedded in their features; questions are short token programs over those
// codes; every label is recomputable exactly from the latents.

#include <cstdint>

#include "ednas/dataset.hpp"

namespace ednas {

// Token layout: 0 pad, 1 COUNT, 2 PRESENCE, 3 NEAREST, 4 FIND, 5 MATCH,
// 6..7 filler, 8+c the attribute-code tokens.
inline constexpr int kTokenPad = 0;
inline constexpr int kTokenCount = 1;
inline constexpr int kTokenPresence = 2;
inline constexpr int kTokenNearest = 3;
inline constexpr int kTokenFind = 4;
inline constexpr int kTokenMatch = 5;
inline constexpr int kTokenFillerBase = 6;
inline constexpr int kTokenCodeBase = 8;

struct SyntheticTaskSpec {
  TaskKind task = TaskKind::vqa;
  int vocab = 32;
  int n_objects = 6;
  int d_y = 16;
  int attribute_count = 4;

  // vqa question-program mix; fixed_code pins every question to code 0
  // (the pure counting stress where the sentence carries no information).
  double w_count = 0.4, w_presence = 0.4, w_nearest = 0.2;
  bool fixed_code = false;

  int train_samples = 2000;
  int val_samples = 500;
  std::uint64_t seed = 1;

  double feature_noise = 0.05;
  double magnitude_jitter = 0.2;
  double box_jitter = 0.1;   // vg ground-truth jitter
  int m_len = 6;             // question length before padding
  int m_max = 14;
};

// vqa answer ids: counts 0..n, then "no", "yes", then attribute codes.
int vqa_answer_count(const SyntheticTaskSpec& spec);
int vqa_answer_no(const SyntheticTaskSpec& spec);
int vqa_answer_yes(const SyntheticTaskSpec& spec);
int vqa_answer_attr(const SyntheticTaskSpec& spec, int code);

Dataset generate_synthetic(const SyntheticTaskSpec& spec, int count,
                           std::uint64_t seed);

struct TaskData {
  Dataset train, val;
};
TaskData generate_task_data(const SyntheticTaskSpec& spec);

// Independent symbolic evaluators over the stored latents.
int vqa_oracle_answer(const SyntheticTaskSpec& spec,
                      const Dataset::SampleLatents& lat,
                      const std::vector<Box>& boxes);
bool itm_oracle_match(const Dataset::SampleLatents& lat);
int vg_oracle_target(const std::vector<Box>& boxes, const Box& gt);

}  // namespace ednas
