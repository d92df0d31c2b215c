#pragma once

#include <vector>

#include "ednas/backbone.hpp"

namespace ednas {

// In-memory sample collection plus the latent metadata the harness needs for
// oracles and negative-pool construction (never visible to models).
struct Dataset {
  TaskKind task = TaskKind::vqa;
  int vocab = 0;
  int m_max = 0;
  int n_objects = 0;
  int d_y = 0;
  int answer_count = 0;

  std::vector<MultimodalSample> samples;

  // Generator latents, kept alongside so harness oracles and negative-pool
  // construction can re-derive every label without peeking at features.
  struct SampleLatents {
    std::vector<int> codes;   // object attribute codes
    int question_kind = -1;   // 0 count, 1 presence, 2 nearest / itm / vg
    int question_code = -1;
    int target_object = -1;   // vg target / nearest anchor
  };
  std::vector<SampleLatents> latents;

  // ITM latents: the text's code and the set of codes present in the image.
  std::vector<int> text_codes;
  std::vector<std::vector<int>> image_codes;

  // Builds the cached constant tensors every sample carries.
  void prepare(double eps_geom = kEpsGeom);
  std::size_t size() const { return samples.size(); }

  // Indices of true-negative candidates for an ITM positive: texts whose code
  // the image lacks, and images lacking the text's code.
  std::vector<int> negative_text_pool(int sample_idx) const;
  std::vector<int> negative_image_pool(int sample_idx) const;
};

// Joins the image side of one sample with the text side of another (the form
// every ITM pair takes).
MultimodalSample make_pair_sample(const MultimodalSample& image_src,
                                  const MultimodalSample& text_src);

}  // namespace ednas
