#include "ednas/dataset.hpp"

#include <algorithm>

namespace ednas {

void Dataset::prepare(double eps_geom) {
  for (auto& s : samples) {
    require(s.n >= 1, "dataset: sample needs at least one object");
    require(static_cast<int>(s.objects.size()) == s.n * s.d_y,
            "dataset: object feature size mismatch");
    s.objects_t = Tensor::from({s.n, s.d_y}, s.objects);
    TensorPtr rel = compute_relation_features(s.boxes, eps_geom);
    s.relation_t = Tensor::from({s.n * s.n, 4}, rel->values());
  }
}

std::vector<int> Dataset::negative_text_pool(int sample_idx) const {
  std::vector<int> pool;
  const auto& codes = image_codes[static_cast<std::size_t>(sample_idx)];
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (static_cast<int>(j) == sample_idx) continue;
    const int tc = text_codes[j];
    if (std::find(codes.begin(), codes.end(), tc) == codes.end())
      pool.push_back(static_cast<int>(j));
  }
  return pool;
}

std::vector<int> Dataset::negative_image_pool(int sample_idx) const {
  std::vector<int> pool;
  const int tc = text_codes[static_cast<std::size_t>(sample_idx)];
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (static_cast<int>(j) == sample_idx) continue;
    const auto& codes = image_codes[j];
    if (std::find(codes.begin(), codes.end(), tc) == codes.end())
      pool.push_back(static_cast<int>(j));
  }
  return pool;
}

MultimodalSample make_pair_sample(const MultimodalSample& image_src,
                                  const MultimodalSample& text_src) {
  MultimodalSample s = image_src;
  s.tokens = text_src.tokens;
  return s;
}

}  // namespace ednas
