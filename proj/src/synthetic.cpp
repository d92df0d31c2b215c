#include "ednas/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ednas/heads.hpp"

namespace ednas {
namespace {

std::vector<Box> random_boxes(Rng& rng, int n, bool grid) {
  std::vector<Box> boxes(static_cast<std::size_t>(n));
  if (grid) {
    // well-separated cells: pitch 3, extents < 2, so distinct boxes never
    // overlap and the grounding target is unambiguous
    for (int i = 0; i < n; ++i) {
      Box& b = boxes[static_cast<std::size_t>(i)];
      b.x = 3.0 * (i % 3) + rng.uniform(-0.4, 0.4) + 1.5;
      b.y = 3.0 * (i / 3) + rng.uniform(-0.4, 0.4) + 1.5;
      b.w = rng.uniform(0.8, 1.8);
      b.h = rng.uniform(0.8, 1.8);
    }
  } else {
    for (auto& b : boxes) {
      b.x = rng.uniform(0.0, 10.0);
      b.y = rng.uniform(0.0, 10.0);
      b.w = rng.uniform(0.5, 2.0);
      b.h = rng.uniform(0.5, 2.0);
    }
  }
  return boxes;
}

std::vector<double> object_features(Rng& rng, const SyntheticTaskSpec& spec,
                                    const std::vector<int>& codes) {
  const int n = static_cast<int>(codes.size());
  std::vector<double> f(static_cast<std::size_t>(n) * spec.d_y);
  for (int i = 0; i < n; ++i) {
    const double mag =
        rng.uniform(1.0 - spec.magnitude_jitter, 1.0 + spec.magnitude_jitter);
    for (int j = 0; j < spec.d_y; ++j) {
      double v = rng.normal(0.0, spec.feature_noise);
      if (j == codes[static_cast<std::size_t>(i)]) v += mag;
      f[static_cast<std::size_t>(i) * spec.d_y + j] = v;
    }
  }
  return f;
}

std::vector<int> question_tokens(Rng& rng, const SyntheticTaskSpec& spec,
                                 int kind_token, int code) {
  std::vector<int> t;
  t.push_back(kind_token);
  t.push_back(kTokenCodeBase + code);
  while (static_cast<int>(t.size()) < spec.m_len)
    t.push_back(kTokenFillerBase + rng.uniform_int(2));
  return t;
}

std::vector<int> distinct_codes(const std::vector<int>& codes) {
  std::set<int> s(codes.begin(), codes.end());
  return {s.begin(), s.end()};
}

// Codes with exactly one object carrying the target code.
std::vector<int> unique_target_codes(Rng& rng, const SyntheticTaskSpec& spec,
                                     std::vector<int>& codes) {
  auto singles = [&codes] {
    std::vector<int> out;
    for (int c : distinct_codes(codes)) {
      if (std::count(codes.begin(), codes.end(), c) == 1) out.push_back(c);
    }
    return out;
  };
  std::vector<int> s = singles();
  while (s.empty()) {
    for (auto& c : codes) c = rng.uniform_int(spec.attribute_count);
    s = singles();
  }
  return s;
}

void generate_vqa_sample(Rng& rng, const SyntheticTaskSpec& spec,
                         MultimodalSample& sample,
                         Dataset::SampleLatents& lat) {
  std::vector<int> codes(static_cast<std::size_t>(spec.n_objects));
  for (auto& c : codes) c = rng.uniform_int(spec.attribute_count);

  const double u = rng.uniform();
  int kind;
  const double total = spec.w_count + spec.w_presence + spec.w_nearest;
  if (u < spec.w_count / total)
    kind = 0;
  else if (u < (spec.w_count + spec.w_presence) / total)
    kind = 1;
  else
    kind = 2;

  int code = 0;
  if (kind == 2) {
    std::vector<int> singles = unique_target_codes(rng, spec, codes);
    code = singles[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(singles.size())))];
  } else if (spec.fixed_code) {
    code = 0;
  } else if (kind == 1) {
    // presence: balance yes/no by drawing from present or absent codes
    std::vector<int> present = distinct_codes(codes), absent;
    for (int c = 0; c < spec.attribute_count; ++c)
      if (std::find(present.begin(), present.end(), c) == present.end())
        absent.push_back(c);
    if (!absent.empty() && rng.bernoulli(0.5))
      code = absent[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(absent.size())))];
    else
      code = present[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(present.size())))];
  } else {
    code = rng.uniform_int(spec.attribute_count);
  }

  sample.boxes = random_boxes(rng, spec.n_objects, /*grid=*/false);
  sample.objects = object_features(rng, spec, codes);
  const int kind_token =
      kind == 0 ? kTokenCount : (kind == 1 ? kTokenPresence : kTokenNearest);
  sample.tokens = question_tokens(rng, spec, kind_token, code);

  lat.codes = codes;
  lat.question_kind = kind;
  lat.question_code = code;
  if (kind == 2) {
    for (int i = 0; i < spec.n_objects; ++i)
      if (codes[static_cast<std::size_t>(i)] == code) lat.target_object = i;
  }
  sample.answer = vqa_oracle_answer(spec, lat, sample.boxes);
}

void generate_itm_sample(Rng& rng, const SyntheticTaskSpec& spec,
                         bool positive, MultimodalSample& sample,
                         Dataset::SampleLatents& lat) {
  std::vector<int> codes(static_cast<std::size_t>(spec.n_objects));
  std::vector<int> absent;
  do {
    for (auto& c : codes) c = rng.uniform_int(spec.attribute_count);
    absent.clear();
    std::vector<int> present = distinct_codes(codes);
    for (int c = 0; c < spec.attribute_count; ++c)
      if (std::find(present.begin(), present.end(), c) == present.end())
        absent.push_back(c);
  } while (absent.empty());

  int code;
  if (positive) {
    code = codes[static_cast<std::size_t>(rng.uniform_int(spec.n_objects))];
  } else {
    code = absent[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(absent.size())))];
  }

  sample.boxes = random_boxes(rng, spec.n_objects, /*grid=*/false);
  sample.objects = object_features(rng, spec, codes);
  sample.tokens = question_tokens(rng, spec, kTokenMatch, code);
  sample.match = positive ? 1 : 0;

  lat.codes = codes;
  lat.question_code = code;
}

void generate_vg_sample(Rng& rng, const SyntheticTaskSpec& spec,
                        MultimodalSample& sample,
                        Dataset::SampleLatents& lat) {
  std::vector<int> codes(static_cast<std::size_t>(spec.n_objects));
  for (auto& c : codes) c = rng.uniform_int(spec.attribute_count);
  std::vector<int> singles = unique_target_codes(rng, spec, codes);
  const int code = singles[static_cast<std::size_t>(
      rng.uniform_int(static_cast<int>(singles.size())))];
  int target = -1;
  for (int i = 0; i < spec.n_objects; ++i)
    if (codes[static_cast<std::size_t>(i)] == code) target = i;

  sample.boxes = random_boxes(rng, spec.n_objects, /*grid=*/true);
  sample.objects = object_features(rng, spec, codes);
  sample.tokens = question_tokens(rng, spec, kTokenFind, code);

  const Box& tb = sample.boxes[static_cast<std::size_t>(target)];
  Box gt;
  gt.x = tb.x + rng.uniform(-spec.box_jitter, spec.box_jitter) * tb.w;
  gt.y = tb.y + rng.uniform(-spec.box_jitter, spec.box_jitter) * tb.h;
  gt.w = tb.w * std::exp(rng.uniform(-spec.box_jitter, spec.box_jitter));
  gt.h = tb.h * std::exp(rng.uniform(-spec.box_jitter, spec.box_jitter));
  sample.gt_box = gt;

  lat.codes = codes;
  lat.question_code = code;
  lat.target_object = target;
}

}  // namespace

int vqa_answer_count(const SyntheticTaskSpec& spec) {
  return spec.n_objects + 3 + spec.attribute_count;
}
int vqa_answer_no(const SyntheticTaskSpec& spec) { return spec.n_objects + 1; }
int vqa_answer_yes(const SyntheticTaskSpec& spec) { return spec.n_objects + 2; }
int vqa_answer_attr(const SyntheticTaskSpec& spec, int code) {
  return spec.n_objects + 3 + code;
}

int vqa_oracle_answer(const SyntheticTaskSpec& spec,
                      const Dataset::SampleLatents& lat,
                      const std::vector<Box>& boxes) {
  switch (lat.question_kind) {
    case 0:
      return static_cast<int>(
          std::count(lat.codes.begin(), lat.codes.end(), lat.question_code));
    case 1: {
      const bool present = std::find(lat.codes.begin(), lat.codes.end(),
                                     lat.question_code) != lat.codes.end();
      return present ? vqa_answer_yes(spec) : vqa_answer_no(spec);
    }
    case 2: {
      int anchor = -1;
      for (std::size_t i = 0; i < lat.codes.size(); ++i)
        if (lat.codes[i] == lat.question_code) anchor = static_cast<int>(i);
      require(anchor >= 0, "vqa oracle: anchor code missing");
      int nearest = -1;
      double best = 0.0;
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (static_cast<int>(i) == anchor) continue;
        const double dx = boxes[i].x - boxes[static_cast<std::size_t>(anchor)].x;
        const double dy = boxes[i].y - boxes[static_cast<std::size_t>(anchor)].y;
        const double dist = dx * dx + dy * dy;
        if (nearest < 0 || dist < best) {
          best = dist;
          nearest = static_cast<int>(i);
        }
      }
      return vqa_answer_attr(spec,
                             lat.codes[static_cast<std::size_t>(nearest)]);
    }
    default:
      throw std::logic_error("vqa oracle: bad question kind");
  }
}

bool itm_oracle_match(const Dataset::SampleLatents& lat) {
  return std::find(lat.codes.begin(), lat.codes.end(), lat.question_code) !=
         lat.codes.end();
}

int vg_oracle_target(const std::vector<Box>& boxes, const Box& gt) {
  int best = 0;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double iou = compute_iou(boxes[i], gt);
    if (iou > best_iou) {
      best_iou = iou;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Dataset generate_synthetic(const SyntheticTaskSpec& spec, int count,
                           std::uint64_t seed) {
  require(spec.vocab >= kTokenCodeBase + spec.attribute_count,
          "synthetic: vocabulary too small for the code tokens");
  require(spec.d_y >= spec.attribute_count,
          "synthetic: d_y must cover the attribute codes");
  require(spec.n_objects >= 2, "synthetic: need at least two objects");
  require(spec.attribute_count >= 2, "synthetic: need at least two codes");

  Dataset data;
  data.task = spec.task;
  data.vocab = spec.vocab;
  data.m_max = spec.m_max;
  data.n_objects = spec.n_objects;
  data.d_y = spec.d_y;
  data.answer_count = spec.task == TaskKind::vqa ? vqa_answer_count(spec) : 2;

  Rng rng(splitmix64(seed));
  data.samples.resize(static_cast<std::size_t>(count));
  data.latents.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    MultimodalSample& s = data.samples[static_cast<std::size_t>(i)];
    Dataset::SampleLatents& lat = data.latents[static_cast<std::size_t>(i)];
    s.id = i;
    s.n = spec.n_objects;
    s.d_y = spec.d_y;
    switch (spec.task) {
      case TaskKind::vqa:
        generate_vqa_sample(rng, spec, s, lat);
        break;
      case TaskKind::itm:
        generate_itm_sample(rng, spec, i % 2 == 0, s, lat);
        break;
      case TaskKind::vg:
        generate_vg_sample(rng, spec, s, lat);
        break;
    }
  }
  if (spec.task == TaskKind::itm) {
    data.text_codes.reserve(data.latents.size());
    data.image_codes.reserve(data.latents.size());
    for (const auto& lat : data.latents) {
      data.text_codes.push_back(lat.question_code);
      data.image_codes.push_back(distinct_codes(lat.codes));
    }
  }
  data.prepare();
  return data;
}

TaskData generate_task_data(const SyntheticTaskSpec& spec) {
  TaskData td;
  td.train = generate_synthetic(spec, spec.train_samples,
                                splitmix64(spec.seed ^ 0x7261696eULL));
  td.val = generate_synthetic(spec, spec.val_samples,
                              splitmix64(spec.seed ^ 0x76616cULL));
  return td;
}

}  // namespace ednas
