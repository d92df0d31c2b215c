#include "ednas/heads.hpp"

#include <algorithm>
#include <cmath>

namespace ednas {
namespace {

TensorPtr copy_tensor(const TensorPtr& t) {
  if (!t) return nullptr;
  return Tensor::from(t->shape(), t->values(), t->requires_grad());
}

Linear copy_linear(const Linear& l) {
  Linear c;
  c.w = copy_tensor(l.w);
  c.b = copy_tensor(l.b);
  return c;
}

std::vector<double> softmax_values(const std::vector<double>& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double s = 0.0;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Attentional reduction and fusion

ReductionParams::ReductionParams(int d, Rng& rng)
    : fc1(d, d, /*bias=*/true, rng), fc2(d, 1, /*bias=*/true, rng) {}

void ReductionParams::collect(std::vector<TensorPtr>& out) const {
  fc1.collect(out);
  fc2.collect(out);
}

ReductionParams ReductionParams::clone() const {
  ReductionParams c;
  c.fc1 = copy_linear(fc1);
  c.fc2 = copy_linear(fc2);
  return c;
}

Reduced attentional_reduce(Tape* tape, const TensorPtr& f,
                           const ReductionParams& params,
                           const KeyMask* mask) {
  require(f->rows() >= 1, "attentional_reduce: empty input");
  TensorPtr logits =
      params.fc2.apply(tape, ops::relu(tape, params.fc1.apply(tape, f)));
  if (mask) {
    require(static_cast<int>(mask->size()) == f->rows(),
            "attentional_reduce: mask length mismatch");
    bool all = true;
    for (auto v : *mask) all = all && v;
    if (!all) {
      auto bias = Tensor::zeros({f->rows(), 1});
      for (int i = 0; i < f->rows(); ++i)
        if (!(*mask)[static_cast<std::size_t>(i)])
          bias->data()[i] = kMaskPenalty;
      logits = ops::add(tape, logits, bias);
    }
  }
  Reduced out;
  out.weights = ops::softmax(tape, logits, 0);
  out.feature = ops::matmul_tn(tape, out.weights, f);
  return out;
}

FusionParams::FusionParams(int d, int d_z_, Rng& rng)
    : wx(init_projection(d, d_z_, rng)),
      wy(init_projection(d, d_z_, rng)),
      norm(d_z_),
      d_z(d_z_) {}

void FusionParams::collect(std::vector<TensorPtr>& out) const {
  out.push_back(wx);
  out.push_back(wy);
  norm.collect(out);
}

FusionParams FusionParams::clone() const {
  FusionParams c;
  c.wx = copy_tensor(wx);
  c.wy = copy_tensor(wy);
  c.norm.gain = copy_tensor(norm.gain);
  c.norm.bias = copy_tensor(norm.bias);
  c.d_z = d_z;
  return c;
}

TensorPtr fuse(Tape* tape, const TensorPtr& xt, const TensorPtr& yt,
               const FusionParams& params) {
  TensorPtr z = ops::add(tape, ops::matmul(tape, xt, params.wx),
                         ops::matmul(tape, yt, params.wy));
  return params.norm.apply(tape, z);
}

// ---------------------------------------------------------------------------
// VQA head

VqaHead::VqaHead(int d, int d_z, int answer_count, Rng& rng)
    : reduce_x(d, rng),
      reduce_y(d, rng),
      fusion(d, d_z, rng),
      classifier(d_z, answer_count, /*bias=*/true, rng),
      k_(answer_count) {
  require(answer_count >= 2, "vqa head: need at least two answers");
}

TensorPtr VqaHead::forward(const EvalCtx& ctx, const TensorPtr& x_final,
                           const TensorPtr& y_final,
                           const KeyMask* x_mask) const {
  Reduced rx = attentional_reduce(ctx.tape, x_final, reduce_x, x_mask);
  Reduced ry = attentional_reduce(ctx.tape, y_final, reduce_y, nullptr);
  TensorPtr z = fuse(ctx.tape, rx.feature, ry.feature, fusion);
  return classifier.apply(ctx.tape, z);
}

TensorPtr VqaHead::loss(Tape* tape, const TensorPtr& logits, int answer) const {
  require(static_cast<int>(logits->size()) == k_,
          "vqa loss: answer count mismatch");
  return losses::softmax_cross_entropy(tape, logits, answer);
}

TensorPtr VqaHead::loss_multilabel(
    Tape* tape, const TensorPtr& logits,
    const std::vector<std::uint8_t>& targets) const {
  require(static_cast<int>(logits->size()) == k_ &&
              static_cast<int>(targets.size()) == k_,
          "vqa loss: answer count mismatch");
  const std::size_t k = logits->size();
  double acc = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double s = 1.0 / (1.0 + std::exp(-logits->data()[c]));
    const double sc = std::clamp(s, losses::kEpsProb, 1.0 - losses::kEpsProb);
    const double y = targets[c] ? 1.0 : 0.0;
    acc -= y * std::log(sc) + (1.0 - y) * std::log(1.0 - sc);
  }
  auto out = Tensor::scalar(acc / static_cast<double>(k));
  if (tape && tape->recording() && logits->requires_grad()) {
    out->set_requires_grad(true);
    tape->record("vqa_multilabel_bce", [logits, targets, out, k] {
      const double g = out->grad()[0] / static_cast<double>(k);
      for (std::size_t c = 0; c < k; ++c) {
        const double s = 1.0 / (1.0 + std::exp(-logits->data()[c]));
        logits->grad()[c] += g * (s - (targets[c] ? 1.0 : 0.0));
      }
    });
  }
  return out;
}

void VqaHead::collect(std::vector<TensorPtr>& out) const {
  reduce_x.collect(out);
  reduce_y.collect(out);
  fusion.collect(out);
  classifier.collect(out);
}

VqaHead VqaHead::clone() const {
  VqaHead c;
  c.reduce_x = reduce_x.clone();
  c.reduce_y = reduce_y.clone();
  c.fusion = fusion.clone();
  c.classifier = copy_linear(classifier);
  c.k_ = k_;
  return c;
}

// ---------------------------------------------------------------------------
// ITM head

ItmHead::ItmHead(int d, int d_z, Rng& rng)
    : reduce_x(d, rng),
      reduce_y(d, rng),
      fusion(d, d_z, rng),
      wz(init_projection(d_z, 1, rng)) {}

TensorPtr ItmHead::score(const EvalCtx& ctx, const TensorPtr& x_final,
                         const TensorPtr& y_final,
                         const KeyMask* x_mask) const {
  Reduced rx = attentional_reduce(ctx.tape, x_final, reduce_x, x_mask);
  Reduced ry = attentional_reduce(ctx.tape, y_final, reduce_y, nullptr);
  TensorPtr z = fuse(ctx.tape, rx.feature, ry.feature, fusion);
  return ops::sigmoid(ctx.tape, ops::matmul(ctx.tape, z, wz));
}

void ItmHead::collect(std::vector<TensorPtr>& out) const {
  reduce_x.collect(out);
  reduce_y.collect(out);
  fusion.collect(out);
  out.push_back(wz);
}

ItmHead ItmHead::clone() const {
  ItmHead c;
  c.reduce_x = reduce_x.clone();
  c.reduce_y = reduce_y.clone();
  c.fusion = fusion.clone();
  c.wz = copy_tensor(wz);
  return c;
}

TensorPtr itm_loss_from_scores(Tape* tape, const TensorPtr& s_pos,
                               const TensorPtr& s_neg_text,
                               const TensorPtr& s_neg_image) {
  TensorPtr pos_terms =
      ops::add(tape, losses::binary_cross_entropy(tape, s_pos, 1.0),
               losses::binary_cross_entropy(tape, s_pos, 1.0));
  TensorPtr neg_terms =
      ops::add(tape, losses::binary_cross_entropy(tape, s_neg_text, 0.0),
               losses::binary_cross_entropy(tape, s_neg_image, 0.0));
  return ops::add(tape, pos_terms, neg_terms);
}

namespace {

std::vector<int> sample_without_replacement(const std::vector<int>& pool,
                                            int pos_id, int n, Rng& rng) {
  std::vector<int> cands;
  cands.reserve(pool.size());
  for (int idx : pool)
    if (idx != pos_id) cands.push_back(idx);
  if (static_cast<int>(cands.size()) <= n) return cands;  // whole-pool fallback
  for (int i = 0; i < n; ++i) {
    const int j = i + rng.uniform_int(static_cast<int>(cands.size()) - i);
    std::swap(cands[static_cast<std::size_t>(i)],
              cands[static_cast<std::size_t>(j)]);
  }
  cands.resize(static_cast<std::size_t>(n));
  return cands;
}

int pick_top(const std::vector<int>& cands,
             const std::function<double(int)>& score, int top_k, Rng& rng) {
  std::vector<std::pair<double, int>> scored;
  scored.reserve(cands.size());
  for (int idx : cands) scored.emplace_back(score(idx), idx);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  const int keep = std::min<int>(top_k, static_cast<int>(scored.size()));
  return scored[static_cast<std::size_t>(rng.uniform_int(keep))].second;
}

}  // namespace

MinedNegatives mine_hard_negatives(const std::function<double(int)>& score_text,
                                   const std::function<double(int)>& score_image,
                                   int pos_id, const std::vector<int>& text_pool,
                                   const std::vector<int>& image_pool, Rng& rng,
                                   int n_sample, int top_k) {
  require(!text_pool.empty() && !image_pool.empty(),
          "mine_hard_negatives: empty candidate pool");
  MinedNegatives out;
  std::vector<int> tc =
      sample_without_replacement(text_pool, pos_id, n_sample, rng);
  std::vector<int> ic =
      sample_without_replacement(image_pool, pos_id, n_sample, rng);
  require(!tc.empty() && !ic.empty(),
          "mine_hard_negatives: pool contains only the positive sample");
  out.text_idx = pick_top(tc, score_text, top_k, rng);
  out.image_idx = pick_top(ic, score_image, top_k, rng);
  return out;
}

// ---------------------------------------------------------------------------
// Box geometry

double compute_iou(const Box& a, const Box& b) {
  require(a.w > 0 && a.h > 0 && b.w > 0 && b.h > 0,
          "iou: box extents must be positive");
  const double ax1 = a.x - a.w / 2, ax2 = a.x + a.w / 2;
  const double ay1 = a.y - a.h / 2, ay2 = a.y + a.h / 2;
  const double bx1 = b.x - b.w / 2, bx2 = b.x + b.w / 2;
  const double by1 = b.y - b.h / 2, by2 = b.y + b.h / 2;
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return inter / uni;
}

std::array<double, 4> encode_box_offsets(const Box& proposal, const Box& gt) {
  require(proposal.w > 0 && proposal.h > 0 && gt.w > 0 && gt.h > 0,
          "box offsets: extents must be positive");
  return {(gt.x - proposal.x) / proposal.w, (gt.y - proposal.y) / proposal.h,
          std::log(gt.w / proposal.w), std::log(gt.h / proposal.h)};
}

Box decode_box_offsets(const Box& proposal, const std::array<double, 4>& off) {
  Box b;
  b.x = proposal.x + off[0] * proposal.w;
  b.y = proposal.y + off[1] * proposal.h;
  b.w = proposal.w * std::exp(off[2]);
  b.h = proposal.h * std::exp(off[3]);
  return b;
}

VgTargets make_vg_targets(const std::vector<Box>& proposals, const Box& gt,
                          double sigma_iou) {
  VgTargets t;
  t.iou.reserve(proposals.size());
  t.offsets.reserve(proposals.size());
  t.qualifies.reserve(proposals.size());
  for (const Box& p : proposals) {
    const double iou = compute_iou(p, gt);
    t.iou.push_back(iou);
    t.offsets.push_back(encode_box_offsets(p, gt));
    t.qualifies.push_back(iou > sigma_iou ? 1 : 0);
  }
  return t;
}

// ---------------------------------------------------------------------------
// VG head

VgHead::VgHead(int d, int d_z, Rng& rng)
    : reduce_x(d, rng),
      wx(init_projection(d, d_z, rng)),
      wy(init_projection(d, d_z, rng)),
      norm(d_z),
      score_proj(d_z, 1, /*bias=*/true, rng),
      offset_proj(d_z, 4, /*bias=*/true, rng) {}

VgOut VgHead::forward(const EvalCtx& ctx, const TensorPtr& x_final,
                      const TensorPtr& y_final, const KeyMask* x_mask) const {
  Reduced rx = attentional_reduce(ctx.tape, x_final, reduce_x, x_mask);
  TensorPtr xz = ops::matmul(ctx.tape, rx.feature, wx);   // [1 x d_z]
  TensorPtr yz = ops::matmul(ctx.tape, y_final, wy);      // [n x d_z]
  TensorPtr z = norm.apply(ctx.tape, ops::add_row(ctx.tape, yz, xz));
  VgOut out;
  out.scores = score_proj.apply(ctx.tape, z);
  out.offsets = offset_proj.apply(ctx.tape, z);
  return out;
}

void VgHead::collect(std::vector<TensorPtr>& out) const {
  reduce_x.collect(out);
  out.push_back(wx);
  out.push_back(wy);
  norm.collect(out);
  score_proj.collect(out);
  offset_proj.collect(out);
}

VgHead VgHead::clone() const {
  VgHead c;
  c.reduce_x = reduce_x.clone();
  c.wx = copy_tensor(wx);
  c.wy = copy_tensor(wy);
  c.norm.gain = copy_tensor(norm.gain);
  c.norm.bias = copy_tensor(norm.bias);
  c.score_proj = copy_linear(score_proj);
  c.offset_proj = copy_linear(offset_proj);
  return c;
}

TensorPtr vg_loss(Tape* tape, const VgOut& out, const VgTargets& targets,
                  double lambda) {
  const int n = out.scores->rows();
  require(n >= 1, "vg_loss: need at least one object");
  require(static_cast<int>(targets.iou.size()) == n,
          "vg_loss: target count mismatch");

  const std::vector<double> p = softmax_values(targets.iou);
  TensorPtr p_t = Tensor::from({n}, p);
  TensorPtr q = ops::softmax(tape, ops::reshape(tape, out.scores, {n}), 0);
  TensorPtr rank = losses::kl_divergence(tape, p_t, q);

  std::vector<int> qualifying;
  for (int i = 0; i < n; ++i)
    if (targets.qualifies[static_cast<std::size_t>(i)]) qualifying.push_back(i);
  if (qualifying.empty()) return rank;

  std::vector<double> tgt;
  tgt.reserve(qualifying.size() * 4);
  for (int i : qualifying)
    for (double v : targets.offsets[static_cast<std::size_t>(i)])
      tgt.push_back(v);
  TensorPtr pred = ops::gather_rows(tape, out.offsets, qualifying);
  TensorPtr reg = losses::smooth_l1(
      tape, pred,
      Tensor::from({static_cast<int>(qualifying.size()), 4}, std::move(tgt)));
  return ops::add(tape, rank, ops::scale(tape, reg, lambda));
}

}  // namespace ednas
