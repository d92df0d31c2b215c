#include "ednas/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ednas {

HeadSet::HeadSet(const ModelConfig& cfg, Rng& rng) : task(cfg.task) {
  const int d = cfg.backbone.d;
  switch (task) {
    case TaskKind::vqa:
      vqa = VqaHead(d, cfg.d_z, cfg.answer_count, rng);
      break;
    case TaskKind::itm:
      itm = ItmHead(d, cfg.d_z, rng);
      break;
    case TaskKind::vg:
      vg = VgHead(d, cfg.d_z, rng);
      break;
  }
}

void HeadSet::collect(std::vector<TensorPtr>& out) const {
  switch (task) {
    case TaskKind::vqa: vqa.collect(out); break;
    case TaskKind::itm: itm.collect(out); break;
    case TaskKind::vg: vg.collect(out); break;
  }
}

HeadSet HeadSet::clone() const {
  HeadSet c;
  c.task = task;
  switch (task) {
    case TaskKind::vqa: c.vqa = vqa.clone(); break;
    case TaskKind::itm: c.itm = itm.clone(); break;
    case TaskKind::vg: c.vg = vg.clone(); break;
  }
  return c;
}

Model::Model(const ModelConfig& cfg, const Architecture& arch, Rng& rng)
    : cfg_(cfg), arch_(arch), trunk_(cfg.backbone, rng) {
  validate_architecture(arch, static_cast<int>(arch.encoder_ops.size()),
                        static_cast<int>(arch.decoder_ops.size()));
  const auto& b = cfg.backbone;
  for (OperationKind k : arch.encoder_ops)
    enc_.push_back(make_block_op(k, b.d, b.d, b.h, b.d_r, rng, b.dropout));
  for (OperationKind k : arch.decoder_ops)
    dec_.push_back(make_block_op(k, b.d, b.d, b.h, b.d_r, rng, b.dropout));
  heads_ = HeadSet(cfg, rng);
}

Model::Model(const ModelConfig& cfg, const Architecture& arch, Trunk trunk,
             std::vector<std::unique_ptr<BlockOp>> enc,
             std::vector<std::unique_ptr<BlockOp>> dec, HeadSet heads)
    : cfg_(cfg),
      arch_(arch),
      trunk_(std::move(trunk)),
      enc_(std::move(enc)),
      dec_(std::move(dec)),
      heads_(std::move(heads)) {}

BackboneOut Model::forward(const EvalCtx& ctx,
                           const MultimodalSample& s) const {
  std::vector<BlockOp*> enc, dec;
  enc.reserve(enc_.size());
  dec.reserve(dec_.size());
  for (const auto& b : enc_) enc.push_back(b.get());
  for (const auto& b : dec_) dec.push_back(b.get());
  return backbone_forward(ctx, cfg_.backbone, trunk_, enc, dec, s);
}

TensorPtr head_loss(const EvalCtx& ctx, const HeadSet& heads,
                    const ModelConfig& cfg, const BackboneOut& out,
                    const MultimodalSample& s) {
  switch (cfg.task) {
    case TaskKind::vqa: {
      TensorPtr logits =
          heads.vqa.forward(ctx, out.x_final, out.y_final, &out.x_mask);
      return heads.vqa.loss(ctx.tape, logits, s.answer);
    }
    case TaskKind::itm: {
      TensorPtr score =
          heads.itm.score(ctx, out.x_final, out.y_final, &out.x_mask);
      return losses::binary_cross_entropy(ctx.tape, score,
                                          s.match ? 1.0 : 0.0);
    }
    case TaskKind::vg: {
      VgOut vo = heads.vg.forward(ctx, out.x_final, out.y_final, &out.x_mask);
      VgTargets targets = make_vg_targets(s.boxes, s.gt_box);
      return vg_loss(ctx.tape, vo, targets, cfg.vg_lambda);
    }
  }
  throw std::logic_error("unknown task");
}

TensorPtr Model::loss(const EvalCtx& ctx, const MultimodalSample& s) const {
  BackboneOut out = forward(ctx, s);
  return head_loss(ctx, heads_, cfg_, out, s);
}

TensorPtr Model::itm_score(const EvalCtx& ctx,
                           const MultimodalSample& s) const {
  BackboneOut out = forward(ctx, s);
  return heads_.itm.score(ctx, out.x_final, out.y_final, &out.x_mask);
}

bool Model::correct(const MultimodalSample& s) const {
  Tape tape;
  tape.set_recording(false);
  EvalCtx ctx;
  ctx.tape = &tape;
  BackboneOut out = forward(ctx, s);
  switch (cfg_.task) {
    case TaskKind::vqa: {
      TensorPtr logits =
          heads_.vqa.forward(ctx, out.x_final, out.y_final, &out.x_mask);
      int best = 0;
      for (std::size_t i = 1; i < logits->size(); ++i)
        if (logits->data()[i] > logits->data()[static_cast<std::size_t>(best)])
          best = static_cast<int>(i);
      return best == s.answer;
    }
    case TaskKind::itm: {
      const double sc =
          heads_.itm.score(ctx, out.x_final, out.y_final, &out.x_mask)->value();
      return (sc > 0.5) == (s.match == 1);
    }
    case TaskKind::vg: {
      VgOut vo = heads_.vg.forward(ctx, out.x_final, out.y_final, &out.x_mask);
      int best = 0;
      for (int i = 1; i < vo.scores->rows(); ++i)
        if (vo.scores->data()[i] > vo.scores->data()[best]) best = i;
      std::array<double, 4> off{
          vo.offsets->at(best, 0), vo.offsets->at(best, 1),
          vo.offsets->at(best, 2), vo.offsets->at(best, 3)};
      const Box pred = decode_box_offsets(
          s.boxes[static_cast<std::size_t>(best)], off);
      return compute_iou(pred, s.gt_box) > kIouThreshold;
    }
  }
  return false;
}

std::vector<TensorPtr> Model::params() const {
  std::vector<TensorPtr> out;
  trunk_.collect(out);
  for (const auto& b : enc_) b->collect(out);
  for (const auto& b : dec_) b->collect(out);
  heads_.collect(out);
  return out;
}

NamedParams Model::named_params() const {
  NamedParams out;
  auto push = [&out](const std::string& prefix,
                     const std::vector<TensorPtr>& ts) {
    for (std::size_t i = 0; i < ts.size(); ++i)
      out.emplace_back(prefix + "." + std::to_string(i), ts[i]);
  };
  std::vector<TensorPtr> tmp;
  trunk_.collect(tmp);
  push("trunk", tmp);
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    tmp.clear();
    enc_[i]->collect(tmp);
    push("enc" + std::to_string(i) + "." +
             std::string(op_name(enc_[i]->kind())),
         tmp);
  }
  for (std::size_t i = 0; i < dec_.size(); ++i) {
    tmp.clear();
    dec_[i]->collect(tmp);
    push("dec" + std::to_string(i) + "." +
             std::string(op_name(dec_[i]->kind())),
         tmp);
  }
  tmp.clear();
  heads_.collect(tmp);
  push("head", tmp);
  return out;
}

EvalResult evaluate_model(const Model& model, const Dataset& data) {
  EvalResult r;
  std::vector<double> sample_losses;
  sample_losses.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    Tape tape;
    tape.set_recording(false);
    EvalCtx ctx;
    ctx.tape = &tape;
    sample_losses.push_back(model.loss(ctx, s)->value());
    if (model.correct(s)) ++r.correct;
    ++r.total;
  }
  std::sort(sample_losses.begin(), sample_losses.end());
  r.loss = std::accumulate(sample_losses.begin(), sample_losses.end(), 0.0) /
           std::max<std::size_t>(1, sample_losses.size());
  r.metric = r.total ? static_cast<double>(r.correct) / r.total : 0.0;
  return r;
}

}  // namespace ednas
