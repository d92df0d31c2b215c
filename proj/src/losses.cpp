#include "ednas/losses.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>

#include "ednas/kernels.hpp"

namespace ednas::losses {
namespace {

bool want_grad(Tape* tape, const TensorPtr& t) {
  return tape && tape->recording() && t->requires_grad();
}

std::atomic<bool> kl_clamp_warned{false};

void warn_kl_clamp() {
  if (!kl_clamp_warned.exchange(true))
    std::cerr << "kl_divergence: zero q under positive p clamped to "
              << kEpsProb << "\n";
}

}  // namespace

TensorPtr smooth_l1(Tape* tape, const TensorPtr& pred,
                    const TensorPtr& target) {
  require(pred->shape() == target->shape(),
          "smooth_l1: prediction/target shape mismatch");
  const std::size_t n = pred->size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = pred->data()[i] - target->data()[i];
    const double a = std::fabs(e);
    acc += a < 1.0 ? 0.5 * e * e : a - 0.5;
  }
  auto out = Tensor::scalar(acc / static_cast<double>(n));
  if (want_grad(tape, pred)) {
    out->set_requires_grad(true);
    tape->record("smooth_l1", [pred, target, out, n] {
      const double g = out->grad()[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double e = pred->data()[i] - target->data()[i];
        pred->grad()[i] += g * std::clamp(e, -1.0, 1.0);
      }
    });
  }
  return out;
}

namespace {

void check_distribution(const TensorPtr& t, const char* which) {
  double s = 0.0;
  for (std::size_t i = 0; i < t->size(); ++i) {
    require(t->data()[i] >= 0.0,
            std::string("kl_divergence: ") + which + " has a negative entry");
    s += t->data()[i];
  }
  require(std::fabs(s - 1.0) <= 1e-6,
          std::string("kl_divergence: ") + which + " does not sum to 1");
}

}  // namespace

TensorPtr kl_divergence(Tape* tape, const TensorPtr& p, const TensorPtr& q) {
  require(p->shape() == q->shape(), "kl_divergence: shape mismatch");
  check_distribution(p, "p");
  check_distribution(q, "q");
  const std::size_t n = p->size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pi = p->data()[i];
    if (pi <= 0.0) continue;  // 0 log 0 := 0
    double qi = q->data()[i];
    if (qi < kEpsProb) {
      warn_kl_clamp();
      qi = kEpsProb;
    }
    acc += pi * std::log(pi / qi);
  }
  auto out = Tensor::scalar(acc);
  if (want_grad(tape, q)) {
    out->set_requires_grad(true);
    tape->record("kl_divergence", [p, q, out, n] {
      const double g = out->grad()[0];
      for (std::size_t i = 0; i < n; ++i) {
        const double pi = p->data()[i];
        const double qi = q->data()[i];
        if (pi > 0.0 && qi >= kEpsProb) q->grad()[i] += g * (-pi / qi);
      }
    });
  }
  return out;
}

TensorPtr binary_cross_entropy(Tape* tape, const TensorPtr& score,
                               double label) {
  require(score->size() == 1, "binary_cross_entropy: score must be scalar");
  require(label == 0.0 || label == 1.0,
          "binary_cross_entropy: label must be 0 or 1");
  const double raw = score->value();
  const double s = std::clamp(raw, kEpsProb, 1.0 - kEpsProb);
  auto out = Tensor::scalar(-(label * std::log(s) +
                              (1.0 - label) * std::log(1.0 - s)));
  if (want_grad(tape, score)) {
    out->set_requires_grad(true);
    tape->record("binary_cross_entropy", [score, out, label] {
      const double v = score->value();
      if (v <= kEpsProb || v >= 1.0 - kEpsProb) return;  // clamped: flat
      score->grad()[0] +=
          out->grad()[0] * (-label / v + (1.0 - label) / (1.0 - v));
    });
  }
  return out;
}

TensorPtr softmax_cross_entropy(Tape* tape, const TensorPtr& logits,
                                int label) {
  const std::size_t k = logits->size();
  require(label >= 0 && static_cast<std::size_t>(label) < k,
          "softmax_cross_entropy: label index out of range");
  const double mx = kernels::active().max(logits->data(), k);
  double z = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    z += std::exp(logits->data()[i] - mx);
  const double log_z = std::log(z) + mx;
  auto out = Tensor::scalar(log_z - logits->data()[static_cast<std::size_t>(label)]);
  if (want_grad(tape, logits)) {
    out->set_requires_grad(true);
    tape->record("softmax_cross_entropy", [logits, out, label, log_z, k] {
      const double g = out->grad()[0];
      for (std::size_t i = 0; i < k; ++i) {
        const double p = std::exp(logits->data()[i] - log_z);
        logits->grad()[i] +=
            g * (p - (i == static_cast<std::size_t>(label) ? 1.0 : 0.0));
      }
    });
  }
  return out;
}

}  // namespace ednas::losses
