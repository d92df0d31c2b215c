#include "ednas/ops.hpp"

#include <cmath>
#include <cstring>
#include <utility>

#include "ednas/kernels.hpp"

namespace ednas::ops {
namespace {

using kernels::active;

bool want_grad(Tape* tape, std::initializer_list<TensorPtr> ins) {
  if (!tape || !tape->recording()) return false;
  for (const auto& t : ins)
    if (t && t->requires_grad()) return true;
  return false;
}

}  // namespace

TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  const int m = a->rows(), k = a->cols(), n = b->cols();
  require(b->rows() == k, "matmul: inner dimensions differ, " +
                              shape_str(a->shape()) + " * " + shape_str(b->shape()));
  auto out = Tensor::zeros({m, n});
  active().gemm_nn(a->data(), b->data(), out->data(), m, k, n, false);
  if (want_grad(tape, {a, b})) {
    out->set_requires_grad(true);
    tape->record("matmul", [a, b, out, m, k, n] {
      if (a->requires_grad())
        active().gemm_nt(out->grad(), b->data(), a->grad(), m, n, k, true);
      if (b->requires_grad())
        active().gemm_tn(a->data(), out->grad(), b->grad(), k, m, n, true);
    });
  }
  return out;
}

TensorPtr matmul_nt(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  const int m = a->rows(), k = a->cols(), n = b->rows();
  require(b->cols() == k, "matmul_nt: inner dimensions differ");
  auto out = Tensor::zeros({m, n});
  active().gemm_nt(a->data(), b->data(), out->data(), m, k, n, false);
  if (want_grad(tape, {a, b})) {
    out->set_requires_grad(true);
    tape->record("matmul_nt", [a, b, out, m, k, n] {
      if (a->requires_grad())
        active().gemm_nn(out->grad(), b->data(), a->grad(), m, n, k, true);
      if (b->requires_grad())
        active().gemm_tn(out->grad(), a->data(), b->grad(), n, m, k, true);
    });
  }
  return out;
}

TensorPtr matmul_tn(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  const int k = a->rows(), m = a->cols(), n = b->cols();
  require(b->rows() == k, "matmul_tn: inner dimensions differ");
  auto out = Tensor::zeros({m, n});
  active().gemm_tn(a->data(), b->data(), out->data(), m, k, n, false);
  if (want_grad(tape, {a, b})) {
    out->set_requires_grad(true);
    tape->record("matmul_tn", [a, b, out, m, k, n] {
      if (a->requires_grad())
        active().gemm_nt(b->data(), out->grad(), a->grad(), k, n, m, true);
      if (b->requires_grad())
        active().gemm_nn(a->data(), out->grad(), b->grad(), k, m, n, true);
    });
  }
  return out;
}

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  require(a->shape() == b->shape(), "add: shape mismatch " +
                                        shape_str(a->shape()) + " vs " +
                                        shape_str(b->shape()));
  auto out = Tensor::zeros(a->shape());
  active().add(a->data(), b->data(), out->data(), a->size());
  if (want_grad(tape, {a, b})) {
    out->set_requires_grad(true);
    tape->record("add", [a, b, out] {
      if (a->requires_grad())
        active().axpy(1.0, out->grad(), a->grad(), a->size());
      if (b->requires_grad())
        active().axpy(1.0, out->grad(), b->grad(), b->size());
    });
  }
  return out;
}

TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  require(a->shape() == b->shape(), "sub: shape mismatch");
  auto out = Tensor::zeros(a->shape());
  active().sub(a->data(), b->data(), out->data(), a->size());
  if (want_grad(tape, {a, b})) {
    out->set_requires_grad(true);
    tape->record("sub", [a, b, out] {
      if (a->requires_grad())
        active().axpy(1.0, out->grad(), a->grad(), a->size());
      if (b->requires_grad())
        active().axpy(-1.0, out->grad(), b->grad(), b->size());
    });
  }
  return out;
}

TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  require(a->shape() == b->shape(), "mul: shape mismatch");
  auto out = Tensor::zeros(a->shape());
  active().mul(a->data(), b->data(), out->data(), a->size());
  if (want_grad(tape, {a, b})) {
    out->set_requires_grad(true);
    tape->record("mul", [a, b, out] {
      if (a->requires_grad())
        active().mul_acc(out->grad(), b->data(), a->grad(), a->size());
      if (b->requires_grad())
        active().mul_acc(out->grad(), a->data(), b->grad(), b->size());
    });
  }
  return out;
}

TensorPtr add_row(Tape* tape, const TensorPtr& x, const TensorPtr& row) {
  const int m = x->rows(), n = x->cols();
  require(row->size() == static_cast<std::size_t>(n),
          "add_row: row length must equal column count");
  auto out = Tensor::zeros(x->shape());
  for (int i = 0; i < m; ++i)
    active().add(x->data() + static_cast<std::size_t>(i) * n, row->data(),
                 out->data() + static_cast<std::size_t>(i) * n, n);
  if (want_grad(tape, {x, row})) {
    out->set_requires_grad(true);
    tape->record("add_row", [x, row, out, m, n] {
      if (x->requires_grad())
        active().axpy(1.0, out->grad(), x->grad(), x->size());
      if (row->requires_grad())
        for (int i = 0; i < m; ++i)
          active().axpy(1.0, out->grad() + static_cast<std::size_t>(i) * n,
                        row->grad(), n);
    });
  }
  return out;
}

TensorPtr scale(Tape* tape, const TensorPtr& x, double alpha) {
  auto out = Tensor::zeros(x->shape());
  active().scale(x->data(), alpha, out->data(), x->size());
  if (want_grad(tape, {x})) {
    out->set_requires_grad(true);
    tape->record("scale", [x, out, alpha] {
      active().axpy(alpha, out->grad(), x->grad(), x->size());
    });
  }
  return out;
}

TensorPtr mul_scalar(Tape* tape, const TensorPtr& x, const TensorPtr& s) {
  require(s->size() == 1, "mul_scalar: s must be a scalar tensor");
  const double sv = s->value();
  auto out = Tensor::zeros(x->shape());
  active().scale(x->data(), sv, out->data(), x->size());
  if (want_grad(tape, {x, s})) {
    out->set_requires_grad(true);
    tape->record("mul_scalar", [x, s, out, sv] {
      if (x->requires_grad())
        active().axpy(sv, out->grad(), x->grad(), x->size());
      if (s->requires_grad())
        s->grad()[0] += active().dot(out->grad(), x->data(), x->size());
    });
  }
  return out;
}

TensorPtr relu(Tape* tape, const TensorPtr& x) {
  auto out = Tensor::zeros(x->shape());
  active().relu(x->data(), out->data(), x->size());
  if (want_grad(tape, {x})) {
    out->set_requires_grad(true);
    tape->record("relu", [x, out] {
      active().relu_backward(x->data(), out->grad(), x->grad(), x->size());
    });
  }
  return out;
}

TensorPtr sigmoid(Tape* tape, const TensorPtr& x) {
  auto out = Tensor::zeros(x->shape());
  for (std::size_t i = 0; i < x->size(); ++i)
    out->data()[i] = 1.0 / (1.0 + std::exp(-x->data()[i]));
  if (want_grad(tape, {x})) {
    out->set_requires_grad(true);
    tape->record("sigmoid", [x, out] {
      for (std::size_t i = 0; i < x->size(); ++i) {
        const double y = out->data()[i];
        x->grad()[i] += out->grad()[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

TensorPtr tanh(Tape* tape, const TensorPtr& x) {
  auto out = Tensor::zeros(x->shape());
  for (std::size_t i = 0; i < x->size(); ++i)
    out->data()[i] = std::tanh(x->data()[i]);
  if (want_grad(tape, {x})) {
    out->set_requires_grad(true);
    tape->record("tanh", [x, out] {
      for (std::size_t i = 0; i < x->size(); ++i) {
        const double y = out->data()[i];
        x->grad()[i] += out->grad()[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

TensorPtr log_shift(Tape* tape, const TensorPtr& x, double shift) {
  auto out = Tensor::zeros(x->shape());
  for (std::size_t i = 0; i < x->size(); ++i) {
    const double v = x->data()[i] + shift;
    require(v > 0.0, "log_shift: argument must be positive");
    out->data()[i] = std::log(v);
  }
  if (want_grad(tape, {x})) {
    out->set_requires_grad(true);
    tape->record("log_shift", [x, out, shift] {
      for (std::size_t i = 0; i < x->size(); ++i)
        x->grad()[i] += out->grad()[i] / (x->data()[i] + shift);
    });
  }
  return out;
}

namespace {

void softmax_slice(const double* x, double* y, int len, int stride) {
  double mx = x[0];
  for (int j = 1; j < len; ++j) mx = std::max(mx, x[j * stride]);
  double s = 0.0;
  for (int j = 0; j < len; ++j) {
    const double e = std::exp(x[j * stride] - mx);
    y[j * stride] = e;
    s += e;
  }
  const double inv = 1.0 / s;
  for (int j = 0; j < len; ++j) y[j * stride] *= inv;
}

void softmax_slice_backward(const double* y, const double* gy, double* gx,
                            int len, int stride) {
  double dot = 0.0;
  for (int j = 0; j < len; ++j) dot += gy[j * stride] * y[j * stride];
  for (int j = 0; j < len; ++j)
    gx[j * stride] += y[j * stride] * (gy[j * stride] - dot);
}

}  // namespace

TensorPtr softmax(Tape* tape, const TensorPtr& x, int axis) {
  require(axis >= 0 && axis < x->ndim(),
          "softmax: axis out of range for " + shape_str(x->shape()));
  int outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x->dim(i);
  for (int i = axis + 1; i < x->ndim(); ++i) inner *= x->dim(i);
  const int len = x->dim(axis);
  auto out = Tensor::zeros(x->shape());
  for (int o = 0; o < outer; ++o)
    for (int i = 0; i < inner; ++i) {
      const std::size_t base = static_cast<std::size_t>(o) * len * inner + i;
      softmax_slice(x->data() + base, out->data() + base, len, inner);
    }
  if (want_grad(tape, {x})) {
    out->set_requires_grad(true);
    tape->record("softmax", [x, out, outer, inner, len] {
      for (int o = 0; o < outer; ++o)
        for (int i = 0; i < inner; ++i) {
          const std::size_t base =
              static_cast<std::size_t>(o) * len * inner + i;
          softmax_slice_backward(out->data() + base, out->grad() + base,
                                 x->grad() + base, len, inner);
        }
    });
  }
  return out;
}

TensorPtr softmax_rows(Tape* tape, const TensorPtr& x) {
  return softmax(tape, x, x->ndim() - 1);
}

TensorPtr layer_norm(Tape* tape, const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, double eps) {
  const int m = x->rows(), d = x->cols();
  require(gain->size() == static_cast<std::size_t>(d) &&
              bias->size() == static_cast<std::size_t>(d),
          "layer_norm: gain/bias must have length d");
  auto out = Tensor::zeros(x->shape());
  auto xhat = std::make_shared<std::vector<double>>(x->size());
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (int i = 0; i < m; ++i) {
    const double* xr = x->data() + static_cast<std::size_t>(i) * d;
    double* yr = out->data() + static_cast<std::size_t>(i) * d;
    double* hr = xhat->data() + static_cast<std::size_t>(i) * d;
    const double mu = kernels::active().sum(xr, d) / d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = xr[j] - mu;
      var += c * c;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (int j = 0; j < d; ++j) {
      hr[j] = (xr[j] - mu) * is;
      yr[j] = gain->data()[j] * hr[j] + bias->data()[j];
    }
  }
  if (want_grad(tape, {x, gain, bias})) {
    out->set_requires_grad(true);
    tape->record("layer_norm", [x, gain, bias, out, xhat, inv_std, m, d] {
      std::vector<double> gh(static_cast<std::size_t>(d));
      for (int i = 0; i < m; ++i) {
        const double* g = out->grad() + static_cast<std::size_t>(i) * d;
        const double* hr = xhat->data() + static_cast<std::size_t>(i) * d;
        if (gain->requires_grad())
          kernels::active().mul_acc(g, hr, gain->grad(), d);
        if (bias->requires_grad())
          kernels::active().axpy(1.0, g, bias->grad(), d);
        if (x->requires_grad()) {
          kernels::active().mul(g, gain->data(), gh.data(), d);
          const double mean_gh = kernels::active().sum(gh.data(), d) / d;
          const double mean_ghh =
              kernels::active().dot(gh.data(), hr, d) / d;
          double* gx = x->grad() + static_cast<std::size_t>(i) * d;
          const double is = (*inv_std)[i];
          for (int j = 0; j < d; ++j)
            gx[j] += is * (gh[j] - mean_gh - hr[j] * mean_ghh);
        }
      }
    });
  }
  return out;
}

TensorPtr apply_mask(Tape* tape, const TensorPtr& x, const TensorPtr& mask) {
  require(mask->shape() == x->shape(), "apply_mask: shape mismatch");
  auto out = Tensor::zeros(x->shape());
  active().mul(x->data(), mask->data(), out->data(), x->size());
  if (want_grad(tape, {x})) {
    out->set_requires_grad(true);
    tape->record("apply_mask", [x, mask, out] {
      active().mul_acc(out->grad(), mask->data(), x->grad(), x->size());
    });
  }
  return out;
}

TensorPtr dropout(const EvalCtx& ctx, const TensorPtr& x, double rate) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (!ctx.training || rate == 0.0) return x;
  require(ctx.rng != nullptr, "dropout: training mode requires an rng");
  auto mask = Tensor::zeros(x->shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask->size(); ++i)
    mask->data()[i] = ctx.rng->bernoulli(rate) ? 0.0 : keep_scale;
  return apply_mask(ctx.tape, x, mask);
}

TensorPtr concat_rows(Tape* tape, const std::vector<TensorPtr>& parts) {
  require(!parts.empty(), "concat_rows: no parts");
  const int n = parts[0]->cols();
  int rows = 0;
  for (const auto& p : parts) {
    require(p->cols() == n, "concat_rows: column mismatch");
    rows += p->rows();
  }
  auto out = Tensor::zeros({rows, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::memcpy(out->data() + off, p->data(), sizeof(double) * p->size());
    off += p->size();
  }
  bool any = false;
  for (const auto& p : parts) any = any || p->requires_grad();
  if (tape && tape->recording() && any) {
    out->set_requires_grad(true);
    tape->record("concat_rows", [parts, out] {
      std::size_t off2 = 0;
      for (const auto& p : parts) {
        if (p->requires_grad())
          active().axpy(1.0, out->grad() + off2, p->grad(), p->size());
        off2 += p->size();
      }
    });
  }
  return out;
}

TensorPtr concat_cols(Tape* tape, const std::vector<TensorPtr>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  const int m = parts[0]->rows();
  int cols = 0;
  for (const auto& p : parts) {
    require(p->rows() == m, "concat_cols: row mismatch");
    cols += p->cols();
  }
  auto out = Tensor::zeros({m, cols});
  int coff = 0;
  for (const auto& p : parts) {
    const int pc = p->cols();
    for (int i = 0; i < m; ++i)
      std::memcpy(out->data() + static_cast<std::size_t>(i) * cols + coff,
                  p->data() + static_cast<std::size_t>(i) * pc,
                  sizeof(double) * pc);
    coff += pc;
  }
  bool any = false;
  for (const auto& p : parts) any = any || p->requires_grad();
  if (tape && tape->recording() && any) {
    out->set_requires_grad(true);
    tape->record("concat_cols", [parts, out, m, cols] {
      int coff2 = 0;
      for (const auto& p : parts) {
        const int pc = p->cols();
        if (p->requires_grad())
          for (int i = 0; i < m; ++i)
            active().axpy(
                1.0, out->grad() + static_cast<std::size_t>(i) * cols + coff2,
                p->grad() + static_cast<std::size_t>(i) * pc, pc);
        coff2 += pc;
      }
    });
  }
  return out;
}

TensorPtr reshape(Tape* tape, const TensorPtr& x, std::vector<int> shape) {
  auto out = Tensor::zeros(std::move(shape));
  require(out->size() == x->size(), "reshape: element count mismatch");
  std::memcpy(out->data(), x->data(), sizeof(double) * x->size());
  if (want_grad(tape, {x})) {
    out->set_requires_grad(true);
    tape->record("reshape", [x, out] {
      active().axpy(1.0, out->grad(), x->grad(), x->size());
    });
  }
  return out;
}

TensorPtr gather_rows(Tape* tape, const TensorPtr& x,
                      const std::vector<int>& indices) {
  require(!indices.empty(), "gather_rows: empty index list");
  const int n = x->cols();
  for (int idx : indices)
    require(idx >= 0 && idx < x->rows(), "gather_rows: index out of range");
  auto out = Tensor::zeros({static_cast<int>(indices.size()), n});
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::memcpy(out->data() + i * n,
                x->data() + static_cast<std::size_t>(indices[i]) * n,
                sizeof(double) * n);
  if (want_grad(tape, {x})) {
    out->set_requires_grad(true);
    tape->record("gather_rows", [x, out, indices, n] {
      for (std::size_t i = 0; i < indices.size(); ++i)
        active().axpy(1.0, out->grad() + i * n,
                      x->grad() + static_cast<std::size_t>(indices[i]) * n, n);
    });
  }
  return out;
}

TensorPtr embedding_rows(Tape* tape, const TensorPtr& table,
                         const std::vector<int>& ids) {
  return gather_rows(tape, table, ids);
}

TensorPtr sum_all(Tape* tape, const TensorPtr& x) {
  auto out = Tensor::scalar(active().sum(x->data(), x->size()));
  if (want_grad(tape, {x})) {
    out->set_requires_grad(true);
    tape->record("sum_all", [x, out] {
      const double g = out->grad()[0];
      double* gx = x->grad();
      for (std::size_t i = 0; i < x->size(); ++i) gx[i] += g;
    });
  }
  return out;
}

TensorPtr mean_all(Tape* tape, const TensorPtr& x) {
  return scale(tape, sum_all(tape, x), 1.0 / static_cast<double>(x->size()));
}

}  // namespace ednas::ops
