#include "ednas/tensor.hpp"

#include <cmath>
#include <sstream>

namespace ednas {

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    require(d > 0, "tensor dimensions must be positive, got " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> shape, bool requires_grad)
    : shape_(std::move(shape)),
      data_(shape_numel(shape_), 0.0),
      requires_grad_(requires_grad) {}

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return std::make_shared<Tensor>(std::move(shape), requires_grad);
}

TensorPtr Tensor::from(std::vector<int> shape, std::vector<double> values,
                       bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(shape), requires_grad);
  require(values.size() == t->size(),
          "value count does not match shape " + shape_str(t->shape()));
  t->data_ = std::move(values);
  return t;
}

TensorPtr Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

int Tensor::rows() const {
  if (ndim() == 1) return 1;
  require(ndim() == 2, "expected a matrix, got " + shape_str(shape_));
  return shape_[0];
}

int Tensor::cols() const {
  if (ndim() == 1) return shape_[0];
  require(ndim() == 2, "expected a matrix, got " + shape_str(shape_));
  return shape_[1];
}

double Tensor::value() const {
  require(size() == 1, "value() requires a scalar tensor");
  return data_[0];
}

double Tensor::at(int r, int c) const {
  return data_[static_cast<std::size_t>(r) * cols() + c];
}

void Tensor::ensure_grad() {
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
}

double* Tensor::grad() {
  ensure_grad();
  return grad_.data();
}

const double* Tensor::grad() const {
  return grad_.empty() ? nullptr : grad_.data();
}

void Tensor::zero_grad() {
  if (!grad_.empty()) grad_.assign(grad_.size(), 0.0);
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  for (double v : grad_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace ednas
