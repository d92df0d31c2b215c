#pragma once
// Dense row-major double tensor with an optional gradient buffer. The sole
// numeric carrier in the library.

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace ednas {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

class Tensor {
 public:
  Tensor(std::vector<int> shape, bool requires_grad = false);

  static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
  static TensorPtr from(std::vector<int> shape, std::vector<double> values,
                        bool requires_grad = false);
  static TensorPtr scalar(double v, bool requires_grad = false);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }

  // 2-D view helpers; 1-D tensors are treated as a single row.
  int rows() const;
  int cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double value() const;  // scalar tensors only
  double at(int r, int c) const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool rg) { requires_grad_ = rg; }

  bool has_grad() const { return !grad_.empty(); }
  void ensure_grad();
  double* grad();
  const double* grad() const;
  const std::vector<double>& grad_values() const { return grad_; }
  void zero_grad();

  bool all_finite() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace ednas
