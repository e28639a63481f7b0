#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "pulseox/errors.hpp"

namespace pulseox {

// Dense row-major n-d array of doubles. Activations, gradients and model
// parameters are all carried in this one type.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::initializer_list<std::size_t> shape)
      : Tensor(std::vector<std::size_t>(shape)) {}

  static Tensor zeros(std::initializer_list<std::size_t> shape) {
    return Tensor(shape);
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i, std::size_t j) {
    assert(rank() == 2);
    return data_[i * shape_[1] + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(rank() == 2);
    return data_[i * shape_[1] + j];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    assert(rank() == 3);
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    assert(rank() == 3);
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(double v);
  void zero() { fill(0.0); }

  // Throws NumericError if any element is NaN/inf. Called from debug-mode
  // guards; cheap enough to use directly in tests too.
  void check_finite(const char* what) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

#ifndef NDEBUG
#define PULSEOX_GUARD_FINITE(t, what) (t).check_finite(what)
#else
#define PULSEOX_GUARD_FINITE(t, what) ((void)0)
#endif

// Row-major matrix kernels. All of them accumulate along k in one fixed
// sequential order per output element, independent of m and n, so a given
// output row is bitwise identical whether it is computed alone or as part
// of a larger batch. Training reproducibility rests on this.
//
// C (m×n) = A (m×k) · B (k×n); adds into C when accumulate is set.
void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate = false);

// C (m×n) = A (m×k) · Bᵀ with B stored (n×k).
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate = false);

// C (m×n) = Aᵀ · B with A stored (k×m), B stored (k×n).
void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate = false);

}  // namespace pulseox
