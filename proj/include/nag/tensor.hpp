#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nag {

// Dense row-major fp64 matrix. Doubles as the feature-matrix type.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> flat() const noexcept { return data_; }
  std::span<double> flat() noexcept { return data_; }

  void fill(double v);
  Tensor2 transposed() const;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// A learnable leaf with its gradient accumulator.
struct ParamLeaf {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  bool decay = true;  // participates in decoupled weight decay

  ParamLeaf() = default;
  ParamLeaf(std::string leaf_name, std::size_t rows, std::size_t cols, bool apply_decay)
      : name(std::move(leaf_name)), value(rows, cols), grad(rows, cols), decay(apply_decay) {}

  void zero_grad() { grad.fill(0.0); }
};

// Dense products through the active SIMD kernel table.
// C = A * B
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// C += A * B
void matmul_acc(const Tensor2& a, const Tensor2& b, Tensor2& c);
// C += A^T * B
void matmul_tn_acc(const Tensor2& a, const Tensor2& b, Tensor2& c);
// C = A * B^T
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);

void add_inplace(Tensor2& y, const Tensor2& x);

}  // namespace nag
