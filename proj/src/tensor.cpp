#include "nag/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "nag/errors.hpp"
#include "nag/simd/kernels.hpp"

namespace nag {
namespace {

[[noreturn]] void shape_error(const char* op, const Tensor2& a, const Tensor2& b) {
  std::ostringstream os;
  os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows()
     << "x" << b.cols();
  throw InternalError(os.str());
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw InternalError("Tensor2: data length != rows*cols");
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor2 Tensor2::transposed() const {
  Tensor2 t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  Tensor2 c(a.rows(), b.cols());
  matmul_acc(a, b, c);
  return c;
}

void matmul_acc(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  if (c.rows() != a.rows() || c.cols() != b.cols()) shape_error("matmul(out)", c, b);
  if (a.rows() == 0 || b.cols() == 0) return;
  simd::active().gemm_acc(a.rows(), a.cols(), b.cols(), a.data(), b.data(), c.data());
}

void matmul_tn_acc(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
  if (c.rows() != a.cols() || c.cols() != b.cols()) shape_error("matmul_tn(out)", c, b);
  const auto& k = simd::active();
  const std::size_t n = b.cols();
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const double* brow = b.data() + p * n;
    for (std::size_t i = 0; i < a.cols(); ++i) k.axpy(n, a(p, i), brow, c.data() + i * n);
  }
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  return matmul(a, b.transposed());
}

void add_inplace(Tensor2& y, const Tensor2& x) {
  if (y.rows() != x.rows() || y.cols() != x.cols()) shape_error("add", y, x);
  double* yd = y.data();
  const double* xd = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) yd[i] += xd[i];
}

}  // namespace nag
