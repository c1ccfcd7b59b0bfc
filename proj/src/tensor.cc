#include "smartreply/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smartreply/error.h"

namespace smartreply {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape)
    : shape_(std::move(shape)), data_(NumElements(shape_), T(0)) {
  if (shape_.size() > 2) {
    throw DimensionError("tensors are limited to rank 2, got " +
                         ShapeToString(shape_));
  }
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.size() > 2) {
    throw DimensionError("tensors are limited to rank 2, got " +
                         ShapeToString(shape_));
  }
  if (NumElements(shape_) != data_.size()) {
    throw DimensionError("shape " + ShapeToString(shape_) + " needs " +
                         std::to_string(NumElements(shape_)) +
                         " elements, got " + std::to_string(data_.size()));
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::Matrix(
    std::initializer_list<std::initializer_list<T>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<T> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return BasicTensor(Shape{r, c}, std::move(data));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::Vector(std::initializer_list<T> values) {
  return BasicTensor(Shape{values.size()}, std::vector<T>(values));
}

template <typename T>
std::size_t BasicTensor<T>::rows() const {
  return shape_.size() == 2 ? shape_[0] : 1;
}

template <typename T>
std::size_t BasicTensor<T>::cols() const {
  if (shape_.empty()) return 1;
  return shape_.back();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::Reshaped(Shape shape) const {
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
bool BasicTensor<T>::AllFinite() const {
  for (T v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace kernels {

template <typename T>
void Gemm(std::span<const T> a, std::span<const T> b, std::span<T> c,
          std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
    const T* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void GemmTransALeftAccumulate(std::span<const T> a, std::span<const T> b,
                              std::span<T> c, std::size_t m, std::size_t k,
                              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a.data() + i * k;
    const T* brow = b.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = c.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void Transpose(std::span<const T> a, std::span<T> out, std::size_t rows,
               std::size_t cols) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      std::size_t r1 = std::min(rows, r0 + kBlock);
      std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = a[r * cols + c];
      }
    }
  }
}

template void Gemm<float>(std::span<const float>, std::span<const float>,
                          std::span<float>, std::size_t, std::size_t,
                          std::size_t);
template void Gemm<double>(std::span<const double>, std::span<const double>,
                           std::span<double>, std::size_t, std::size_t,
                           std::size_t);
template void GemmTransALeftAccumulate<float>(std::span<const float>,
                                              std::span<const float>,
                                              std::span<float>, std::size_t,
                                              std::size_t, std::size_t);
template void GemmTransALeftAccumulate<double>(std::span<const double>,
                                               std::span<const double>,
                                               std::span<double>, std::size_t,
                                               std::size_t, std::size_t);
template void Transpose<float>(std::span<const float>, std::span<float>,
                               std::size_t, std::size_t);
template void Transpose<double>(std::span<const double>, std::span<double>,
                                std::size_t, std::size_t);

}  // namespace kernels

template <typename T>
BasicTensor<T> MatMul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul inner dimensions differ: " +
                         ShapeToString(a.shape()) + " * " +
                         ShapeToString(b.shape()));
  }
  BasicTensor<T> out = BasicTensor<T>::Zeros(a.rows(), b.cols());
  kernels::Gemm<T>(a.data(), b.data(), out.mutable_data(), a.rows(), a.cols(),
                   b.cols());
  return out;
}

template <typename T>
BasicTensor<T> Transposed(const BasicTensor<T>& a) {
  BasicTensor<T> out = BasicTensor<T>::Zeros(a.cols(), a.rows());
  kernels::Transpose<T>(a.data(), out.mutable_data(), a.rows(), a.cols());
  return out;
}

template <typename T>
BasicTensor<T> MatMulTransB(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul (b transposed) inner dimensions differ: " +
                         ShapeToString(a.shape()) + " * " +
                         ShapeToString(b.shape()) + "^T");
  }
  return MatMul(a, Transposed(b));
}

template <typename T>
BasicTensor<T> GatherRows(const BasicTensor<T>& a,
                          std::span<const std::size_t> ids) {
  const std::size_t cols = a.cols();
  BasicTensor<T> out = BasicTensor<T>::Zeros(ids.size(), cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= a.rows()) {
      throw ContractError("row index " + std::to_string(ids[i]) +
                          " out of range for " + ShapeToString(a.shape()));
    }
    auto src = a.row(ids[i]);
    std::copy(src.begin(), src.end(), out.mutable_row(i).begin());
  }
  return out;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<float> MatMul(const BasicTensor<float>&,
                                   const BasicTensor<float>&);
template BasicTensor<double> MatMul(const BasicTensor<double>&,
                                    const BasicTensor<double>&);
template BasicTensor<float> MatMulTransB(const BasicTensor<float>&,
                                         const BasicTensor<float>&);
template BasicTensor<double> MatMulTransB(const BasicTensor<double>&,
                                          const BasicTensor<double>&);
template BasicTensor<float> Transposed(const BasicTensor<float>&);
template BasicTensor<double> Transposed(const BasicTensor<double>&);
template BasicTensor<float> GatherRows(const BasicTensor<float>&,
                                       std::span<const std::size_t>);
template BasicTensor<double> GatherRows(const BasicTensor<double>&,
                                        std::span<const std::size_t>);

}  // namespace smartreply
