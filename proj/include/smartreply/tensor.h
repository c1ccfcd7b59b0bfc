#ifndef SMARTREPLY_TENSOR_H_
#define SMARTREPLY_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace smartreply {

using Shape = std::vector<std::size_t>;

std::string ShapeToString(const Shape& shape);
std::size_t NumElements(const Shape& shape);

// Dense row-major tensor. Rank 0 is a scalar, rank 1 a vector that matrix
// code treats as a single row, rank 2 a matrix. The scalar type is float in
// every production path; double exists for numerical reference checks.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape);
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor Zeros(std::size_t rows, std::size_t cols) {
    return BasicTensor(Shape{rows, cols});
  }
  static BasicTensor Scalar(T value) { return BasicTensor(Shape{}, {value}); }
  static BasicTensor Matrix(std::initializer_list<std::initializer_list<T>> rows);
  static BasicTensor Vector(std::initializer_list<T> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Matrix view: rank 0 -> 1x1, rank 1 -> 1xn.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const T> data() const { return data_; }
  std::span<T> mutable_data() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  T& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * cols(), cols());
  }
  std::span<T> mutable_row(std::size_t r) {
    return std::span<T>(data_).subspan(r * cols(), cols());
  }

  BasicTensor Reshaped(Shape shape) const;
  bool AllFinite() const;

  template <typename U>
  BasicTensor<U> Cast() const {
    if (shape_.empty() && data_.empty()) return BasicTensor<U>();
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

// Dense kernels. All accumulate each output element in ascending inner
// index order, so results are reproducible by a naive triple loop.
namespace kernels {

// c[m x n] = a[m x k] * b[k x n]
template <typename T>
void Gemm(std::span<const T> a, std::span<const T> b, std::span<T> c,
          std::size_t m, std::size_t k, std::size_t n);

// c[k x n] += a[m x k]^T * b[m x n]
template <typename T>
void GemmTransALeftAccumulate(std::span<const T> a, std::span<const T> b,
                              std::span<T> c, std::size_t m, std::size_t k,
                              std::size_t n);

template <typename T>
void Transpose(std::span<const T> a, std::span<T> out, std::size_t rows,
               std::size_t cols);

}  // namespace kernels

template <typename T>
BasicTensor<T> MatMul(const BasicTensor<T>& a, const BasicTensor<T>& b);

// a * b^T; b is transposed once so the product runs through Gemm.
template <typename T>
BasicTensor<T> MatMulTransB(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> Transposed(const BasicTensor<T>& a);

// Rows of `a` selected by index, in order.
template <typename T>
BasicTensor<T> GatherRows(const BasicTensor<T>& a,
                          std::span<const std::size_t> ids);

}  // namespace smartreply

#endif  // SMARTREPLY_TENSOR_H_
