#include "smartreply/autodiff.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smartreply {

template <typename T>
typename BasicTape<T>::Var BasicTape<T>::Constant(BasicTensor<T> value) {
  if (!value.AllFinite()) {
    throw NumericError("constant with non-finite entries " +
                       ShapeToString(value.shape()));
  }
  nodes_.push_back(Node{std::move(value), {}, false, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

template <typename T>
typename BasicTape<T>::Var BasicTape<T>::Parameter(const BasicTensor<T>& param) {
  auto it = param_ids_.find(&param);
  if (it != param_ids_.end()) return Var(this, it->second);
  if (!param.AllFinite()) {
    throw NumericError("parameter with non-finite entries " +
                       ShapeToString(param.shape()));
  }
  nodes_.push_back(Node{param, {}, record_, nullptr});
  const int id = static_cast<int>(nodes_.size() - 1);
  param_ids_.emplace(&param, id);
  return Var(this, id);
}

template <typename T>
typename BasicTape<T>::Var BasicTape<T>::Record(const char* op,
                                                BasicTensor<T> value,
                                                const std::vector<int>& inputs,
                                                BackwardFn backward) {
  if (!value.AllFinite()) {
    throw NumericError(std::string("op ") + op + " produced non-finite values " +
                       ShapeToString(value.shape()));
  }
  bool needs_grad = false;
  if (record_) {
    for (int id : inputs) needs_grad = needs_grad || nodes_[id].requires_grad;
  }
  nodes_.push_back(
      Node{std::move(value), {}, needs_grad, needs_grad ? std::move(backward) : nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

template <typename T>
BasicTensor<T>& BasicTape<T>::GradRef(int id) {
  Node& node = nodes_[id];
  if (node.grad.shape() != node.value.shape() || node.grad.empty()) {
    node.grad = BasicTensor<T>(node.value.shape());
  }
  return node.grad;
}

template <typename T>
void BasicTape<T>::Backward(Var loss) {
  if (loss.tape() != this) {
    throw ContractError("backward called with a loss from another tape");
  }
  if (loss.value().size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        ShapeToString(loss.shape()));
  }
  if (!record_) throw ContractError("backward on a non-recording tape");
  for (Node& node : nodes_) node.grad = BasicTensor<T>();
  for (const auto& [ptr, id] : param_ids_) GradRef(id);
  GradRef(loss.id())[0] = T(1);
  for (int id = loss.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (node.backward && !node.grad.empty()) node.backward(*this, id);
  }
}

template <typename T>
const BasicTensor<T>& BasicTape<T>::Grad(Var v) {
  return GradRef(v.id());
}

template <typename T>
const BasicTensor<T>& BasicTape<T>::ParamGrad(const BasicTensor<T>& param) {
  auto it = param_ids_.find(&param);
  if (it == param_ids_.end()) {
    throw ContractError("tensor " + ShapeToString(param.shape()) +
                        " was never registered as a parameter on this tape");
  }
  return GradRef(it->second);
}

namespace ad {
namespace {

template <typename T>
void AccumulateInto(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  auto d = dst.mutable_data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <typename T>
void RequireSameTape(BasicVar<T> a, BasicVar<T> b, const char* op) {
  if (a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands live on different tapes");
  }
}

template <typename T>
void RequireSameShape(BasicVar<T> a, BasicVar<T> b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes differ " +
                         ShapeToString(a.shape()) + " vs " +
                         ShapeToString(b.shape()));
  }
}

template <typename T, typename Fwd, typename Deriv>
BasicVar<T> Unary(const char* op, BasicVar<T> a, Fwd fwd, Deriv deriv) {
  const BasicTensor<T>& x = a.value();
  BasicTensor<T> y(x.shape());
  auto yd = y.mutable_data();
  auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = fwd(xd[i]);
  const int ia = a.id();
  return a.tape()->Record(
      op, std::move(y), {ia}, [ia, deriv](BasicTape<T>& tape, int self) {
        const auto& g = tape.GradRef(self);
        const auto& xv = tape.value(ia);
        const auto& yv = tape.value(self);
        auto& dx = tape.GradRef(ia);
        for (std::size_t i = 0; i < dx.size(); ++i) {
          dx[i] += g[i] * deriv(xv[i], yv[i]);
        }
      });
}

// Per-row log of the full symmetric-loss denominator.
template <typename T>
std::vector<double> SymmetricLogDenominators(const BasicTensor<T>& theta) {
  const std::size_t n = theta.rows();
  std::vector<double> log_denom(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      m = std::max({m, static_cast<double>(theta.at(i, j)),
                    static_cast<double>(theta.at(j, i))});
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      s += std::exp(static_cast<double>(theta.at(i, j)) - m);
      if (j != i) s += std::exp(static_cast<double>(theta.at(j, i)) - m);
    }
    log_denom[i] = m + std::log(s);
  }
  return log_denom;
}

template <typename T>
void RequireSquare(const BasicTensor<T>& theta) {
  if (theta.rank() != 2 || theta.rows() != theta.cols() || theta.rows() == 0) {
    throw ContractError("symmetric loss needs a nonempty square matrix, got " +
                        ShapeToString(theta.shape()));
  }
}

}  // namespace

template <typename T>
BasicVar<T> MatMul(BasicVar<T> a, BasicVar<T> b) {
  RequireSameTape(a, b, "matmul");
  BasicTensor<T> out = smartreply::MatMul(a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return a.tape()->Record(
      "matmul", std::move(out), {ia, ib}, [ia, ib](BasicTape<T>& tape, int self) {
        const auto& g = tape.GradRef(self);
        const auto& av = tape.value(ia);
        const auto& bv = tape.value(ib);
        if (tape.RequiresGrad(ia)) {
          AccumulateInto(tape.GradRef(ia), MatMulTransB(g, bv));
        }
        if (tape.RequiresGrad(ib)) {
          kernels::GemmTransALeftAccumulate<T>(av.data(), g.data(),
                                               tape.GradRef(ib).mutable_data(),
                                               av.rows(), av.cols(), g.cols());
        }
      });
}

template <typename T>
BasicVar<T> AddSigned(BasicVar<T> a, BasicVar<T> b, T sign, const char* op) {
  RequireSameTape(a, b, op);
  const BasicTensor<T>& av = a.value();
  const BasicTensor<T>& bv = b.value();
  const bool same = av.shape() == bv.shape();
  const bool broadcast = !same && bv.rows() == 1 && bv.cols() == av.cols() &&
                         av.rank() == 2;
  if (!same && !broadcast) {
    throw DimensionError(std::string(op) + ": shapes differ " +
                         ShapeToString(av.shape()) + " vs " +
                         ShapeToString(bv.shape()));
  }
  BasicTensor<T> out = av;
  const std::size_t cols = av.cols();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    od[i] += sign * bv[same ? i : i % cols];
  }
  const int ia = a.id(), ib = b.id();
  return a.tape()->Record(
      op, std::move(out), {ia, ib},
      [ia, ib, sign, same, cols](BasicTape<T>& tape, int self) {
        const auto& g = tape.GradRef(self);
        if (tape.RequiresGrad(ia)) AccumulateInto(tape.GradRef(ia), g);
        if (tape.RequiresGrad(ib)) {
          auto& db = tape.GradRef(ib);
          for (std::size_t i = 0; i < g.size(); ++i) {
            db[same ? i : i % cols] += sign * g[i];
          }
        }
      });
}

template <typename T>
BasicVar<T> Add(BasicVar<T> a, BasicVar<T> b) {
  return AddSigned(a, b, T(1), "add");
}

template <typename T>
BasicVar<T> Sub(BasicVar<T> a, BasicVar<T> b) {
  return AddSigned(a, b, T(-1), "sub");
}

template <typename T>
BasicVar<T> Mul(BasicVar<T> a, BasicVar<T> b) {
  RequireSameTape(a, b, "mul");
  RequireSameShape(a, b, "mul");
  BasicTensor<T> out = a.value();
  auto od = out.mutable_data();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bv[i];
  const int ia = a.id(), ib = b.id();
  return a.tape()->Record(
      "mul", std::move(out), {ia, ib}, [ia, ib](BasicTape<T>& tape, int self) {
        const auto& g = tape.GradRef(self);
        const auto& av = tape.value(ia);
        const auto& bv = tape.value(ib);
        if (tape.RequiresGrad(ia)) {
          auto& da = tape.GradRef(ia);
          for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
        }
        if (tape.RequiresGrad(ib)) {
          auto& db = tape.GradRef(ib);
          for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
        }
      });
}

template <typename T>
BasicVar<T> Scale(BasicVar<T> a, T factor) {
  return Unary<T>(
      "scale", a, [factor](T x) { return x * factor; },
      [factor](T, T) { return factor; });
}

template <typename T>
BasicVar<T> Tanh(BasicVar<T> a) {
  return Unary<T>(
      "tanh", a, [](T x) { return std::tanh(x); },
      [](T, T y) { return T(1) - y * y; });
}

template <typename T>
BasicVar<T> Sigmoid(BasicVar<T> a) {
  return Unary<T>(
      "sigmoid", a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicVar<T> Exp(BasicVar<T> a) {
  return Unary<T>(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
BasicVar<T> Log(BasicVar<T> a) {
  return Unary<T>(
      "log", a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
BasicVar<T> ConcatCols(std::span<const BasicVar<T>> parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    RequireSameTape(parts[0], p, "concat");
    if (p.value().rows() != rows) {
      throw DimensionError("concat: row counts differ " +
                           ShapeToString(parts[0].shape()) + " vs " +
                           ShapeToString(p.shape()));
    }
    cols += p.value().cols();
    ids.push_back(p.id());
    widths.push_back(p.value().cols());
  }
  BasicTensor<T> out = BasicTensor<T>::Zeros(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = v.row(r);
      std::copy(src.begin(), src.end(), out.mutable_row(r).begin() + offset);
    }
    offset += v.cols();
  }
  return parts[0].tape()->Record(
      "concat", std::move(out), ids,
      [ids, widths, rows, cols](BasicTape<T>& tape, int self) {
        const auto& g = tape.GradRef(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (tape.RequiresGrad(ids[k])) {
            auto& d = tape.GradRef(ids[k]);
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < widths[k]; ++c) {
                d[r * widths[k] + c] += g[r * cols + off + c];
              }
            }
          }
          off += widths[k];
        }
      });
}

template <typename T>
BasicVar<T> SliceCols(BasicVar<T> a, std::size_t begin, std::size_t end) {
  const auto& v = a.value();
  if (begin >= end || end > v.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of range for " +
                         ShapeToString(v.shape()));
  }
  const std::size_t rows = v.rows(), cols = v.cols(), width = end - begin;
  BasicTensor<T> out = BasicTensor<T>::Zeros(rows, width);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) out.at(r, c) = v.at(r, begin + c);
  }
  const int ia = a.id();
  return a.tape()->Record(
      "slice_cols", std::move(out), {ia},
      [ia, rows, cols, begin, width](BasicTape<T>& tape, int self) {
        const auto& g = tape.GradRef(self);
        auto& d = tape.GradRef(ia);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < width; ++c) {
            d[r * cols + begin + c] += g[r * width + c];
          }
        }
      });
}

template <typename T>
BasicVar<T> SliceRows(BasicVar<T> a, std::size_t begin, std::size_t end) {
  const auto& v = a.value();
  if (begin >= end || end > v.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of range for " +
                         ShapeToString(v.shape()));
  }
  const std::size_t cols = v.cols();
  std::vector<T> data(v.data().begin() + begin * cols,
                      v.data().begin() + end * cols);
  BasicTensor<T> out(Shape{end - begin, cols}, std::move(data));
  const int ia = a.id();
  return a.tape()->Record(
      "slice_rows", std::move(out), {ia},
      [ia, begin, cols](BasicTape<T>& tape, int self) {
        const auto& g = tape.GradRef(self);
        auto& d = tape.GradRef(ia);
        for (std::size_t i = 0; i < g.size(); ++i) d[begin * cols + i] += g[i];
      });
}

template <typename T>
BasicVar<T> ConcatRows(std::span<const BasicVar<T>> parts) {
  if (parts.empty()) throw ContractError("concat_rows needs at least one input");
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  std::vector<int> inputs;
  for (const auto& p : parts) {
    RequireSameTape(parts[0], p, "concat_rows");
    if (p.value().cols() != cols) {
      throw DimensionError("concat_rows: column counts differ " +
                           ShapeToString(parts[0].shape()) + " vs " +
                           ShapeToString(p.shape()));
    }
    rows += p.value().rows();
    inputs.push_back(p.id());
  }
  std::vector<T> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) {
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  return parts[0].tape()->Record(
      "concat_rows", BasicTensor<T>(Shape{rows, cols}, std::move(data)), inputs,
      [inputs](BasicTape<T>& tape, int self) {
        const auto& g = tape.GradRef(self);
        std::size_t offset = 0;
        for (int id : inputs) {
          const std::size_t n = tape.value(id).size();
          if (tape.RequiresGrad(id)) {
            auto& d = tape.GradRef(id);
            for (std::size_t i = 0; i < n; ++i) d[i] += g[offset + i];
          }
          offset += n;
        }
      });
}

template <typename T>
BasicVar<T> Transpose(BasicVar<T> a) {
  BasicTensor<T> out = Transposed(a.value());
  const int ia = a.id();
  return a.tape()->Record("transpose", std::move(out), {ia},
                          [ia](BasicTape<T>& tape, int self) {
                            AccumulateInto(tape.GradRef(ia),
                                           Transposed(tape.GradRef(self)));
                          });
}

template <typename T>
BasicVar<T> SumAll(BasicVar<T> a) {
  double s = 0.0;
  for (T v : a.value().data()) s += v;
  const int ia = a.id();
  return a.tape()->Record(
      "sum_all", BasicTensor<T>::Scalar(static_cast<T>(s)), {ia},
      [ia](BasicTape<T>& tape, int self) {
        const T g = tape.GradRef(self)[0];
        auto& d = tape.GradRef(ia);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g;
      });
}

template <typename T>
BasicVar<T> MeanAll(BasicVar<T> a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  return Scale(SumAll(a), static_cast<T>(1.0 / static_cast<double>(n)));
}

template <typename T>
BasicVar<T> SumRows(BasicVar<T> a) {
  const auto& v = a.value();
  const std::size_t rows = v.rows(), cols = v.cols();
  BasicTensor<T> out = BasicTensor<T>::Zeros(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    T s = T(0);
    for (std::size_t c = 0; c < cols; ++c) s += v.at(r, c);
    out[r] = s;
  }
  const int ia = a.id();
  return a.tape()->Record("sum_rows", std::move(out), {ia},
                          [ia, rows, cols](BasicTape<T>& tape, int self) {
                            const auto& g = tape.GradRef(self);
                            auto& d = tape.GradRef(ia);
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t c = 0; c < cols; ++c) {
                                d[r * cols + c] += g[r];
                              }
                            }
                          });
}

template <typename T>
BasicVar<T> SumCols(BasicVar<T> a) {
  const auto& v = a.value();
  const std::size_t rows = v.rows(), cols = v.cols();
  BasicTensor<T> out = BasicTensor<T>::Zeros(1, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += v.at(r, c);
  }
  const int ia = a.id();
  return a.tape()->Record("sum_cols", std::move(out), {ia},
                          [ia, rows, cols](BasicTape<T>& tape, int self) {
                            const auto& g = tape.GradRef(self);
                            auto& d = tape.GradRef(ia);
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t c = 0; c < cols; ++c) {
                                d[r * cols + c] += g[c];
                              }
                            }
                          });
}

template <typename T>
BasicVar<T> GatherRows(BasicVar<T> table, std::span<const std::size_t> ids) {
  BasicTensor<T> out = smartreply::GatherRows(table.value(), ids);
  const int it = table.id();
  const std::size_t cols = table.value().cols();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return table.tape()->Record(
      "gather_rows", std::move(out), {it},
      [it, cols, idx = std::move(idx)](BasicTape<T>& tape, int self) {
        const auto& g = tape.GradRef(self);
        auto& d = tape.GradRef(it);
        for (std::size_t i = 0; i < idx.size(); ++i) {
          T* dst = d.mutable_data().data() + idx[i] * cols;
          const T* src = g.data().data() + i * cols;
          for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
        }
      });
}

template <typename T>
BasicVar<T> SelectRows(std::span<const std::uint8_t> take, BasicVar<T> if_true,
                       BasicVar<T> if_false) {
  RequireSameTape(if_true, if_false, "select_rows");
  RequireSameShape(if_true, if_false, "select_rows");
  const auto& tv = if_true.value();
  const auto& fv = if_false.value();
  if (take.size() != tv.rows()) {
    throw DimensionError("select_rows: mask of length " +
                         std::to_string(take.size()) + " for " +
                         ShapeToString(tv.shape()));
  }
  const std::size_t cols = tv.cols();
  BasicTensor<T> out = fv;
  for (std::size_t r = 0; r < take.size(); ++r) {
    if (take[r]) {
      auto src = tv.row(r);
      std::copy(src.begin(), src.end(), out.mutable_row(r).begin());
    }
  }
  std::vector<std::uint8_t> mask(take.begin(), take.end());
  const int it = if_true.id(), jf = if_false.id();
  return if_true.tape()->Record(
      "select_rows", std::move(out), {it, jf},
      [it, jf, cols, mask = std::move(mask)](BasicTape<T>& tape, int self) {
        const auto& g = tape.GradRef(self);
        const bool need_t = tape.RequiresGrad(it);
        const bool need_f = tape.RequiresGrad(jf);
        for (std::size_t r = 0; r < mask.size(); ++r) {
          const int dst_id = mask[r] ? it : jf;
          if (!(mask[r] ? need_t : need_f)) continue;
          auto& d = tape.GradRef(dst_id);
          for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[r * cols + c];
        }
      });
}

template <typename T>
double SymmetricNllValue(const BasicTensor<T>& theta) {
  RequireSquare(theta);
  const std::size_t n = theta.rows();
  const std::vector<double> log_denom = SymmetricLogDenominators(theta);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss -= static_cast<double>(theta.at(i, i)) - log_denom[i];
  }
  return loss / static_cast<double>(n);
}

template <typename T>
BasicVar<T> SymmetricNll(BasicVar<T> theta) {
  const auto& tv = theta.value();
  RequireSquare(tv);
  const std::size_t n = tv.rows();
  std::vector<double> log_denom = SymmetricLogDenominators(tv);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss -= static_cast<double>(tv.at(i, i)) - log_denom[i];
  }
  loss /= static_cast<double>(n);
  const int ia = theta.id();
  return theta.tape()->Record(
      "symmetric_nll", BasicTensor<T>::Scalar(static_cast<T>(loss)), {ia},
      [ia, n, log_denom = std::move(log_denom)](BasicTape<T>& tape, int self) {
        const double g = static_cast<double>(tape.GradRef(self)[0]) /
                         static_cast<double>(n);
        const auto& th = tape.value(ia);
        auto& d = tape.GradRef(ia);
        for (std::size_t a = 0; a < n; ++a) {
          for (std::size_t b = 0; b < n; ++b) {
            const double t = static_cast<double>(th.at(a, b));
            double v;
            if (a == b) {
              v = std::exp(t - log_denom[a]) - 1.0;
            } else {
              v = std::exp(t - log_denom[a]) + std::exp(t - log_denom[b]);
            }
            d[a * n + b] += static_cast<T>(g * v);
          }
        }
      });
}

#define SMARTREPLY_INSTANTIATE_OPS(T)                                          \
  template BasicVar<T> MatMul(BasicVar<T>, BasicVar<T>);                       \
  template BasicVar<T> Add(BasicVar<T>, BasicVar<T>);                          \
  template BasicVar<T> Sub(BasicVar<T>, BasicVar<T>);                          \
  template BasicVar<T> Mul(BasicVar<T>, BasicVar<T>);                          \
  template BasicVar<T> Scale(BasicVar<T>, T);                                  \
  template BasicVar<T> Tanh(BasicVar<T>);                                      \
  template BasicVar<T> Sigmoid(BasicVar<T>);                                   \
  template BasicVar<T> Exp(BasicVar<T>);                                       \
  template BasicVar<T> Log(BasicVar<T>);                                       \
  template BasicVar<T> ConcatCols(std::span<const BasicVar<T>>);               \
  template BasicVar<T> SliceCols(BasicVar<T>, std::size_t, std::size_t);       \
  template BasicVar<T> SliceRows(BasicVar<T>, std::size_t, std::size_t);       \
  template BasicVar<T> ConcatRows(std::span<const BasicVar<T>>);               \
  template BasicVar<T> Transpose(BasicVar<T>);                                 \
  template BasicVar<T> SumAll(BasicVar<T>);                                    \
  template BasicVar<T> MeanAll(BasicVar<T>);                                   \
  template BasicVar<T> SumRows(BasicVar<T>);                                   \
  template BasicVar<T> SumCols(BasicVar<T>);                                   \
  template BasicVar<T> GatherRows(BasicVar<T>, std::span<const std::size_t>);  \
  template BasicVar<T> SelectRows(std::span<const std::uint8_t>, BasicVar<T>,  \
                                  BasicVar<T>);                                \
  template BasicVar<T> SymmetricNll(BasicVar<T>);                              \
  template double SymmetricNllValue(const BasicTensor<T>&);

SMARTREPLY_INSTANTIATE_OPS(float)
SMARTREPLY_INSTANTIATE_OPS(double)

#undef SMARTREPLY_INSTANTIATE_OPS

}  // namespace ad

template class BasicTape<float>;
template class BasicTape<double>;

}  // namespace smartreply
