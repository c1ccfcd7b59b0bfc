#ifndef SMARTREPLY_AUTODIFF_H_
#define SMARTREPLY_AUTODIFF_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "smartreply/error.h"
#include "smartreply/tensor.h"

namespace smartreply {

template <typename T>
class BasicTape;

// Handle to a value recorded on a tape.
template <typename T>
class BasicVar {
 public:
  BasicVar() = default;
  BasicVar(BasicTape<T>* tape, int id) : tape_(tape), id_(id) {}

  const BasicTensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  BasicTape<T>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  BasicTape<T>* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape over a closed set of dense ops. A tape constructed with
// record=false evaluates forward values only (inference); ops then keep no
// closures and nothing requires gradients.
template <typename T>
class BasicTape {
 public:
  using Var = BasicVar<T>;
  using BackwardFn = std::function<void(BasicTape&, int)>;

  explicit BasicTape(bool record = true) : record_(record) {}
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var Constant(BasicTensor<T> value);
  // Leaf bound to caller-owned storage. Registering the same tensor twice
  // returns the same leaf, so shared weights accumulate one gradient.
  Var Parameter(const BasicTensor<T>& param);

  // Used by op implementations.
  // Throws NumericError naming `op` if the value is not finite.
  Var Record(const char* op, BasicTensor<T> value,
             const std::vector<int>& inputs, BackwardFn backward);
  bool RequiresGrad(int id) const { return nodes_[id].requires_grad; }
  const BasicTensor<T>& value(int id) const { return nodes_[id].value; }
  // Gradient buffer for `id`, zero-initialised on first access.
  BasicTensor<T>& GradRef(int id);

  // Runs the recorded backward closures in exact reverse order. `loss` must
  // be a single-element value recorded on this tape.
  void Backward(Var loss);

  // Gradient of a node after Backward (zeros if it did not reach the loss).
  const BasicTensor<T>& Grad(Var v);
  const BasicTensor<T>& ParamGrad(const BasicTensor<T>& param);
  bool HasParameter(const BasicTensor<T>& param) const {
    return param_ids_.count(&param) > 0;
  }

 private:
  struct Node {
    BasicTensor<T> value;
    BasicTensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const BasicTensor<T>*, int> param_ids_;
};

using Tape = BasicTape<float>;
using Var = BasicVar<float>;

namespace ad {

template <typename T>
BasicVar<T> MatMul(BasicVar<T> a, BasicVar<T> b);
// b must have a's shape or be a single row broadcast over a's rows.
template <typename T>
BasicVar<T> Add(BasicVar<T> a, BasicVar<T> b);
template <typename T>
BasicVar<T> Sub(BasicVar<T> a, BasicVar<T> b);
template <typename T>
BasicVar<T> Mul(BasicVar<T> a, BasicVar<T> b);
template <typename T>
BasicVar<T> Scale(BasicVar<T> a, T factor);
template <typename T>
BasicVar<T> Tanh(BasicVar<T> a);
template <typename T>
BasicVar<T> Sigmoid(BasicVar<T> a);
template <typename T>
BasicVar<T> Exp(BasicVar<T> a);
template <typename T>
BasicVar<T> Log(BasicVar<T> a);
template <typename T>
BasicVar<T> ConcatCols(std::span<const BasicVar<T>> parts);
template <typename T>
BasicVar<T> SliceCols(BasicVar<T> a, std::size_t begin, std::size_t end);
template <typename T>
BasicVar<T> SliceRows(BasicVar<T> a, std::size_t begin, std::size_t end);
// Stacks inputs vertically; all must have the same column count.
template <typename T>
BasicVar<T> ConcatRows(std::span<const BasicVar<T>> parts);
template <typename T>
BasicVar<T> Transpose(BasicVar<T> a);
template <typename T>
BasicVar<T> SumAll(BasicVar<T> a);
template <typename T>
BasicVar<T> MeanAll(BasicVar<T> a);
// [m x n] -> [m x 1]
template <typename T>
BasicVar<T> SumRows(BasicVar<T> a);
// [m x n] -> [1 x n]
template <typename T>
BasicVar<T> SumCols(BasicVar<T> a);
// Embedding lookup: row ids[i] of table becomes output row i.
template <typename T>
BasicVar<T> GatherRows(BasicVar<T> table, std::span<const std::size_t> ids);
// Row i from `if_true` where take[i] != 0, else from `if_false`.
template <typename T>
BasicVar<T> SelectRows(std::span<const std::uint8_t> take, BasicVar<T> if_true,
                       BasicVar<T> if_false);
// Mean over rows of -ln p(theta_ii) where
//   p(theta_ii) = e^theta_ii / (sum_j e^theta_ij + sum_j e^theta_ji - e^theta_ii).
// Log-sum-exp stabilised; theta must be square.
template <typename T>
BasicVar<T> SymmetricNll(BasicVar<T> theta);

// Forward-only evaluation of the same loss, used by oracles and reports.
template <typename T>
double SymmetricNllValue(const BasicTensor<T>& theta);

}  // namespace ad

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares tape gradients of `loss_fn` against central differences. `loss_fn`
// builds a scalar loss on the tape it is handed, registering every tensor in
// `params` through Tape::Parameter; it must be deterministic (noise frozen).
// Relative error is |analytic - fd| / max(|analytic|, |fd|, 1e-8).
template <typename T, typename LossFn>
GradCheckResult GradCheck(LossFn&& loss_fn, std::vector<BasicTensor<T>*> params,
                          double step) {
  std::vector<BasicTensor<T>> analytic;
  {
    BasicTape<T> tape(true);
    BasicVar<T> loss = loss_fn(tape);
    tape.Backward(loss);
    for (BasicTensor<T>* p : params) analytic.push_back(tape.ParamGrad(*p));
  }
  auto evaluate = [&]() -> double {
    BasicTape<T> tape(false);
    return static_cast<double>(loss_fn(tape).value()[0]);
  };
  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    BasicTensor<T>& p = *params[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T original = p[i];
      const T up = static_cast<T>(original + step);
      const T down = static_cast<T>(original - step);
      p[i] = up;
      const double plus = evaluate();
      p[i] = down;
      const double minus = evaluate();
      p[i] = original;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericError("non-finite loss while perturbing parameter " +
                           std::to_string(pi) + " element " +
                           std::to_string(i));
      }
      const double fd = (plus - minus) / (static_cast<double>(up) -
                                          static_cast<double>(down));
      const double an = static_cast<double>(analytic[pi][i]);
      const double denom = std::max({std::abs(an), std::abs(fd), 1e-8});
      const double rel = std::abs(an - fd) / denom;
      if (rel > result.max_relative_error) {
        result = {rel, pi, i, an, fd};
      }
    }
  }
  return result;
}

}  // namespace smartreply

#endif  // SMARTREPLY_AUTODIFF_H_
