#include "smartreply/optim.h"

#include <cmath>

#include "smartreply/error.h"

namespace smartreply {

double Adadelta::Step(const std::vector<Update>& updates) {
  double sq = 0.0;
  for (const Update& u : updates) {
    if (u.param->shape() != u.grad->shape()) {
      throw DimensionError("optimizer: parameter " +
                           ShapeToString(u.param->shape()) + " vs gradient " +
                           ShapeToString(u.grad->shape()));
    }
    for (float g : u.grad->data()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  float clip = 1.0f;
  if (config_.clip_norm > 0.0f && norm > config_.clip_norm) {
    clip = static_cast<float>(config_.clip_norm / norm);
  }
  const float rho = config_.rho, eps = config_.epsilon;
  for (const Update& u : updates) {
    State& s = state_[u.param];
    if (s.mean_sq_grad.size() != u.param->size()) {
      s.mean_sq_grad.assign(u.param->size(), 0.0f);
      s.mean_sq_delta.assign(u.param->size(), 0.0f);
    }
    auto p = u.param->mutable_data();
    auto g = u.grad->data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const float gi = g[i] * clip;
      s.mean_sq_grad[i] = rho * s.mean_sq_grad[i] + (1.0f - rho) * gi * gi;
      const float delta = std::sqrt(s.mean_sq_delta[i] + eps) /
                          std::sqrt(s.mean_sq_grad[i] + eps) * gi;
      s.mean_sq_delta[i] = rho * s.mean_sq_delta[i] + (1.0f - rho) * delta * delta;
      p[i] -= config_.learning_rate * delta;
    }
  }
  return norm;
}

}  // namespace smartreply
