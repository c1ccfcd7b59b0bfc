#ifndef SMARTREPLY_OPTIM_H_
#define SMARTREPLY_OPTIM_H_

#include <unordered_map>
#include <vector>

#include "smartreply/tensor.h"

namespace smartreply {

struct AdadeltaConfig {
  float rho = 0.95f;
  float epsilon = 1e-6f;
  float learning_rate = 1.0f;
  // Global gradient-norm clip applied across one Step call; <= 0 disables.
  float clip_norm = 5.0f;
};

// Adadelta (Zeiler 2012). Per-parameter accumulators are keyed by the
// parameter's address, so parameters must not move between steps.
class Adadelta {
 public:
  explicit Adadelta(AdadeltaConfig config = {}) : config_(config) {}

  struct Update {
    Tensor* param;
    const Tensor* grad;
  };
  // Applies one update to every listed parameter; returns the pre-clip
  // global gradient norm.
  double Step(const std::vector<Update>& updates);

  const AdadeltaConfig& config() const { return config_; }

 private:
  struct State {
    std::vector<float> mean_sq_grad;
    std::vector<float> mean_sq_delta;
  };
  AdadeltaConfig config_;
  std::unordered_map<const Tensor*, State> state_;
};

}  // namespace smartreply

#endif  // SMARTREPLY_OPTIM_H_
