#ifndef SMARTREPLY_MCVAE_H_
#define SMARTREPLY_MCVAE_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "smartreply/autodiff.h"
#include "smartreply/encoder.h"
#include "smartreply/matching.h"
#include "smartreply/optim.h"
#include "smartreply/rng.h"

namespace smartreply {

struct CvaeConfig {
  std::size_t z_dim = 256;
  std::size_t hidden = 0;  // 0 means "same as the encoding dimension"
  float kl_weight = 1.0f;
  // Linear KL-weight warm-up from 0 over this many steps; 0 disables it.
  std::size_t kl_anneal_steps = 0;
  int epochs = 6;
  std::size_t batch_size = 64;
  AdadeltaConfig adadelta;
  std::uint64_t seed = 1;

  void Validate() const;
  nlohmann::json ToJson() const;
  static CvaeConfig FromJson(const nlohmann::json& j);
};

// Recognition network (one shared tanh layer with mean and log-variance
// heads) and decoder w2 * tanh(w1 [z; phi_x] + b1) + b2.
template <typename T>
struct BasicCvaeParams {
  BasicTensor<T> rec_w;     // [2d x hidden]
  BasicTensor<T> rec_b;     // [1 x hidden]
  BasicTensor<T> mu_w;      // [hidden x z]
  BasicTensor<T> mu_b;      // [1 x z]
  BasicTensor<T> logvar_w;  // [hidden x z]
  BasicTensor<T> logvar_b;  // [1 x z]
  BasicTensor<T> dec_w1;    // [(z + d) x hidden]
  BasicTensor<T> dec_b1;    // [1 x hidden]
  BasicTensor<T> dec_w2;    // [hidden x d]
  BasicTensor<T> dec_b2;    // [1 x d]

  static BasicCvaeParams Init(std::size_t d, std::size_t z_dim, std::size_t hidden,
                              std::uint64_t seed);
  // All-zero parameters of the given sizes.
  static BasicCvaeParams Zeros(std::size_t d, std::size_t z_dim, std::size_t hidden);

  std::size_t d() const { return dec_w2.cols(); }
  std::size_t z_dim() const { return mu_w.cols(); }
  std::size_t hidden() const { return rec_w.cols(); }

  std::vector<std::pair<std::string, BasicTensor<T>*>> NamedParameters();
  std::vector<std::pair<std::string, const BasicTensor<T>*>> NamedParameters() const;

  template <typename U>
  BasicCvaeParams<U> Cast() const;
};

using CvaeParams = BasicCvaeParams<float>;

template <typename T>
struct Posterior {
  BasicVar<T> mu;
  BasicVar<T> logvar;
  BasicVar<T> sigma;  // exp(logvar / 2)
};

template <typename T>
Posterior<T> Recognize(BasicTape<T>& tape, const BasicCvaeParams<T>& p, BasicVar<T> phi_x,
                       BasicVar<T> phi_y);

template <typename T>
BasicVar<T> Reparameterize(BasicVar<T> mu, BasicVar<T> sigma, BasicVar<T> eps);

template <typename T>
BasicVar<T> Decode(BasicTape<T>& tape, const BasicCvaeParams<T>& p, BasicVar<T> z,
                   BasicVar<T> phi_x);

// Summed closed-form KL to N(0, I), averaged over rows.
template <typename T>
BasicVar<T> KlDivergence(BasicVar<T> mu, BasicVar<T> logvar);

// Reference value: 1/2 sum (mu^2 + sigma^2 - 1 - ln sigma^2).
double KlDivergenceValue(std::span<const float> mu, std::span<const float> sigma);

struct ElboReport {
  double kl = 0.0;              // mean per item
  double reconstruction = 0.0;  // minus the symmetric loss
  double total = 0.0;           // loss = kl_weight * kl - reconstruction
  double mean_mu_sq = 0.0;
  double mean_sigma_sq = 0.0;
};

template <typename T>
struct ElboTerms {
  BasicVar<T> loss;
  ElboReport report;
};

// Loss from already decoded vectors; exposed so a stub decoder can be used.
template <typename T>
ElboTerms<T> ElboFromDecoded(const Posterior<T>& q, BasicVar<T> decoded, BasicVar<T> phi_y,
                             T kl_weight);

// One epsilon sample per item ([n x z_dim], row-major).
template <typename T>
ElboTerms<T> ElboLoss(BasicTape<T>& tape, const BasicCvaeParams<T>& p, BasicVar<T> phi_x,
                      BasicVar<T> phi_y, const BasicTensor<T>& eps, T kl_weight);

struct CvaeEpochReport {
  int epoch = 0;
  ElboReport train;
  ElboReport validation;
  double kl_weight = 0.0;
  double seconds = 0.0;
};

struct CvaeTrainingReport {
  std::vector<CvaeEpochReport> epochs;
  int best_epoch = 0;
  double best_validation_loss = 0.0;
  bool posterior_collapse = false;
  std::vector<std::string> warnings;
  nlohmann::json ToJson() const;
};

// Mean KL below this for kCollapseEpochs consecutive epochs is reported as
// posterior collapse.
inline constexpr double kCollapseKl = 0.01;
inline constexpr int kCollapseEpochs = 3;

// Trains only the CVAE layers on frozen encodings of `base` (computed once,
// in inference mode). Validation uses a fixed noise stream so epochs are
// comparable; the best-validation epoch is returned.
CvaeParams TrainCvae(const DualEncoder& base, const EncodedPairs& train,
                     const EncodedPairs& validation, const CvaeConfig& config,
                     CvaeTrainingReport* report = nullptr);

// Inference-time decoder for prior samples: z [s x z_dim] against one
// message encoding. Same kernels and operation order as the tape version.
Tensor DecodeSamples(const CvaeParams& p, const Tensor& z, std::span<const float> phi_x);

}  // namespace smartreply

#endif  // SMARTREPLY_MCVAE_H_
