#include "smartreply/mcvae.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "smartreply/error.h"

namespace smartreply {

void CvaeConfig::Validate() const {
  if (z_dim == 0) throw ContractError("z_dim must be positive");
  if (batch_size < kMinBatchSize) {
    throw ContractError("cvae batch_size must be at least " + std::to_string(kMinBatchSize));
  }
  if (!(kl_weight >= 0.0f)) throw ContractError("kl_weight must be >= 0");
  if (epochs < 0) throw ContractError("epochs must be >= 0");
}

nlohmann::json CvaeConfig::ToJson() const {
  return {{"z_dim", z_dim},
          {"hidden", hidden},
          {"kl_weight", kl_weight},
          {"kl_anneal_steps", kl_anneal_steps},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"seed", seed},
          {"rho", adadelta.rho},
          {"epsilon", adadelta.epsilon},
          {"learning_rate", adadelta.learning_rate},
          {"clip_norm", adadelta.clip_norm}};
}

CvaeConfig CvaeConfig::FromJson(const nlohmann::json& j) {
  CvaeConfig c;
  c.z_dim = j.value("z_dim", c.z_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.kl_weight = j.value("kl_weight", c.kl_weight);
  c.kl_anneal_steps = j.value("kl_anneal_steps", c.kl_anneal_steps);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.adadelta.rho = j.value("rho", c.adadelta.rho);
  c.adadelta.epsilon = j.value("epsilon", c.adadelta.epsilon);
  c.adadelta.learning_rate = j.value("learning_rate", c.adadelta.learning_rate);
  c.adadelta.clip_norm = j.value("clip_norm", c.adadelta.clip_norm);
  return c;
}

namespace {

template <typename T>
BasicTensor<T> Glorot(Rng& rng, std::size_t rows, std::size_t cols) {
  BasicTensor<T> t = BasicTensor<T>::Zeros(rows, cols);
  const double scale = std::sqrt(2.0 / static_cast<double>(rows + cols));
  for (T& v : t.mutable_data()) v = static_cast<T>(rng.Gaussian() * scale);
  return t;
}

nlohmann::json ElboJson(const ElboReport& r) {
  return {{"kl", r.kl},
          {"reconstruction", r.reconstruction},
          {"total", r.total},
          {"mean_mu_sq", r.mean_mu_sq},
          {"mean_sigma_sq", r.mean_sigma_sq}};
}

}  // namespace

template <typename T>
BasicCvaeParams<T> BasicCvaeParams<T>::Zeros(std::size_t d, std::size_t z, std::size_t h) {
  BasicCvaeParams<T> p;
  p.rec_w = BasicTensor<T>::Zeros(2 * d, h);
  p.rec_b = BasicTensor<T>::Zeros(1, h);
  p.mu_w = BasicTensor<T>::Zeros(h, z);
  p.mu_b = BasicTensor<T>::Zeros(1, z);
  p.logvar_w = BasicTensor<T>::Zeros(h, z);
  p.logvar_b = BasicTensor<T>::Zeros(1, z);
  p.dec_w1 = BasicTensor<T>::Zeros(z + d, h);
  p.dec_b1 = BasicTensor<T>::Zeros(1, h);
  p.dec_w2 = BasicTensor<T>::Zeros(h, d);
  p.dec_b2 = BasicTensor<T>::Zeros(1, d);
  return p;
}

template <typename T>
BasicCvaeParams<T> BasicCvaeParams<T>::Init(std::size_t d, std::size_t z, std::size_t h,
                                            std::uint64_t seed) {
  if (d == 0 || z == 0 || h == 0) throw ContractError("cvae sizes must be positive");
  Rng rng(seed);
  BasicCvaeParams<T> p = Zeros(d, z, h);
  p.rec_w = Glorot<T>(rng, 2 * d, h);
  p.mu_w = Glorot<T>(rng, h, z);
  // Small log-variance weights start the posterior near unit variance.
  p.logvar_w = Glorot<T>(rng, h, z);
  for (T& v : p.logvar_w.mutable_data()) v *= T(0.1);
  p.dec_w1 = Glorot<T>(rng, z + d, h);
  p.dec_w2 = Glorot<T>(rng, h, d);
  return p;
}

template <typename T>
std::vector<std::pair<std::string, BasicTensor<T>*>> BasicCvaeParams<T>::NamedParameters() {
  return {{"cvae.rec.w", &rec_w},       {"cvae.rec.b", &rec_b},
          {"cvae.mu.w", &mu_w},         {"cvae.mu.b", &mu_b},
          {"cvae.logvar.w", &logvar_w}, {"cvae.logvar.b", &logvar_b},
          {"cvae.dec1.w", &dec_w1},     {"cvae.dec1.b", &dec_b1},
          {"cvae.dec2.w", &dec_w2},     {"cvae.dec2.b", &dec_b2}};
}

template <typename T>
std::vector<std::pair<std::string, const BasicTensor<T>*>>
BasicCvaeParams<T>::NamedParameters() const {
  std::vector<std::pair<std::string, const BasicTensor<T>*>> out;
  for (auto& [n, p] : const_cast<BasicCvaeParams<T>*>(this)->NamedParameters()) {
    out.emplace_back(n, p);
  }
  return out;
}

template <typename T>
template <typename U>
BasicCvaeParams<U> BasicCvaeParams<T>::Cast() const {
  BasicCvaeParams<U> out;
  auto src = NamedParameters();
  auto dst = out.NamedParameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    *dst[i].second = src[i].second->template Cast<U>();
  }
  return out;
}

template <typename T>
Posterior<T> Recognize(BasicTape<T>& tape, const BasicCvaeParams<T>& p, BasicVar<T> phi_x,
                       BasicVar<T> phi_y) {
  if (phi_x.shape() != phi_y.shape() || phi_x.value().cols() != p.d()) {
    throw DimensionError("recognize: encodings " + ShapeToString(phi_x.shape()) + " and " +
                         ShapeToString(phi_y.shape()) + " for d = " + std::to_string(p.d()));
  }
  std::vector<BasicVar<T>> xy = {phi_x, phi_y};
  BasicVar<T> h = ad::Tanh(ad::Add(ad::MatMul(ad::ConcatCols<T>(xy), tape.Parameter(p.rec_w)),
                                   tape.Parameter(p.rec_b)));
  Posterior<T> q;
  q.mu = ad::Add(ad::MatMul(h, tape.Parameter(p.mu_w)), tape.Parameter(p.mu_b));
  q.logvar = ad::Add(ad::MatMul(h, tape.Parameter(p.logvar_w)), tape.Parameter(p.logvar_b));
  q.sigma = ad::Exp(ad::Scale(q.logvar, T(0.5)));
  return q;
}

template <typename T>
BasicVar<T> Reparameterize(BasicVar<T> mu, BasicVar<T> sigma, BasicVar<T> eps) {
  return ad::Add(mu, ad::Mul(sigma, eps));
}

template <typename T>
BasicVar<T> Decode(BasicTape<T>& tape, const BasicCvaeParams<T>& p, BasicVar<T> z,
                   BasicVar<T> phi_x) {
  if (z.value().cols() != p.z_dim() || phi_x.value().cols() != p.d() ||
      z.value().rows() != phi_x.value().rows()) {
    throw DimensionError("decode: z " + ShapeToString(z.shape()) + ", phi_x " +
                         ShapeToString(phi_x.shape()));
  }
  std::vector<BasicVar<T>> zx = {z, phi_x};
  BasicVar<T> h = ad::Tanh(ad::Add(ad::MatMul(ad::ConcatCols<T>(zx), tape.Parameter(p.dec_w1)),
                                   tape.Parameter(p.dec_b1)));
  return ad::Add(ad::MatMul(h, tape.Parameter(p.dec_w2)), tape.Parameter(p.dec_b2));
}

template <typename T>
BasicVar<T> KlDivergence(BasicVar<T> mu, BasicVar<T> logvar) {
  const auto n = static_cast<T>(mu.value().rows());
  const auto count = static_cast<T>(mu.value().size());
  BasicTape<T>& tape = *mu.tape();
  // 1/2 sum(mu^2 + e^lv - lv) - count/2, then averaged over rows.
  BasicVar<T> inner = ad::Sub(ad::Add(ad::Mul(mu, mu), ad::Exp(logvar)), logvar);
  BasicVar<T> s = ad::Sub(ad::Scale(ad::SumAll(inner), T(0.5)),
                          tape.Constant(BasicTensor<T>::Scalar(count / T(2))));
  return ad::Scale(s, T(1) / n);
}

double KlDivergenceValue(std::span<const float> mu, std::span<const float> sigma) {
  if (mu.size() != sigma.size()) throw DimensionError("kl: mu and sigma sizes differ");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(sigma[i] > 0.0f)) throw ContractError("kl needs sigma > 0");
    const double m = mu[i], s2 = static_cast<double>(sigma[i]) * sigma[i];
    kl += m * m + s2 - 1.0 - std::log(s2);
  }
  return 0.5 * kl;
}

template <typename T>
ElboTerms<T> ElboFromDecoded(const Posterior<T>& q, BasicVar<T> decoded, BasicVar<T> phi_y,
                             T kl_weight) {
  BasicVar<T> kl = KlDivergence(q.mu, q.logvar);
  BasicVar<T> nll = ad::SymmetricNll(ad::MatMul(decoded, ad::Transpose(phi_y)));
  ElboTerms<T> out;
  out.loss = ad::Add(ad::Scale(kl, kl_weight), nll);
  out.report.kl = kl.value()[0];
  out.report.reconstruction = -static_cast<double>(nll.value()[0]);
  out.report.total = out.loss.value()[0];
  double mu2 = 0.0, s2 = 0.0;
  for (T v : q.mu.value().data()) mu2 += static_cast<double>(v) * v;
  for (T v : q.sigma.value().data()) s2 += static_cast<double>(v) * v;
  const auto count = static_cast<double>(q.mu.value().size());
  out.report.mean_mu_sq = mu2 / count;
  out.report.mean_sigma_sq = s2 / count;
  return out;
}

template <typename T>
ElboTerms<T> ElboLoss(BasicTape<T>& tape, const BasicCvaeParams<T>& p, BasicVar<T> phi_x,
                      BasicVar<T> phi_y, const BasicTensor<T>& eps, T kl_weight) {
  if (phi_x.value().rows() < kMinBatchSize) {
    throw ContractError("elbo needs a batch of at least " + std::to_string(kMinBatchSize));
  }
  Posterior<T> q = Recognize(tape, p, phi_x, phi_y);
  BasicVar<T> z = Reparameterize(q.mu, q.sigma, tape.Constant(eps));
  return ElboFromDecoded(q, Decode(tape, p, z, phi_x), phi_y, kl_weight);
}

nlohmann::json CvaeTrainingReport::ToJson() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"train", ElboJson(e.train)},
                    {"validation", ElboJson(e.validation)},
                    {"kl_weight", e.kl_weight},
                    {"seconds", e.seconds}});
  }
  return {{"epochs", rows},
          {"best_epoch", best_epoch},
          {"best_validation_loss", best_validation_loss},
          {"posterior_collapse", posterior_collapse},
          {"warnings", warnings}};
}

namespace {

Tensor Rows(const Tensor& src, std::span<const std::size_t> idx) { return GatherRows(src, idx); }

void Accumulate(ElboReport& acc, const ElboReport& r) {
  acc.kl += r.kl;
  acc.reconstruction += r.reconstruction;
  acc.total += r.total;
  acc.mean_mu_sq += r.mean_mu_sq;
  acc.mean_sigma_sq += r.mean_sigma_sq;
}

void Divide(ElboReport& acc, double n) {
  if (n == 0.0) return;
  acc.kl /= n;
  acc.reconstruction /= n;
  acc.total /= n;
  acc.mean_mu_sq /= n;
  acc.mean_sigma_sq /= n;
}

ElboReport Evaluate(const CvaeParams& p, const Tensor& px, const Tensor& py,
                    std::size_t batch_size, float kl_weight, std::uint64_t seed) {
  Rng rng(seed);
  ElboReport acc;
  std::size_t batches = 0;
  for (std::size_t start = 0; start + kMinBatchSize <= px.rows(); start += batch_size) {
    const std::size_t end = std::min(px.rows(), start + batch_size);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Tape tape(false);
    Tensor eps = SampleGaussian(rng, {idx.size(), p.z_dim()});
    auto terms = ElboLoss(tape, p, tape.Constant(Rows(px, idx)), tape.Constant(Rows(py, idx)),
                          eps, kl_weight);
    Accumulate(acc, terms.report);
    ++batches;
  }
  if (batches == 0) throw ContractError("validation set smaller than the minimum batch");
  Divide(acc, static_cast<double>(batches));
  return acc;
}

}  // namespace

CvaeParams TrainCvae(const DualEncoder& base, const EncodedPairs& train,
                     const EncodedPairs& validation, const CvaeConfig& config,
                     CvaeTrainingReport* report) {
  config.Validate();
  CvaeTrainingReport local;
  CvaeTrainingReport& rep = report ? *report : local;
  rep = CvaeTrainingReport{};

  // Frozen base: encodings are computed once and never differentiated.
  auto encode_all = [&](const std::vector<TokenIds>& seqs, Side side) {
    Tensor out = Tensor::Zeros(seqs.size(), base.config.output_dim());
    for (std::size_t start = 0; start < seqs.size(); start += 256) {
      const std::size_t end = std::min(seqs.size(), start + 256);
      Tensor block = EncodeBatch(base, side,
                                 std::span<const TokenIds>(seqs.data() + start, end - start));
      std::copy(block.data().begin(), block.data().end(),
                out.mutable_data().begin() +
                    static_cast<std::ptrdiff_t>(start * block.cols()));
    }
    return out;
  };
  const Tensor tx = encode_all(train.messages, Side::kMessage);
  const Tensor ty = encode_all(train.replies, Side::kReply);
  const Tensor vx = encode_all(validation.messages, Side::kMessage);
  const Tensor vy = encode_all(validation.replies, Side::kReply);
  if (tx.rows() < kMinBatchSize) throw ContractError("cvae training set too small");

  const std::size_t d = base.config.output_dim();
  const std::size_t hidden = config.hidden ? config.hidden : d;
  Rng rng(config.seed);
  CvaeParams params = CvaeParams::Init(d, config.z_dim, hidden, rng.Fork());
  const std::uint64_t val_seed = rng.Fork();
  CvaeParams best = params;
  Adadelta optimizer(config.adadelta);

  ElboReport v0 = Evaluate(params, vx, vy, config.batch_size, config.kl_weight, val_seed);
  rep.epochs.push_back({0, {}, v0, config.kl_weight, 0.0});
  rep.best_validation_loss = v0.total;
  spdlog::info("cvae epoch 0: validation loss {:.4f} (kl {:.4f})", v0.total, v0.kl);

  std::vector<std::size_t> order(tx.rows());
  std::iota(order.begin(), order.end(), 0);
  std::size_t global_step = 0;
  int low_kl_run = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng.engine());
    ElboReport acc;
    std::size_t steps = 0;
    float weight = config.kl_weight;
    auto named = params.NamedParameters();
    for (std::size_t start = 0; start + kMinBatchSize <= order.size();
         start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      weight = config.kl_weight;
      if (config.kl_anneal_steps > 0) {
        weight *= std::min(1.0f, static_cast<float>(global_step) /
                                     static_cast<float>(config.kl_anneal_steps));
      }
      Tape tape;
      try {
        Tensor eps = SampleGaussian(rng, {idx.size(), config.z_dim});
        auto terms = ElboLoss(tape, params, tape.Constant(Rows(tx, idx)),
                              tape.Constant(Rows(ty, idx)), eps, weight);
        tape.Backward(terms.loss);
        std::vector<Adadelta::Update> updates;
        for (auto& [name, p] : named) updates.push_back({p, &tape.ParamGrad(*p)});
        optimizer.Step(updates);
        Accumulate(acc, terms.report);
      } catch (const NumericError& e) {
        throw NumericError("cvae training diverged at epoch " + std::to_string(epoch) +
                           " step " + std::to_string(steps) + ": " + e.what());
      }
      ++steps;
      ++global_step;
    }
    Divide(acc, static_cast<double>(steps));
    ElboReport val = Evaluate(params, vx, vy, config.batch_size, config.kl_weight, val_seed);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.epochs.push_back({epoch, acc, val, weight, secs});
    spdlog::info("cvae epoch {}: train {:.4f} (kl {:.4f}) validation {:.4f} ({:.1f}s)", epoch,
                 acc.total, acc.kl, val.total, secs);
    if (val.total < rep.best_validation_loss) {
      rep.best_validation_loss = val.total;
      rep.best_epoch = epoch;
      best = params;
    }
    low_kl_run = acc.kl < kCollapseKl ? low_kl_run + 1 : 0;
    if (low_kl_run >= kCollapseEpochs && !rep.posterior_collapse) {
      rep.posterior_collapse = true;
      std::string msg = "posterior collapse: mean KL below " + std::to_string(kCollapseKl) +
                        " nats for " + std::to_string(kCollapseEpochs) +
                        " consecutive epochs (epoch " + std::to_string(epoch) + ")";
      spdlog::warn(msg);
      rep.warnings.push_back(msg);
    }
  }
  return best;
}

Tensor DecodeSamples(const CvaeParams& p, const Tensor& z, std::span<const float> phi_x) {
  const std::size_t s = z.rows(), zd = p.z_dim(), d = p.d();
  if (z.cols() != zd || phi_x.size() != d) {
    throw DimensionError("decode samples: z " + ShapeToString(z.shape()) + ", phi_x has " +
                         std::to_string(phi_x.size()) + " dims");
  }
  Tensor zx = Tensor::Zeros(s, zd + d);
  for (std::size_t r = 0; r < s; ++r) {
    auto row = zx.mutable_row(r);
    std::copy(z.row(r).begin(), z.row(r).end(), row.begin());
    std::copy(phi_x.begin(), phi_x.end(), row.begin() + static_cast<std::ptrdiff_t>(zd));
  }
  Tensor h = MatMul(zx, p.dec_w1);
  const std::size_t hd = h.cols();
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i] + p.dec_b1[i % hd]);
  Tensor out = MatMul(h, p.dec_w2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.dec_b2[i % d];
  return out;
}

#define SMARTREPLY_INSTANTIATE_CVAE(T)                                                   \
  template struct BasicCvaeParams<T>;                                                    \
  template Posterior<T> Recognize(BasicTape<T>&, const BasicCvaeParams<T>&, BasicVar<T>, \
                                  BasicVar<T>);                                          \
  template BasicVar<T> Reparameterize(BasicVar<T>, BasicVar<T>, BasicVar<T>);            \
  template BasicVar<T> Decode(BasicTape<T>&, const BasicCvaeParams<T>&, BasicVar<T>,     \
                              BasicVar<T>);                                              \
  template BasicVar<T> KlDivergence(BasicVar<T>, BasicVar<T>);                           \
  template ElboTerms<T> ElboFromDecoded(const Posterior<T>&, BasicVar<T>, BasicVar<T>,   \
                                        T);                                              \
  template ElboTerms<T> ElboLoss(BasicTape<T>&, const BasicCvaeParams<T>&, BasicVar<T>,  \
                                 BasicVar<T>, const BasicTensor<T>&, T);

SMARTREPLY_INSTANTIATE_CVAE(float)
SMARTREPLY_INSTANTIATE_CVAE(double)

#undef SMARTREPLY_INSTANTIATE_CVAE

template BasicCvaeParams<double> BasicCvaeParams<float>::Cast<double>() const;
template BasicCvaeParams<float> BasicCvaeParams<double>::Cast<float>() const;

}  // namespace smartreply
