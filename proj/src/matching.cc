#include "smartreply/matching.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "smartreply/autodiff.h"
#include "smartreply/error.h"
#include "smartreply/rng.h"

namespace smartreply {

void MatchingConfig::Validate() const {
  if (batch_size < kMinBatchSize) {
    throw ContractError("batch_size " + std::to_string(batch_size) +
                        " is below the minimum of " + std::to_string(kMinBatchSize) +
                        "; the symmetric loss is vacuous for tiny batches");
  }
  if (epochs < 0) throw ContractError("epochs must be >= 0");
}

nlohmann::json MatchingConfig::ToJson() const {
  return {{"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"rho", adadelta.rho},
          {"epsilon", adadelta.epsilon},
          {"learning_rate", adadelta.learning_rate},
          {"clip_norm", adadelta.clip_norm}};
}

MatchingConfig MatchingConfig::FromJson(const nlohmann::json& j) {
  MatchingConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.adadelta.rho = j.value("rho", c.adadelta.rho);
  c.adadelta.epsilon = j.value("epsilon", c.adadelta.epsilon);
  c.adadelta.learning_rate = j.value("learning_rate", c.adadelta.learning_rate);
  c.adadelta.clip_norm = j.value("clip_norm", c.adadelta.clip_norm);
  return c;
}

nlohmann::json TrainingReport::ToJson() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"validation_loss", e.validation_loss},
                    {"seconds", e.seconds}});
  }
  return {{"epochs", rows},
          {"best_epoch", best_epoch},
          {"best_validation_loss", best_validation_loss},
          {"warnings", warnings}};
}

EncodedPairs EncodePairs(const Vocabulary& vocab, std::span<const MessageReplyPair> pairs) {
  EncodedPairs out;
  out.messages.reserve(pairs.size());
  out.replies.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.messages.push_back(vocab.Encode(p.message));
    out.replies.push_back(vocab.Encode(p.reply));
  }
  return out;
}

namespace {

template <typename Fn>
void ForEachBatch(const std::vector<std::size_t>& order, std::size_t batch_size, Fn&& fn) {
  for (std::size_t start = 0; start + kMinBatchSize <= order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    fn(std::span<const std::size_t>(order.data() + start, end - start));
  }
}

std::vector<TokenIds> Gather(const std::vector<TokenIds>& src,
                             std::span<const std::size_t> idx) {
  std::vector<TokenIds> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(src[i]);
  return out;
}

}  // namespace

double MatchingLoss(const DualEncoder& encoder, const EncodedPairs& data,
                    std::size_t batch_size) {
  if (batch_size < kMinBatchSize) throw ContractError("batch_size below minimum");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  std::size_t batches = 0;
  ForEachBatch(order, batch_size, [&](std::span<const std::size_t> idx) {
    Tensor px = EncodeBatch(encoder, Side::kMessage, Gather(data.messages, idx));
    Tensor py = EncodeBatch(encoder, Side::kReply, Gather(data.replies, idx));
    total += ad::SymmetricNllValue(MatMulTransB(px, py));
    ++batches;
  });
  if (batches == 0) {
    throw ContractError("need at least " + std::to_string(kMinBatchSize) +
                        " pairs to evaluate the matching loss");
  }
  return total / static_cast<double>(batches);
}

DualEncoder TrainMatching(const DualEncoder& init, const EncodedPairs& train,
                          const EncodedPairs& validation, const MatchingConfig& config,
                          TrainingReport* report) {
  config.Validate();
  if (train.size() < kMinBatchSize) {
    throw ContractError("training set smaller than the minimum batch size");
  }
  TrainingReport local;
  TrainingReport& rep = report ? *report : local;
  rep = TrainingReport{};

  DualEncoder model = init;
  DualEncoder best = init;
  Adadelta optimizer(config.adadelta);
  Rng rng(config.seed);

  auto t0 = std::chrono::steady_clock::now();
  double v0 = MatchingLoss(model, validation, config.batch_size);
  rep.epochs.push_back({0, 0.0, v0, 0.0});
  rep.best_epoch = 0;
  rep.best_validation_loss = v0;
  spdlog::info("matching epoch 0: validation loss {:.4f}", v0);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0.0;
    std::size_t step = 0;
    auto named = model.NamedParameters();
    ForEachBatch(order, config.batch_size, [&](std::span<const std::size_t> idx) {
      Tape tape;
      try {
        Var px = EncodeBatch(tape, model, Side::kMessage, Gather(train.messages, idx), &rng);
        Var py = EncodeBatch(tape, model, Side::kReply, Gather(train.replies, idx), &rng);
        Var loss = ad::SymmetricNll(ad::MatMul(px, ad::Transpose(py)));
        tape.Backward(loss);
        std::vector<Adadelta::Update> updates;
        for (auto& [name, p] : named) updates.push_back({p, &tape.ParamGrad(*p)});
        optimizer.Step(updates);
        total += loss.value()[0];
      } catch (const NumericError& e) {
        throw NumericError("matching training diverged at epoch " + std::to_string(epoch) +
                           " step " + std::to_string(step) + ": " + e.what());
      }
      ++step;
    });
    const double val = MatchingLoss(model, validation, config.batch_size);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.epochs.push_back({epoch, step ? total / static_cast<double>(step) : 0.0, val, secs});
    spdlog::info("matching epoch {}: train {:.4f} validation {:.4f} ({:.1f}s)", epoch,
                 rep.epochs.back().train_loss, val, secs);
    if (val < rep.best_validation_loss) {
      rep.best_validation_loss = val;
      rep.best_epoch = epoch;
      best = model;
    }
  }
  return best;
}

std::vector<float> RawScores(std::span<const float> message, const Tensor& responses,
                             std::span<const float> lm_scores, float alpha) {
  if (message.size() != responses.cols()) {
    throw DimensionError("message vector has " + std::to_string(message.size()) +
                         " dims, responses are " + ShapeToString(responses.shape()));
  }
  if (lm_scores.size() != responses.rows()) {
    throw DimensionError("lm score count differs from response count");
  }
  if (alpha < 0.0f) throw ContractError("alpha must be >= 0");
  Tensor m(Shape{1, message.size()}, std::vector<float>(message.begin(), message.end()));
  Tensor dots = MatMulTransB(m, responses);
  std::vector<float> raw(dots.vec());
  for (std::size_t r = 0; r < raw.size(); ++r) raw[r] += alpha * lm_scores[r];
  return raw;
}

MatchScores TopK(std::span<const float> raw, std::size_t k) {
  if (k == 0 || k > raw.size()) {
    throw ContractError("k = " + std::to_string(k) + " must lie in [1, " +
                        std::to_string(raw.size()) + "]");
  }
  std::vector<std::size_t> ids(raw.size());
  std::iota(ids.begin(), ids.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) {
    return raw[a] != raw[b] ? raw[a] > raw[b] : a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    better);
  ids.resize(k);
  MatchScores out;
  out.ids = ids;
  double mx = raw[ids[0]];
  double z = 0.0;
  for (std::size_t id : ids) {
    out.raw.push_back(raw[id]);
    z += std::exp(static_cast<double>(raw[id]) - mx);
  }
  for (float r : out.raw) {
    out.softmax.push_back(static_cast<float>(std::exp(static_cast<double>(r) - mx) / z));
  }
  return out;
}

MatchScores MatchScore(std::span<const float> message, const Tensor& responses,
                       std::span<const float> lm_scores, float alpha, std::size_t k) {
  if (k > responses.rows()) {
    throw ContractError("k = " + std::to_string(k) + " exceeds the response set size " +
                        std::to_string(responses.rows()));
  }
  return TopK(RawScores(message, responses, lm_scores, alpha), k);
}

}  // namespace smartreply
