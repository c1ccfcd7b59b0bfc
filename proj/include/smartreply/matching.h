#ifndef SMARTREPLY_MATCHING_H_
#define SMARTREPLY_MATCHING_H_

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "smartreply/corpus.h"
#include "smartreply/encoder.h"
#include "smartreply/optim.h"
#include "smartreply/tensor.h"

namespace smartreply {

// Symmetric in-batch losses are vacuous for a single pair; anything below
// this is rejected.
inline constexpr std::size_t kMinBatchSize = 8;

struct MatchingConfig {
  std::size_t batch_size = 64;
  int epochs = 4;
  AdadeltaConfig adadelta;
  std::uint64_t seed = 1;

  void Validate() const;
  nlohmann::json ToJson() const;
  static MatchingConfig FromJson(const nlohmann::json& j);
};

// Parallel id sequences; element i of each is one golden pair.
struct EncodedPairs {
  std::vector<TokenIds> messages;
  std::vector<TokenIds> replies;
  std::size_t size() const { return messages.size(); }
};

EncodedPairs EncodePairs(const Vocabulary& vocab, std::span<const MessageReplyPair> pairs);

struct EpochReport {
  int epoch = 0;              // 0 is the untrained model
  double train_loss = 0.0;    // mean over the epoch's batches
  double validation_loss = 0.0;
  double seconds = 0.0;
};

struct TrainingReport {
  std::vector<EpochReport> epochs;
  int best_epoch = 0;
  double best_validation_loss = 0.0;
  std::vector<std::string> warnings;
  nlohmann::json ToJson() const;
};

// Mean symmetric loss over consecutive batches of `batch_size` (a trailing
// batch smaller than kMinBatchSize is dropped), in inference mode.
double MatchingLoss(const DualEncoder& encoder, const EncodedPairs& data,
                    std::size_t batch_size);

// Adadelta over shuffled minibatches with in-batch negatives. Returns the
// parameters of the epoch with the lowest validation loss. A non-finite loss
// aborts with a NumericError naming the epoch and step.
DualEncoder TrainMatching(const DualEncoder& init, const EncodedPairs& train,
                          const EncodedPairs& validation, const MatchingConfig& config,
                          TrainingReport* report = nullptr);

struct MatchScores {
  std::vector<std::size_t> ids;  // descending raw score, ties to lower id
  std::vector<float> raw;        // dot + alpha * lm
  std::vector<float> softmax;    // over the retained k
};

// Raw scores for every response: responses [R x d] against one message.
std::vector<float> RawScores(std::span<const float> message, const Tensor& responses,
                             std::span<const float> lm_scores, float alpha);

// Top-k of the raw scores with a softmax over the survivors.
MatchScores TopK(std::span<const float> raw, std::size_t k);

MatchScores MatchScore(std::span<const float> message, const Tensor& responses,
                       std::span<const float> lm_scores, float alpha, std::size_t k);

}  // namespace smartreply

#endif  // SMARTREPLY_MATCHING_H_
