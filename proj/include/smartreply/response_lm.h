#ifndef SMARTREPLY_RESPONSE_LM_H_
#define SMARTREPLY_RESPONSE_LM_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "smartreply/corpus.h"
#include "smartreply/tensor.h"

namespace smartreply {

enum class LmNormalize { kMean, kSum };

std::string ToString(LmNormalize n);
LmNormalize ParseLmNormalize(const std::string& name);

struct NgramLmConfig {
  int order = 3;
  double discount = 0.75;
  LmNormalize normalize = LmNormalize::kMean;
};

// Interpolated Kneser-Ney n-gram model over reply token sequences. Sentences
// are padded with order-1 "<s>" markers and closed with "</s>". Every order
// interpolates down to a uniform floor over the model vocabulary (all
// training tokens plus "</s>" and "<unk>"), so no probability is zero.
class NgramLm {
 public:
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kEos = "</s>";
  static constexpr const char* kUnk = "<unk>";

  static NgramLm Train(std::span<const Tokens> sentences, NgramLmConfig config = {});

  // Rebuilds from the highest-order count table; every lower-order
  // statistic is derived from it. `ngrams` rows are (ids..., count).
  static NgramLm FromCounts(NgramLmConfig config, std::vector<std::string> vocabulary,
                            const Tensor& ngrams);

  // P(token | context); only the last order-1 context tokens matter and
  // missing history is padded with "<s>".
  double Probability(std::span<const std::string> context, const std::string& token) const;
  // Full next-token distribution in vocabulary order.
  std::vector<double> Distribution(std::span<const std::string> context) const;

  // Mean (or summed) natural-log probability of the tokens plus "</s>".
  double Score(std::span<const std::string> tokens) const;
  double SumLogProb(std::span<const std::string> tokens) const;
  // exp(-total log prob / total predicted tokens) over a held-out set.
  double Perplexity(std::span<const Tokens> sentences) const;

  const NgramLmConfig& config() const { return config_; }
  // Predictable vocabulary ("<s>" is excluded; it is never predicted).
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  // Highest-order (ids..., count) table as persisted.
  Tensor CountTable() const;

 private:
  using Key = std::vector<std::int32_t>;
  struct ContextStats {
    double total = 0.0;           // sum of (continuation) counts after context
    double distinct = 0.0;        // number of distinct followers
    std::map<std::int32_t, double> counts;
  };

  void Derive();
  std::int32_t Id(const std::string& surface) const;
  double ProbabilityIds(const std::int32_t* history, std::size_t history_len,
                        std::int32_t token) const;

  NgramLmConfig config_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::int32_t> ids_;
  std::int32_t bos_id_ = -1;
  std::int32_t unk_id_ = -1;
  std::int32_t eos_id_ = -1;
  std::map<Key, double> top_counts_;
  // stats_[k] is keyed by contexts of length k (order k+1).
  std::vector<std::map<Key, ContextStats>> stats_;
};

}  // namespace smartreply

#endif  // SMARTREPLY_RESPONSE_LM_H_
