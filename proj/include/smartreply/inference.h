#ifndef SMARTREPLY_INFERENCE_H_
#define SMARTREPLY_INFERENCE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartreply/corpus.h"
#include "smartreply/diversify.h"
#include "smartreply/encoder.h"
#include "smartreply/mcvae.h"
#include "smartreply/response_lm.h"
#include "smartreply/rng.h"
#include "smartreply/tensor.h"

namespace smartreply {

// Fixed candidate replies with everything inference needs precomputed.
struct ResponseSetArtifact {
  std::vector<std::string> texts;
  std::vector<std::string> intents;  // majority reply-intent label, "" if unlabelled
  std::vector<float> frequencies;    // occurrences in the source corpus
  Tensor phi_y;                      // [R x d]
  std::vector<float> lm_scores;
  std::vector<std::int32_t> cluster_ids;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return texts.size(); }
  std::size_t dim() const { return phi_y.cols(); }
  // Checks array lengths agree and every vector is finite.
  void Validate() const;
};

struct ResponseSetOptions {
  std::size_t freq_top = 2000;
  std::size_t lm_top = 500;
};

// Frequency cut to freq_top (ties by text), then lm-score cut to lm_top
// (ties keep frequency order). Survivors keep frequency order, are encoded
// with the reply tower and lexically clustered. Cuts larger than what is
// available use everything and add a warning.
ResponseSetArtifact BuildResponseSet(std::span<const MessageReplyPair> corpus,
                                     const Vocabulary& vocab, const DualEncoder& encoder,
                                     const NgramLm& lm, const LexicalTables& tables,
                                     const ResponseSetOptions& options,
                                     std::vector<std::string>* warnings = nullptr);

enum class Ranker { kMatching, kMmr, kMcvae };
std::string ToString(Ranker r);
Ranker ParseRanker(const std::string& name);

struct PipelineConfig {
  float alpha = 0.1f;
  double beta = 0.5;
  std::size_t k = 15;         // pruning size
  std::size_t samples = 300;  // s
  bool use_mmr_preselect = false;
  // Sampling adds the lm score unweighted; set to weight it by alpha instead.
  bool alpha_in_sampling = false;
  bool dedupe = true;  // lexical-cluster de-duplication of the final list
  std::size_t top_n = 3;
  std::uint64_t seed = 7;

  void Validate() const;
  nlohmann::json ToJson() const;
  // Missing keys keep the values of `base`.
  static PipelineConfig FromJson(const nlohmann::json& j, const PipelineConfig& base);
  static PipelineConfig FromJson(const nlohmann::json& j);
};

struct VoteTally {
  std::vector<std::size_t> candidates;  // response ids, in candidate order
  std::vector<std::int64_t> votes;      // per candidate
  std::size_t samples = 0;

  std::int64_t total() const;
  // Votes keyed by response id, for candidates with at least one vote.
  std::map<std::size_t, std::int64_t> ByResponse() const;
};

struct SampleVoteTimings {
  double sample_us = 0.0;  // prior draws and batched decode
  double vote_us = 0.0;    // candidate scoring and per-row argmax
};

// Sample-score-vote over a pruned candidate set: s prior samples decoded in one batch,
// scored as decoded x candidates^T + lm_weight * lm, one vote per row for
// the argmax (ties to the lower candidate index).
VoteTally ConstrainedSampleVote(std::span<const float> phi_x, const Tensor& candidates,
                                std::span<const float> candidate_lm,
                                std::span<const std::size_t> candidate_ids,
                                const CvaeParams& cvae, std::size_t samples, Rng& rng,
                                float lm_weight = 1.0f,
                                SampleVoteTimings* timings = nullptr);

struct StageTimings {
  double encode_us = 0.0;
  double score_us = 0.0;
  double preselect_us = 0.0;
  double sample_us = 0.0;
  double vote_us = 0.0;
  double dedup_us = 0.0;
  double total_us = 0.0;

  double sample_vote_us() const { return sample_us + vote_us; }
  nlohmann::json ToJson() const;
};

struct Suggestion {
  std::size_t id = 0;
  std::string text;
  float score = 0.0f;  // raw matching score
  std::optional<double> mmr;
  std::optional<std::int64_t> votes;
  std::int32_t cluster = 0;
  std::string intent;
};

struct SuggestionResult {
  Ranker ranker = Ranker::kMatching;
  std::vector<Suggestion> suggestions;
  // Full ranked candidate list before de-duplication (response ids).
  std::vector<std::size_t> ranked;
  StageTimings timings;
  std::vector<std::string> warnings;

  nlohmann::json ToJson() const;
};

// Everything a suggestion request reads. Immutable once loaded, so it can
// be shared by concurrent requests.
struct SuggestionModels {
  Vocabulary vocab;
  DualEncoder encoder;
  ResponseSetArtifact artifact;
  std::optional<CvaeParams> cvae;
};

// Message encoding; empty messages (no tokens) are a ContractError.
Tensor EncodeMessage(const SuggestionModels& models, std::string_view message);

SuggestionResult SuggestMatching(const SuggestionModels& models, std::string_view message,
                                 const PipelineConfig& config);
SuggestionResult SuggestMmr(const SuggestionModels& models, std::string_view message,
                            const PipelineConfig& config);
SuggestionResult SuggestMcvae(const SuggestionModels& models, std::string_view message,
                              const PipelineConfig& config);
SuggestionResult Suggest(const SuggestionModels& models, std::string_view message,
                         Ranker ranker, const PipelineConfig& config);

// M-CVAE sampling over the whole response set with no matching pruning;
// the reference point for the constrained-sampling speedup.
SuggestionResult SuggestMcvaeUnconstrained(const SuggestionModels& models,
                                           std::string_view message,
                                           const PipelineConfig& config);

struct CostReport {
  std::uint64_t unconstrained_scoring = 0;  // d * R * s
  std::uint64_t constrained_scoring = 0;    // d * K * s
  std::uint64_t decoder = 0;                // s * ((z + d) * hidden + hidden * d)
  double scoring_ratio = 0.0;               // R / K
  double total_ratio = 0.0;                 // including the decoder

  nlohmann::json ToJson() const;
};

CostReport CountMultiplications(std::size_t r, std::size_t k, std::size_t samples,
                                std::size_t d, std::size_t z_dim, std::size_t hidden);

}  // namespace smartreply

#endif  // SMARTREPLY_INFERENCE_H_
