#ifndef SMARTREPLY_EVAL_H_
#define SMARTREPLY_EVAL_H_

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartreply/corpus.h"
#include "smartreply/inference.h"

namespace smartreply {

// A ranker plus the knobs that distinguish the compared systems.
struct RankerSpec {
  std::string name;
  Ranker ranker = Ranker::kMatching;
  bool dedupe = true;
  bool mmr_preselect = false;
};

// matching, matching-nolc, mmr, mmr-nolc, mcvae, mcvae-nolc, mcvae-mmr.
RankerSpec ParseRankerSpec(const std::string& name);
std::vector<RankerSpec> ParseRankerList(const std::string& comma_separated);

struct EvalMessage {
  std::string text;
  std::string intent;
};

// First `limit` distinct held-out messages, in corpus order.
std::vector<EvalMessage> SelectEvalMessages(std::span<const MessageReplyPair> held_out,
                                            std::size_t limit);

// Per-list judgements behind the proxies.
bool IsDuplicateList(std::span<const Suggestion> top, const ResponseSetArtifact& artifact);
bool IsDefect(std::span<const Suggestion> top, const std::string& message_intent,
              const std::map<std::string, std::vector<std::string>>& compatibility);
std::size_t DistinctIntents(std::span<const Suggestion> top);

struct EvalRow {
  std::string ranker;
  std::size_t messages = 0;
  double duplicate_rate = 0.0;
  double defect_rate = 0.0;
  double intent_coverage = 0.0;
  // Against the baseline row (the first ranker).
  double duplicate_change = 0.0;  // relative, (x - b) / b
  double defect_change = 0.0;     // relative
  double defect_delta = 0.0;      // absolute difference
  double coverage_change = 0.0;   // relative
};

struct EvalReport {
  std::string baseline;
  std::vector<EvalRow> rows;
  nlohmann::json pipeline;

  const EvalRow& Row(const std::string& ranker) const;
  nlohmann::json ToJson() const;
};

EvalReport Evaluate(const SuggestionModels& models, std::span<const EvalMessage> messages,
                    const std::map<std::string, std::vector<std::string>>& compatibility,
                    std::span<const RankerSpec> rankers, const PipelineConfig& config);

// Applies a ranker's knobs on top of a base pipeline config.
PipelineConfig ConfigFor(const RankerSpec& spec, const PipelineConfig& base);

}  // namespace smartreply

#endif  // SMARTREPLY_EVAL_H_
