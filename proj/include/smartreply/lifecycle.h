#ifndef SMARTREPLY_LIFECYCLE_H_
#define SMARTREPLY_LIFECYCLE_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartreply/corpus.h"
#include "smartreply/diversify.h"
#include "smartreply/encoder.h"
#include "smartreply/inference.h"
#include "smartreply/matching.h"
#include "smartreply/mcvae.h"
#include "smartreply/response_lm.h"

namespace smartreply {

// One JSON document drives the whole desk-scale run. Every stage also
// reads its own block, so the CLI subcommands share this file.
struct SystemConfig {
  std::int64_t pairs = 50000;
  double validation_fraction = 0.1;
  std::int64_t min_frequency = 2;
  std::uint64_t seed = 1;
  EncoderConfig encoder;  // vocab_size is filled in from the corpus
  MatchingConfig matching;
  NgramLmConfig lm;
  ResponseSetOptions response_set;
  CvaeConfig cvae;
  PipelineConfig pipeline;
  std::size_t eval_messages = 500;

  // Re-derives every stage seed from `seed` so one number selects a run.
  SystemConfig WithSeed(std::uint64_t s) const;
  void Validate() const;
  nlohmann::json ToJson() const;
  static SystemConfig FromJson(const nlohmann::json& j);
  static SystemConfig Load(const std::filesystem::path& path);
};

struct TrainedSystem {
  Split split;
  NgramLm lm;
  SuggestionModels models;
  TrainingReport matching_report;
  CvaeTrainingReport cvae_report;
  std::vector<std::string> warnings;
};

// Stage helpers; TrainSystem chains them.
Vocabulary BuildVocabulary(std::span<const MessageReplyPair> train, std::int64_t min_frequency);
DualEncoder TrainMatchingStage(const SystemConfig& config, const Vocabulary& vocab,
                               const Split& split, TrainingReport* report);
NgramLm TrainLmStage(const SystemConfig& config, std::span<const MessageReplyPair> train);

TrainedSystem TrainSystem(const SystemConfig& config, const SyntheticConfig& synthetic,
                          const LexicalTables& tables);

}  // namespace smartreply

#endif  // SMARTREPLY_LIFECYCLE_H_
