#ifndef SMARTREPLY_STAGES_H_
#define SMARTREPLY_STAGES_H_

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartreply/bench.h"
#include "smartreply/eval.h"
#include "smartreply/lifecycle.h"

namespace smartreply {

// Lifecycle stages over a run directory. Each stage reads what earlier
// stages wrote there and writes its own outputs next to them:
//   train.tsv validation.tsv synthetic.json   gen-corpus
//   matching.srm matching_report.json         train-matching
//   lm.srm                                    train-lm
//   response_set/                             build-response-set
//   cvae.srm cvae_report.json                 train-cvae
//   eval.json                                 eval
//   bench.json                                bench
inline constexpr const char* kTrainTsv = "train.tsv";
inline constexpr const char* kValidationTsv = "validation.tsv";
inline constexpr const char* kSyntheticCopy = "synthetic.json";

// `synthetic_json` empty means the shipped intents; it is copied into the
// run so later stages use the same compatibility table.
void GenerateCorpusStage(const SystemConfig& config, const std::string& synthetic_json,
                         const std::filesystem::path& run);
Split LoadSplit(const std::filesystem::path& run);
// The synthetic config saved by gen-corpus, or the shipped default.
SyntheticConfig LoadRunSynthetic(const std::filesystem::path& run);

TrainingReport TrainMatchingToRun(const SystemConfig& config, const std::filesystem::path& run);
void TrainLmToRun(const SystemConfig& config, const std::filesystem::path& run);
std::vector<std::string> BuildResponseSetToRun(const SystemConfig& config,
                                               const LexicalTables& tables,
                                               const std::filesystem::path& run);
CvaeTrainingReport TrainCvaeToRun(const SystemConfig& config, const std::filesystem::path& run);

EvalReport EvaluateRun(const SystemConfig& config, const std::filesystem::path& run,
                       const std::string& rankers);
BenchReport BenchRun(const SystemConfig& config, const std::filesystem::path& run,
                     const BenchConfig& bench);

// Combined hash of the model files present in `run`.
std::string RunModelHash(const std::filesystem::path& run);

void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace smartreply

#endif  // SMARTREPLY_STAGES_H_
