#include "smartreply/stages.h"

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "embedded_data.h"
#include "smartreply/error.h"
#include "smartreply/model_io.h"

namespace smartreply {

namespace fs = std::filesystem;

namespace {

void RequireFile(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) {
    throw IoError(path.string() + " not found; run '" + stage + "' first");
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  WriteFileBytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

void WriteJsonFile(const fs::path& path, const nlohmann::json& j) {
  WriteText(path, j.dump(2) + "\n");
}

void GenerateCorpusStage(const SystemConfig& config, const std::string& synthetic_json,
                         const fs::path& run) {
  const std::string text = synthetic_json.empty() ? embedded::SyntheticIntentsJson() : synthetic_json;
  SyntheticConfig synthetic = SyntheticConfig::FromJson(text);
  auto corpus = GenerateSynthetic(synthetic, config.pairs, config.seed);
  Split split = SplitPairs(corpus, config.validation_fraction, config.seed * 1000 + 4);
  fs::create_directories(run);
  WritePairsTsv(run / kTrainTsv, split.train);
  WritePairsTsv(run / kValidationTsv, split.validation);
  WriteText(run / kSyntheticCopy, text);
  spdlog::info("wrote {} train / {} validation pairs to {}", split.train.size(),
               split.validation.size(), run.string());
}

Split LoadSplit(const fs::path& run) {
  RequireFile(run / kTrainTsv, "gen-corpus");
  RequireFile(run / kValidationTsv, "gen-corpus");
  return {ReadPairsTsv(run / kTrainTsv), ReadPairsTsv(run / kValidationTsv)};
}

SyntheticConfig LoadRunSynthetic(const fs::path& run) {
  if (fs::exists(run / kSyntheticCopy)) return SyntheticConfig::Load(run / kSyntheticCopy);
  return SyntheticConfig::Default();
}

TrainingReport TrainMatchingToRun(const SystemConfig& config, const fs::path& run) {
  Split split = LoadSplit(run);
  Vocabulary vocab = BuildVocabulary(split.train, config.min_frequency);
  TrainingReport report;
  DualEncoder encoder = TrainMatchingStage(config, vocab, split, &report);
  SaveMatching(run / kMatchingFile, vocab, encoder);
  WriteJsonFile(run / "matching_report.json", report.ToJson());
  return report;
}

void TrainLmToRun(const SystemConfig& config, const fs::path& run) {
  Split split = LoadSplit(run);
  SaveLm(run / kLmFile, TrainLmStage(config, split.train));
}

std::vector<std::string> BuildResponseSetToRun(const SystemConfig& config,
                                               const LexicalTables& tables, const fs::path& run) {
  Split split = LoadSplit(run);
  RequireFile(run / kMatchingFile, "train-matching");
  RequireFile(run / kLmFile, "train-lm");
  Vocabulary vocab;
  DualEncoder encoder;
  LoadMatching(run / kMatchingFile, &vocab, &encoder);
  NgramLm lm = LoadLm(run / kLmFile);
  std::vector<std::string> warnings;
  ResponseSetArtifact artifact =
      BuildResponseSet(split.train, vocab, encoder, lm, tables, config.response_set, &warnings);
  artifact.metadata["matching_hash"] = FileHash(run / kMatchingFile);
  SaveResponseSet(run / kResponseSetDir, artifact);
  return warnings;
}

CvaeTrainingReport TrainCvaeToRun(const SystemConfig& config, const fs::path& run) {
  Split split = LoadSplit(run);
  RequireFile(run / kMatchingFile, "train-matching");
  Vocabulary vocab;
  DualEncoder encoder;
  LoadMatching(run / kMatchingFile, &vocab, &encoder);
  CvaeTrainingReport report;
  CvaeParams params = TrainCvae(encoder, EncodePairs(vocab, split.train),
                                EncodePairs(vocab, split.validation), config.cvae, &report);
  SaveCvae(run / kCvaeFile, params, config.cvae, FileHash(run / kMatchingFile));
  WriteJsonFile(run / "cvae_report.json", report.ToJson());
  return report;
}

EvalReport EvaluateRun(const SystemConfig& config, const fs::path& run,
                       const std::string& rankers) {
  Split split = LoadSplit(run);
  SuggestionModels models = LoadSuggestionModels(run);
  auto messages = SelectEvalMessages(split.validation, config.eval_messages);
  auto specs = ParseRankerList(rankers);
  return Evaluate(models, messages, LoadRunSynthetic(run).Compatibility(), specs, config.pipeline);
}

BenchReport BenchRun(const SystemConfig& config, const fs::path& run, const BenchConfig& bench) {
  Split split = LoadSplit(run);
  SuggestionModels models = LoadSuggestionModels(run);
  std::vector<std::string> messages;
  for (const auto& m : SelectEvalMessages(split.validation, bench.queries)) {
    messages.push_back(m.text);
  }
  return RunBench(models, messages, config.pipeline, bench);
}

std::string RunModelHash(const fs::path& run) {
  std::string joined;
  for (fs::path p : {run / kMatchingFile, run / kResponseSetDir / kResponseSetFile,
                     run / kResponseSetDir / kResponseManifest, run / kCvaeFile}) {
    joined += fs::exists(p) ? FileHash(p) : std::string("-");
  }
  const std::uint32_t crc =
      Crc32(std::span(reinterpret_cast<const std::uint8_t*>(joined.data()), joined.size()));
  std::ostringstream out;
  out << std::hex;
  out.width(8);
  out.fill('0');
  out << crc;
  return out.str();
}

}  // namespace smartreply
