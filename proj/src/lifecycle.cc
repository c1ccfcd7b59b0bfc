#include "smartreply/lifecycle.h"

#include <fstream>

#include <spdlog/spdlog.h>

#include "smartreply/error.h"

namespace smartreply {

SystemConfig SystemConfig::WithSeed(std::uint64_t s) const {
  SystemConfig c = *this;
  c.seed = s;
  c.matching.seed = s * 1000 + 2;
  c.cvae.seed = s * 1000 + 3;
  return c;
}

void SystemConfig::Validate() const {
  if (pairs < 100) throw ContractError("pairs must be at least 100");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ContractError("validation_fraction must lie in (0, 1)");
  }
  if (min_frequency < 1) throw ContractError("min_frequency must be >= 1");
  matching.Validate();
  cvae.Validate();
  pipeline.Validate();
}

nlohmann::json SystemConfig::ToJson() const {
  nlohmann::json enc = encoder.ToJson();
  enc.erase("vocab_size");
  return {{"corpus",
           {{"pairs", pairs},
            {"validation_fraction", validation_fraction},
            {"min_frequency", min_frequency},
            {"eval_messages", eval_messages}}},
          {"seed", seed},
          {"encoder", enc},
          {"matching", matching.ToJson()},
          {"lm",
           {{"order", lm.order},
            {"discount", lm.discount},
            {"normalize", ToString(lm.normalize)}}},
          {"response_set", {{"freq_top", response_set.freq_top}, {"lm_top", response_set.lm_top}}},
          {"cvae", cvae.ToJson()},
          {"pipeline", pipeline.ToJson()}};
}

SystemConfig SystemConfig::FromJson(const nlohmann::json& j) {
  SystemConfig c;
  try {
    if (j.contains("corpus")) {
      const auto& k = j["corpus"];
      c.pairs = k.value("pairs", c.pairs);
      c.validation_fraction = k.value("validation_fraction", c.validation_fraction);
      c.min_frequency = k.value("min_frequency", c.min_frequency);
      c.eval_messages = k.value("eval_messages", c.eval_messages);
    }
    if (j.contains("encoder")) {
      nlohmann::json enc = j["encoder"];
      enc["vocab_size"] = 0;
      c.encoder = EncoderConfig::FromJson(enc);
    }
    if (j.contains("matching")) c.matching = MatchingConfig::FromJson(j["matching"]);
    if (j.contains("lm")) {
      const auto& l = j["lm"];
      c.lm.order = l.value("order", c.lm.order);
      c.lm.discount = l.value("discount", c.lm.discount);
      if (l.contains("normalize")) c.lm.normalize = ParseLmNormalize(l["normalize"]);
    }
    if (j.contains("response_set")) {
      const auto& r = j["response_set"];
      c.response_set.freq_top = r.value("freq_top", c.response_set.freq_top);
      c.response_set.lm_top = r.value("lm_top", c.response_set.lm_top);
    }
    if (j.contains("cvae")) c.cvae = CvaeConfig::FromJson(j["cvae"]);
    if (j.contains("pipeline")) c.pipeline = PipelineConfig::FromJson(j["pipeline"]);
    // A top-level seed re-derives the stage seeds unless a stage pins its own.
    if (j.contains("seed")) {
      SystemConfig seeded = c.WithSeed(j["seed"].get<std::uint64_t>());
      if (j.contains("matching") && j["matching"].contains("seed")) {
        seeded.matching.seed = c.matching.seed;
      }
      if (j.contains("cvae") && j["cvae"].contains("seed")) seeded.cvae.seed = c.cvae.seed;
      c = seeded;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("system config: ") + e.what());
  }
  c.Validate();
  return c;
}

SystemConfig SystemConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return FromJson(j);
}

Vocabulary BuildVocabulary(std::span<const MessageReplyPair> train, std::int64_t min_frequency) {
  return Vocabulary::Build(train, min_frequency);
}

DualEncoder TrainMatchingStage(const SystemConfig& config, const Vocabulary& vocab,
                               const Split& split, TrainingReport* report) {
  EncoderConfig ec = config.encoder;
  ec.vocab_size = vocab.size();
  DualEncoder init = DualEncoder::Init(ec, config.seed * 1000 + 1);
  return TrainMatching(init, EncodePairs(vocab, split.train), EncodePairs(vocab, split.validation),
                       config.matching, report);
}

NgramLm TrainLmStage(const SystemConfig& config, std::span<const MessageReplyPair> train) {
  std::vector<Tokens> replies;
  replies.reserve(train.size());
  for (const auto& p : train) replies.push_back(p.reply);
  return NgramLm::Train(replies, config.lm);
}

TrainedSystem TrainSystem(const SystemConfig& config, const SyntheticConfig& synthetic,
                          const LexicalTables& tables) {
  config.Validate();
  TrainedSystem sys;
  auto corpus = GenerateSynthetic(synthetic, config.pairs, config.seed);
  sys.split = SplitPairs(corpus, config.validation_fraction, config.seed * 1000 + 4);
  spdlog::info("corpus: {} train / {} validation pairs", sys.split.train.size(),
               sys.split.validation.size());
  sys.models.vocab = BuildVocabulary(sys.split.train, config.min_frequency);
  sys.models.encoder =
      TrainMatchingStage(config, sys.models.vocab, sys.split, &sys.matching_report);
  sys.lm = TrainLmStage(config, sys.split.train);
  sys.models.artifact =
      BuildResponseSet(sys.split.train, sys.models.vocab, sys.models.encoder, sys.lm, tables,
                       config.response_set, &sys.warnings);
  sys.models.cvae = TrainCvae(sys.models.encoder, EncodePairs(sys.models.vocab, sys.split.train),
                              EncodePairs(sys.models.vocab, sys.split.validation), config.cvae,
                              &sys.cvae_report);
  for (const auto& w : sys.matching_report.warnings) sys.warnings.push_back(w);
  for (const auto& w : sys.cvae_report.warnings) sys.warnings.push_back(w);
  return sys;
}

}  // namespace smartreply
