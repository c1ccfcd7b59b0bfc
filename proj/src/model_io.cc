#include "smartreply/model_io.h"

#include <fstream>

#include "smartreply/error.h"

namespace smartreply {

namespace {

void CheckKind(const ModelContainer& c, const std::string& kind,
               const std::filesystem::path& path) {
  if (c.metadata.value("kind", std::string()) != kind) {
    throw IoError(path.string() + " is not a " + kind + " container");
  }
}

template <typename Named>
void FillParameters(const ModelContainer& c, Named named, const std::filesystem::path& path) {
  for (auto& [name, tensor] : named) {
    Tensor t = c.GetTensor(name);
    if (t.shape() != tensor->shape()) {
      throw IoError(path.string() + ": section '" + name + "' has shape " +
                    ShapeToString(t.shape()) + ", config expects " +
                    ShapeToString(tensor->shape()));
    }
    *tensor = std::move(t);
  }
}

ReadOptions RequireAll(std::vector<std::string> names) {
  ReadOptions o;
  o.required = std::move(names);
  o.reject_unknown = true;
  return o;
}

}  // namespace

ModelContainer MatchingToContainer(const Vocabulary& vocab, const DualEncoder& encoder) {
  ModelContainer c;
  c.metadata = {{"kind", "matching"},
                {"encoder", encoder.config.ToJson()},
                {"vocabulary", vocab.surfaces()},
                {"min_frequency", vocab.min_frequency()}};
  for (const auto& [name, t] : encoder.NamedParameters()) c.PutTensor(name, *t);
  return c;
}

void SaveMatching(const std::filesystem::path& path, const Vocabulary& vocab,
                  const DualEncoder& encoder) {
  MatchingToContainer(vocab, encoder).Save(path);
}

void LoadMatching(const std::filesystem::path& path, Vocabulary* vocab, DualEncoder* encoder) {
  const auto bytes = ReadFileBytes(path);
  ModelContainer probe = ModelContainer::Deserialize(bytes);
  CheckKind(probe, "matching", path);
  EncoderConfig config;
  Vocabulary v;
  try {
    config = EncoderConfig::FromJson(probe.metadata.at("encoder"));
    v = Vocabulary::FromSurfaces(probe.metadata.at("vocabulary").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad matching metadata: " + e.what());
  }
  config.Validate();
  if (config.vocab_size != v.size()) {
    throw IoError(path.string() + ": vocabulary size disagrees with the encoder config");
  }
  DualEncoder enc = DualEncoder::Init(config, 0);
  std::vector<std::string> names;
  for (const auto& [name, t] : enc.NamedParameters()) names.push_back(name);
  ModelContainer c = ModelContainer::Deserialize(bytes, RequireAll(names));
  FillParameters(c, enc.NamedParameters(), path);
  if (vocab) *vocab = std::move(v);
  if (encoder) *encoder = std::move(enc);
}

void SaveLm(const std::filesystem::path& path, const NgramLm& lm) {
  ModelContainer c;
  c.metadata = {{"kind", "lm"},
                {"order", lm.config().order},
                {"discount", lm.config().discount},
                {"normalize", ToString(lm.config().normalize)},
                {"vocabulary", lm.vocabulary()}};
  c.PutTensor("lm.counts", lm.CountTable());
  c.Save(path);
}

NgramLm LoadLm(const std::filesystem::path& path) {
  ModelContainer c = ModelContainer::Load(path, RequireAll({"lm.counts"}));
  CheckKind(c, "lm", path);
  NgramLmConfig config;
  std::vector<std::string> vocab;
  try {
    config.order = c.metadata.at("order").get<int>();
    config.discount = c.metadata.at("discount").get<double>();
    config.normalize = ParseLmNormalize(c.metadata.at("normalize").get<std::string>());
    vocab = c.metadata.at("vocabulary").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad lm metadata: " + e.what());
  }
  return NgramLm::FromCounts(config, std::move(vocab), c.GetTensor("lm.counts"));
}

void SaveCvae(const std::filesystem::path& path, const CvaeParams& params, const CvaeConfig& config,
              const std::string& base_hash) {
  ModelContainer c;
  c.metadata = {{"kind", "cvae"},
                {"config", config.ToJson()},
                {"d", params.d()},
                {"z_dim", params.z_dim()},
                {"hidden", params.hidden()},
                {"base_hash", base_hash}};
  for (const auto& [name, t] : params.NamedParameters()) c.PutTensor(name, *t);
  c.Save(path);
}

CvaeParams LoadCvae(const std::filesystem::path& path, std::string* base_hash) {
  CvaeParams p;
  std::vector<std::string> names;
  for (const auto& [name, t] : p.NamedParameters()) names.push_back(name);
  ModelContainer c = ModelContainer::Load(path, RequireAll(names));
  CheckKind(c, "cvae", path);
  std::size_t d = 0, z = 0, h = 0;
  try {
    d = c.metadata.at("d").get<std::size_t>();
    z = c.metadata.at("z_dim").get<std::size_t>();
    h = c.metadata.at("hidden").get<std::size_t>();
    if (base_hash) *base_hash = c.metadata.value("base_hash", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad cvae metadata: " + e.what());
  }
  p = CvaeParams::Zeros(d, z, h);
  FillParameters(c, p.NamedParameters(), path);
  return p;
}

ReadOptions ResponseSetReadOptions(std::size_t rows) {
  ReadOptions o;
  o.required = {"phi_y", "lm_scores", "cluster_ids"};
  Section freq{"frequencies", DType::kFloat32, Shape{rows}, std::vector<std::uint32_t>(rows, 0)};
  o.optional_defaults["frequencies"] = freq;
  o.reject_unknown = true;
  return o;
}

void SaveResponseSet(const std::filesystem::path& dir, const ResponseSetArtifact& artifact) {
  artifact.Validate();
  ModelContainer c;
  c.metadata = {{"kind", "response_set"}, {"size", artifact.size()}};
  c.PutTensor("phi_y", artifact.phi_y);
  c.PutFloats("lm_scores", artifact.lm_scores);
  c.PutInt32("cluster_ids", artifact.cluster_ids);
  c.PutFloats("frequencies", artifact.frequencies);
  std::filesystem::create_directories(dir);
  c.Save(dir / kResponseSetFile);
  nlohmann::json manifest = {{"texts", artifact.texts},
                             {"intents", artifact.intents},
                             {"metadata", artifact.metadata}};
  const std::string text = manifest.dump(1) + "\n";
  WriteFileBytes(dir / kResponseManifest,
                 std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ResponseSetArtifact LoadResponseSet(const std::filesystem::path& dir,
                                    std::vector<std::string>* warnings) {
  ResponseSetArtifact a;
  {
    std::ifstream in(dir / kResponseManifest);
    if (!in) throw IoError("cannot open " + (dir / kResponseManifest).string());
    try {
      nlohmann::json m;
      in >> m;
      a.texts = m.at("texts").get<std::vector<std::string>>();
      a.intents = m.value("intents", std::vector<std::string>(a.texts.size()));
      a.metadata = m.value("metadata", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
      throw IoError((dir / kResponseManifest).string() + ": " + e.what());
    }
  }
  ModelContainer c = ModelContainer::Load(dir / kResponseSetFile,
                                          ResponseSetReadOptions(a.texts.size()), warnings);
  CheckKind(c, "response_set", dir / kResponseSetFile);
  a.phi_y = c.GetTensor("phi_y");
  a.lm_scores = c.GetFloats("lm_scores");
  a.cluster_ids = c.GetInt32("cluster_ids");
  a.frequencies = c.GetFloats("frequencies");
  try {
    a.Validate();
  } catch (const std::exception& e) {
    throw IoError(dir.string() + ": inconsistent response set: " + e.what());
  }
  return a;
}

SuggestionModels LoadSuggestionModels(const std::filesystem::path& run_dir,
                                      std::vector<std::string>* warnings) {
  SuggestionModels m;
  LoadMatching(run_dir / kMatchingFile, &m.vocab, &m.encoder);
  m.artifact = LoadResponseSet(run_dir / kResponseSetDir, warnings);
  if (m.artifact.dim() != m.encoder.config.output_dim()) {
    throw IoError("response set dimension " + std::to_string(m.artifact.dim()) +
                  " does not match the encoder output " +
                  std::to_string(m.encoder.config.output_dim()));
  }
  if (std::filesystem::exists(run_dir / kCvaeFile)) {
    std::string base_hash;
    m.cvae = LoadCvae(run_dir / kCvaeFile, &base_hash);
    const std::string actual = FileHash(run_dir / kMatchingFile);
    if (!base_hash.empty() && base_hash != actual) {
      std::string msg = "cvae was trained on matching model " + base_hash + ", loaded " + actual;
      if (warnings) warnings->push_back(msg);
    }
    if (m.cvae->d() != m.encoder.config.output_dim()) {
      throw IoError("cvae dimension does not match the encoder output");
    }
  }
  return m;
}

}  // namespace smartreply
