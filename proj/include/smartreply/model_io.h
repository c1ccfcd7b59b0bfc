#ifndef SMARTREPLY_MODEL_IO_H_
#define SMARTREPLY_MODEL_IO_H_

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartreply/container.h"
#include "smartreply/corpus.h"
#include "smartreply/encoder.h"
#include "smartreply/inference.h"
#include "smartreply/mcvae.h"
#include "smartreply/response_lm.h"

namespace smartreply {

// File names inside a run directory.
inline constexpr const char* kMatchingFile = "matching.srm";
inline constexpr const char* kLmFile = "lm.srm";
inline constexpr const char* kCvaeFile = "cvae.srm";
inline constexpr const char* kResponseSetDir = "response_set";
inline constexpr const char* kResponseSetFile = "response_set.srm";
inline constexpr const char* kResponseManifest = "responses.json";

// Matching model: vocabulary and encoder config in metadata, one section
// per encoder parameter.
ModelContainer MatchingToContainer(const Vocabulary& vocab, const DualEncoder& encoder);
void SaveMatching(const std::filesystem::path& path, const Vocabulary& vocab,
                  const DualEncoder& encoder);
void LoadMatching(const std::filesystem::path& path, Vocabulary* vocab, DualEncoder* encoder);

void SaveLm(const std::filesystem::path& path, const NgramLm& lm);
NgramLm LoadLm(const std::filesystem::path& path);

// `base_hash` ties the CVAE to the matching model it was trained on.
void SaveCvae(const std::filesystem::path& path, const CvaeParams& params, const CvaeConfig& config,
              const std::string& base_hash);
CvaeParams LoadCvae(const std::filesystem::path& path, std::string* base_hash = nullptr);

// Response-set artifact: a directory holding the SRM1 sections (phi_y,
// lm_scores, cluster_ids, frequencies) and the responses.json manifest.
// Version 1 artifacts lack `frequencies`; they load with zeros and a warning.
void SaveResponseSet(const std::filesystem::path& dir, const ResponseSetArtifact& artifact);
ResponseSetArtifact LoadResponseSet(const std::filesystem::path& dir,
                                    std::vector<std::string>* warnings = nullptr);
ReadOptions ResponseSetReadOptions(std::size_t rows);

// Loads whatever of matching / response set / cvae exists in `run_dir`.
// The matching model and response set are required.
SuggestionModels LoadSuggestionModels(const std::filesystem::path& run_dir,
                                      std::vector<std::string>* warnings = nullptr);

}  // namespace smartreply

#endif  // SMARTREPLY_MODEL_IO_H_
