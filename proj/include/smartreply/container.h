#ifndef SMARTREPLY_CONTAINER_H_
#define SMARTREPLY_CONTAINER_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartreply/tensor.h"

namespace smartreply {

// SRM1 layout, all integers little-endian:
//   "SRM1" | u32 version | u64 metadata bytes | metadata JSON
//   | u32 section count | sections... | u32 CRC32 of everything before it
// Section: u32 name bytes | name | u32 dtype | u32 rank | u64 dims[rank]
//   | u64 payload bytes | payload (32-bit words) | u32 CRC32 of payload
inline constexpr char kContainerMagic[4] = {'S', 'R', 'M', '1'};
inline constexpr std::uint32_t kContainerVersion = 2;

enum class DType : std::uint32_t { kFloat32 = 0, kInt32 = 1 };

struct Section {
  std::string name;
  DType dtype = DType::kFloat32;
  Shape shape;
  std::vector<std::uint32_t> words;  // raw 32-bit payload

  bool operator==(const Section&) const = default;
};

struct ReadOptions {
  // Sections that must be present; a missing one is an error naming it.
  std::vector<std::string> required;
  // Sections introduced after version 1; filled from here when absent, with
  // a warning.
  std::map<std::string, Section> optional_defaults;
  // Rejects any section not listed above or matching allowed_prefixes.
  bool reject_unknown = false;
  std::vector<std::string> allowed_prefixes;
};

class ModelContainer {
 public:
  std::uint32_t version = kContainerVersion;
  nlohmann::json metadata = nlohmann::json::object();

  void PutTensor(const std::string& name, const Tensor& t);
  void PutFloats(const std::string& name, std::span<const float> values);
  void PutInt32(const std::string& name, std::span<const std::int32_t> values);
  void PutSection(Section s);

  bool Has(const std::string& name) const;
  const Section& Get(const std::string& name) const;
  Tensor GetTensor(const std::string& name) const;
  std::vector<float> GetFloats(const std::string& name) const;
  std::vector<std::int32_t> GetInt32(const std::string& name) const;
  // Insertion order, which is also the on-disk order.
  const std::vector<Section>& sections() const { return sections_; }

  std::vector<std::uint8_t> Serialize() const;
  static ModelContainer Deserialize(std::span<const std::uint8_t> bytes,
                                    const ReadOptions& options = {},
                                    std::vector<std::string>* warnings = nullptr);

  void Save(const std::filesystem::path& path) const;
  static ModelContainer Load(const std::filesystem::path& path, const ReadOptions& options = {},
                             std::vector<std::string>* warnings = nullptr);

 private:
  std::vector<Section> sections_;
};

std::uint32_t Crc32(std::span<const std::uint8_t> bytes);
// CRC32 of a file's bytes as 8 lowercase hex digits.
std::string FileHash(const std::filesystem::path& path);
std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path);
// Writes to a sibling temporary file then renames, so readers never see a
// partial file.
void WriteFileBytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace smartreply

#endif  // SMARTREPLY_CONTAINER_H_
