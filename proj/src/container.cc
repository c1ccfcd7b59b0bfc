#include "smartreply/container.h"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <spdlog/spdlog.h>
#include <zlib.h>

#include "smartreply/error.h"

namespace smartreply {

namespace {

class Writer {
 public:
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void Bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void String(const std::string& s) {
    out_.insert(out_.end(), s.begin(), s.end());
  }
  std::size_t size() const { return out_.size(); }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void Need(std::size_t n, const std::string& what) {
    if (in_.size() - pos_ < n) {
      throw IoError("truncated container while reading " + what + " (needed " +
                    std::to_string(n) + " bytes at offset " + std::to_string(pos_) + ")");
    }
  }
  std::uint32_t U32(const std::string& what) {
    Need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t U64(const std::string& what) {
    Need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::span<const std::uint8_t> Bytes(std::uint64_t n, const std::string& what) {
    if (n > in_.size()) Need(in_.size() + 1, what);
    Need(static_cast<std::size_t>(n), what);
    auto s = in_.subspan(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> PayloadBytes(const std::vector<std::uint32_t>& words) {
  std::vector<std::uint8_t> out;
  out.reserve(words.size() * 4);
  for (std::uint32_t w : words) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
  }
  return out;
}

}  // namespace

std::uint32_t Crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

void ModelContainer::PutSection(Section s) {
  if (s.name.empty()) throw ContractError("section name must be nonempty");
  if (Has(s.name)) throw ContractError("duplicate section " + s.name);
  if (NumElements(s.shape) != s.words.size()) {
    throw DimensionError("section " + s.name + " shape " + ShapeToString(s.shape) +
                         " does not match " + std::to_string(s.words.size()) + " values");
  }
  sections_.push_back(std::move(s));
}

void ModelContainer::PutTensor(const std::string& name, const Tensor& t) {
  Section s{name, DType::kFloat32, t.shape(), {}};
  s.words.reserve(t.size());
  for (float v : t.data()) s.words.push_back(std::bit_cast<std::uint32_t>(v));
  PutSection(std::move(s));
}

void ModelContainer::PutFloats(const std::string& name, std::span<const float> values) {
  PutTensor(name, Tensor(Shape{values.size()}, std::vector<float>(values.begin(), values.end())));
}

void ModelContainer::PutInt32(const std::string& name, std::span<const std::int32_t> values) {
  Section s{name, DType::kInt32, Shape{values.size()}, {}};
  for (std::int32_t v : values) s.words.push_back(std::bit_cast<std::uint32_t>(v));
  PutSection(std::move(s));
}

bool ModelContainer::Has(const std::string& name) const {
  for (const auto& s : sections_) {
    if (s.name == name) return true;
  }
  return false;
}

const Section& ModelContainer::Get(const std::string& name) const {
  for (const auto& s : sections_) {
    if (s.name == name) return s;
  }
  throw IoError("container has no section '" + name + "'");
}

Tensor ModelContainer::GetTensor(const std::string& name) const {
  const Section& s = Get(name);
  if (s.dtype != DType::kFloat32) throw IoError("section '" + name + "' is not float32");
  std::vector<float> data;
  data.reserve(s.words.size());
  for (std::uint32_t w : s.words) data.push_back(std::bit_cast<float>(w));
  return Tensor(s.shape, std::move(data));
}

std::vector<float> ModelContainer::GetFloats(const std::string& name) const {
  return GetTensor(name).vec();
}

std::vector<std::int32_t> ModelContainer::GetInt32(const std::string& name) const {
  const Section& s = Get(name);
  if (s.dtype != DType::kInt32) throw IoError("section '" + name + "' is not int32");
  std::vector<std::int32_t> out;
  for (std::uint32_t w : s.words) out.push_back(std::bit_cast<std::int32_t>(w));
  return out;
}

std::vector<std::uint8_t> ModelContainer::Serialize() const {
  Writer w;
  w.Bytes(std::span(reinterpret_cast<const std::uint8_t*>(kContainerMagic), 4));
  w.U32(version);
  const std::string meta = metadata.dump();
  w.U64(meta.size());
  w.String(meta);
  w.U32(static_cast<std::uint32_t>(sections_.size()));
  for (const auto& s : sections_) {
    w.U32(static_cast<std::uint32_t>(s.name.size()));
    w.String(s.name);
    w.U32(static_cast<std::uint32_t>(s.dtype));
    w.U32(static_cast<std::uint32_t>(s.shape.size()));
    for (std::size_t d : s.shape) w.U64(d);
    auto payload = PayloadBytes(s.words);
    w.U64(payload.size());
    w.Bytes(payload);
    w.U32(Crc32(payload));
  }
  w.U32(Crc32(w.bytes()));
  return std::move(w.bytes());
}

ModelContainer ModelContainer::Deserialize(std::span<const std::uint8_t> bytes,
                                           const ReadOptions& options,
                                           std::vector<std::string>* warnings) {
  Reader r(bytes);
  auto magic = r.Bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kContainerMagic)) {
    throw IoError("not an SRM1 container (bad magic)");
  }
  ModelContainer c;
  c.version = r.U32("version");
  if (c.version == 0 || c.version > kContainerVersion) {
    throw IoError("unsupported container version " + std::to_string(c.version) +
                  " (this reader handles 1 to " + std::to_string(kContainerVersion) + ")");
  }
  auto meta = r.Bytes(r.U64("metadata length"), "metadata");
  try {
    c.metadata = nlohmann::json::parse(meta.begin(), meta.end());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("container metadata is not valid JSON: ") + e.what());
  }
  const std::uint32_t count = r.U32("section count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string where = "section #" + std::to_string(i);
    auto name_bytes = r.Bytes(r.U32(where + " name length"), where + " name");
    Section s;
    s.name.assign(name_bytes.begin(), name_bytes.end());
    const std::string label = "section '" + s.name + "'";
    const std::uint32_t dtype = r.U32(label + " dtype");
    if (dtype > 1) throw IoError(label + " has unknown dtype " + std::to_string(dtype));
    s.dtype = static_cast<DType>(dtype);
    const std::uint32_t rank = r.U32(label + " rank");
    if (rank > 8) throw IoError(label + " has implausible rank " + std::to_string(rank));
    for (std::uint32_t k = 0; k < rank; ++k) s.shape.push_back(r.U64(label + " shape"));
    const std::uint64_t nbytes = r.U64(label + " payload length");
    auto payload = r.Bytes(nbytes, label + " payload");
    const std::uint32_t crc = r.U32(label + " checksum");
    if (crc != Crc32(payload)) throw IoError("checksum mismatch in " + label);
    if (nbytes % 4 != 0 || nbytes / 4 != NumElements(s.shape)) {
      throw IoError(label + " payload size does not match shape " + ShapeToString(s.shape));
    }
    s.words.resize(nbytes / 4);
    for (std::size_t k = 0; k < s.words.size(); ++k) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(payload[4 * k + b]) << (8 * b);
      s.words[k] = v;
    }
    if (c.Has(s.name)) throw IoError("duplicate " + label);
    c.sections_.push_back(std::move(s));
  }
  const std::size_t body = r.pos();
  const std::uint32_t trailer = r.U32("trailer checksum");
  if (trailer != Crc32(bytes.subspan(0, body))) {
    throw IoError("container checksum mismatch (header or metadata corrupted)");
  }
  if (r.pos() != bytes.size()) throw IoError("trailing bytes after container trailer");

  if (options.reject_unknown) {
    for (const auto& s : c.sections_) {
      bool known = options.optional_defaults.count(s.name) > 0;
      for (const auto& n : options.required) known = known || n == s.name;
      for (const auto& p : options.allowed_prefixes) known = known || s.name.starts_with(p);
      if (!known) throw IoError("unknown section '" + s.name + "'");
    }
  }
  for (const auto& n : options.required) {
    if (!c.Has(n)) throw IoError("missing required section '" + n + "'");
  }
  for (const auto& [name, def] : options.optional_defaults) {
    if (c.Has(name)) continue;
    std::string msg = "section '" + name + "' absent (container version " +
                      std::to_string(c.version) + "); using defaults";
    spdlog::warn(msg);
    if (warnings) warnings->push_back(msg);
    Section s = def;
    s.name = name;
    c.sections_.push_back(std::move(s));
  }
  return c;
}

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void WriteFileBytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void ModelContainer::Save(const std::filesystem::path& path) const {
  WriteFileBytes(path, Serialize());
}

ModelContainer ModelContainer::Load(const std::filesystem::path& path, const ReadOptions& options,
                                    std::vector<std::string>* warnings) {
  auto bytes = ReadFileBytes(path);
  try {
    return Deserialize(bytes, options, warnings);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string FileHash(const std::filesystem::path& path) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", Crc32(ReadFileBytes(path)));
  return buf;
}

}  // namespace smartreply
