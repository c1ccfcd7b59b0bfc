#include "smartreply/diversify.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "embedded_data.h"
#include "smartreply/error.h"

namespace smartreply {

LexicalTables LexicalTables::FromJson(std::string_view json) {
  LexicalTables t;
  try {
    auto j = nlohmann::json::parse(json);
    for (const auto& [k, v] : j.at("contractions").items()) {
      t.contractions[k] = v.get<std::string>();
    }
    for (const auto& cls : j.at("synonyms")) {
      auto words = cls.get<std::vector<std::string>>();
      if (words.empty()) continue;
      for (const auto& w : words) t.synonyms[w] = words.front();
    }
    for (const auto& w : j.at("negations")) t.negations.insert(w.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("lexical tables: ") + e.what());
  }
  return t;
}

LexicalTables LexicalTables::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexical tables " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return FromJson(ss.str());
}

LexicalTables LexicalTables::Default() { return FromJson(embedded::LexicalTablesJson()); }

bool LexicalTables::IsNegation(const std::string& word) const {
  if (negations.count(word)) return true;
  return word.size() >= 3 && word.compare(word.size() - 3, 3, "n't") == 0;
}

Tokens Canonicalize(std::string_view text, const LexicalTables& tables) {
  Tokens out;
  for (const auto& tok : Tokenize(text)) {
    const bool has_word_char = std::any_of(tok.begin(), tok.end(), [](char c) {
      const auto u = static_cast<unsigned char>(c);
      return std::isalnum(u) || u >= 0x80;
    });
    if (!has_word_char) continue;
    auto c = tables.contractions.find(tok);
    std::vector<std::string> words;
    if (c != tables.contractions.end()) {
      std::istringstream ss(c->second);
      for (std::string w; ss >> w;) words.push_back(w);
    } else {
      words.push_back(tok);
    }
    for (auto& w : words) {
      auto s = tables.synonyms.find(w);
      out.push_back(s == tables.synonyms.end() ? w : s->second);
    }
  }
  return out;
}

bool LexicallyJoined(const Tokens& a, const Tokens& b, const LexicalTables& tables) {
  if (a == b) return true;
  const Tokens& shorter = a.size() <= b.size() ? a : b;
  const Tokens& longer = a.size() <= b.size() ? b : a;
  if (longer.size() - shorter.size() > 1) return false;
  std::size_t p = 0;
  while (p < shorter.size() && shorter[p] == longer[p]) ++p;
  if (shorter.size() == longer.size()) {
    // Single substitution at p; everything after must match.
    if (!std::equal(shorter.begin() + static_cast<std::ptrdiff_t>(p + 1), shorter.end(),
                    longer.begin() + static_cast<std::ptrdiff_t>(p + 1))) {
      return false;
    }
    if (shorter.size() < 2) return false;  // no shared word left
    return !tables.IsNegation(shorter[p]) && !tables.IsNegation(longer[p]);
  }
  // Single insertion into `shorter` at p.
  if (!std::equal(shorter.begin() + static_cast<std::ptrdiff_t>(p), shorter.end(),
                  longer.begin() + static_cast<std::ptrdiff_t>(p + 1))) {
    return false;
  }
  if (shorter.empty()) return false;
  return !tables.IsNegation(longer[p]);
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t Find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void Union(std::size_t a, std::size_t b) {
    a = Find(a);
    b = Find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

LexicalClusters BuildClusters(std::span<const std::string> texts,
                              const LexicalTables& tables) {
  const std::size_t n = texts.size();
  std::vector<Tokens> canon;
  canon.reserve(n);
  for (const auto& t : texts) canon.push_back(Canonicalize(t, tables));
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (uf.Find(i) == uf.Find(j)) continue;
      if (LexicallyJoined(canon[i], canon[j], tables)) uf.Union(i, j);
    }
  }
  LexicalClusters out;
  out.cluster_of.assign(n, -1);
  std::vector<std::int32_t> id_of_root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = uf.Find(i);
    if (id_of_root[r] < 0) {
      id_of_root[r] = static_cast<std::int32_t>(out.members.size());
      out.members.emplace_back();
    }
    out.cluster_of[i] = id_of_root[r];
    out.members[static_cast<std::size_t>(id_of_root[r])].push_back(i);
  }
  return out;
}

std::vector<std::size_t> Dedupe(std::span<const std::size_t> ranked,
                                std::span<const std::int32_t> cluster_of,
                                std::size_t limit) {
  std::vector<std::size_t> out;
  std::set<std::int32_t> seen;
  for (std::size_t id : ranked) {
    if (out.size() >= limit) break;
    if (id >= cluster_of.size()) {
      throw ContractError("candidate id " + std::to_string(id) + " has no cluster");
    }
    if (seen.insert(cluster_of[id]).second) out.push_back(id);
  }
  return out;
}

MmrResult MmrRerank(std::span<const float> scores, const Tensor& vectors, double beta) {
  const std::size_t k = scores.size();
  if (k < 2) throw ContractError("MMR needs at least 2 candidates");
  if (vectors.rows() != k) {
    throw DimensionError("MMR: " + std::to_string(k) + " scores but vectors " +
                         ShapeToString(vectors.shape()));
  }
  if (!(beta >= 0.0 && beta <= 1.0)) throw ContractError("beta must lie in [0, 1]");
  const std::size_t d = vectors.cols();
  std::vector<double> norms(k);
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (float v : vectors.row(i)) s += static_cast<double>(v) * v;
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) {
      throw ContractError("cosine undefined for zero-norm candidate vector at position " +
                          std::to_string(i));
    }
  }
  MmrResult out;
  out.novelty.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      double dot = 0.0;
      auto a = vectors.row(i), b = vectors.row(j);
      for (std::size_t c = 0; c < d; ++c) dot += static_cast<double>(a[c]) * b[c];
      const double cos = dot / (norms[i] * norms[j]);
      out.novelty[i] += cos;
      out.novelty[j] += cos;
    }
  }
  out.mmr.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.novelty[i] /= static_cast<double>(k - 1);
    out.mmr[i] = beta * scores[i] - (1.0 - beta) * out.novelty[i];
  }
  out.order.resize(k);
  std::iota(out.order.begin(), out.order.end(), 0);
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](std::size_t a, std::size_t b) { return out.mmr[a] > out.mmr[b]; });
  return out;
}

std::vector<std::size_t> MmrPreselect(const MatchScores& candidates, const Tensor& responses,
                                      double beta, std::size_t k,
                                      std::vector<std::string>* warnings) {
  const std::size_t n = candidates.ids.size();
  if (k == 0) throw ContractError("MMR preselect needs K >= 1");
  if (n < 2 * k) {
    std::string msg = "MMR preselect got " + std::to_string(n) + " candidates for K = " +
                      std::to_string(k) + " (wanted " + std::to_string(2 * k) + ")";
    spdlog::warn(msg);
    if (warnings) warnings->push_back(msg);
  }
  if (n == 1) return candidates.ids;
  Tensor vecs = GatherRows(responses, candidates.ids);
  MmrResult r = MmrRerank(candidates.softmax, vecs, beta);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, n); ++i) out.push_back(candidates.ids[r.order[i]]);
  return out;
}

}  // namespace smartreply
