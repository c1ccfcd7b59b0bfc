#ifndef SMARTREPLY_DIVERSIFY_H_
#define SMARTREPLY_DIVERSIFY_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smartreply/corpus.h"
#include "smartreply/matching.h"
#include "smartreply/tensor.h"

namespace smartreply {

// Canonicalisation tables for lexical clustering.
struct LexicalTables {
  std::map<std::string, std::string> contractions;  // "can't" -> "cannot"
  std::map<std::string, std::string> synonyms;      // word -> class representative
  std::set<std::string> negations;

  static LexicalTables FromJson(std::string_view json);
  static LexicalTables Load(const std::filesystem::path& path);
  // Shipped defaults (data/lexical_tables.json).
  static LexicalTables Default();

  bool IsNegation(const std::string& word) const;
};

// Tokenize, drop punctuation tokens, expand contractions, then map synonyms
// to their class representative.
Tokens Canonicalize(std::string_view text, const LexicalTables& tables);

// The pairwise join rule on canonical forms: equal, or one word substituted,
// inserted or deleted where no differing word is a negation and the two
// forms still share at least one word.
bool LexicallyJoined(const Tokens& a, const Tokens& b, const LexicalTables& tables);

struct LexicalClusters {
  // Dense cluster ids numbered by first appearance.
  std::vector<std::int32_t> cluster_of;
  std::vector<std::vector<std::size_t>> members;

  std::size_t num_clusters() const { return members.size(); }
};

// Transitive closure of the join rule (union-find over all pairs).
LexicalClusters BuildClusters(std::span<const std::string> texts,
                              const LexicalTables& tables);

// Keeps the first candidate per cluster in rank order, up to `limit`.
std::vector<std::size_t> Dedupe(std::span<const std::size_t> ranked,
                                std::span<const std::int32_t> cluster_of,
                                std::size_t limit = 3);

struct MmrResult {
  // Positions into the candidate list, best first.
  std::vector<std::size_t> order;
  std::vector<double> novelty;  // per candidate position
  std::vector<double> mmr;      // per candidate position
};

// One-pass approximate MMR. novelty_k is the mean cosine between candidate k
// and the other K-1; mmr_k = beta * score_k - (1 - beta) * novelty_k, sorted
// descending with ties kept in the original rank order.
MmrResult MmrRerank(std::span<const float> scores, const Tensor& vectors, double beta);

// Picks K of the matching candidates (normally the top 2K) by MMR. Returns
// response ids in MMR order. With K or fewer candidates every candidate is
// kept in MMR order; a warning is appended when fewer than 2K were given.
std::vector<std::size_t> MmrPreselect(const MatchScores& candidates, const Tensor& responses,
                                      double beta, std::size_t k,
                                      std::vector<std::string>* warnings = nullptr);

}  // namespace smartreply

#endif  // SMARTREPLY_DIVERSIFY_H_
