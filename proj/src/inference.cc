#include "smartreply/inference.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "smartreply/error.h"
#include "smartreply/matching.h"

namespace smartreply {

namespace {

using Clock = std::chrono::steady_clock;

double Micros(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration<double, std::micro>(to - from).count();
}

void Warn(std::vector<std::string>* warnings, const std::string& msg) {
  spdlog::warn(msg);
  if (warnings) warnings->push_back(msg);
}

}  // namespace

void ResponseSetArtifact::Validate() const {
  const std::size_t r = texts.size();
  if (r == 0) throw ContractError("response set is empty");
  if (phi_y.rank() != 2 || phi_y.rows() != r || lm_scores.size() != r ||
      cluster_ids.size() != r || intents.size() != r || frequencies.size() != r) {
    throw DimensionError("response set arrays disagree: " + std::to_string(r) +
                         " texts, phi_y " + ShapeToString(phi_y.shape()) + ", " +
                         std::to_string(lm_scores.size()) + " lm scores, " +
                         std::to_string(cluster_ids.size()) + " cluster ids");
  }
  if (!phi_y.AllFinite()) throw NumericError("response vectors contain non-finite values");
  for (float v : lm_scores) {
    if (!std::isfinite(v)) throw NumericError("response lm scores contain non-finite values");
  }
}

ResponseSetArtifact BuildResponseSet(std::span<const MessageReplyPair> corpus,
                                     const Vocabulary& vocab, const DualEncoder& encoder,
                                     const NgramLm& lm, const LexicalTables& tables,
                                     const ResponseSetOptions& options,
                                     std::vector<std::string>* warnings) {
  if (options.freq_top == 0 || options.lm_top == 0) {
    throw ContractError("response set cuts must be positive");
  }
  struct Entry {
    std::string text;
    Tokens tokens;
    std::int64_t count = 0;
    std::map<std::string, std::int64_t> intents;
  };
  std::unordered_map<std::string, std::size_t> index;
  std::vector<Entry> entries;
  for (const auto& p : corpus) {
    auto [it, fresh] = index.emplace(p.reply_text, entries.size());
    if (fresh) entries.push_back({p.reply_text, p.reply, 0, {}});
    Entry& e = entries[it->second];
    ++e.count;
    if (!p.reply_intent.empty()) ++e.intents[p.reply_intent];
  }
  if (entries.empty()) throw ContractError("cannot build a response set from an empty corpus");

  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (entries[a].count != entries[b].count) return entries[a].count > entries[b].count;
    return entries[a].text < entries[b].text;
  });
  if (order.size() < options.freq_top) {
    Warn(warnings, "corpus has " + std::to_string(order.size()) +
                       " distinct replies, fewer than freq_top = " +
                       std::to_string(options.freq_top) + "; using all");
  }
  order.resize(std::min(order.size(), options.freq_top));

  std::vector<double> lm_score(entries.size());
  for (std::size_t id : order) lm_score[id] = lm.Score(entries[id].tokens);
  std::vector<std::size_t> rank(order.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return lm_score[order[a]] > lm_score[order[b]];
  });
  if (rank.size() < options.lm_top) {
    Warn(warnings, "only " + std::to_string(rank.size()) + " replies survive the frequency cut, " +
                       "fewer than lm_top = " + std::to_string(options.lm_top) + "; using all");
  }
  rank.resize(std::min(rank.size(), options.lm_top));
  std::sort(rank.begin(), rank.end());  // back to frequency order

  ResponseSetArtifact out;
  std::vector<TokenIds> ids;
  for (std::size_t r : rank) {
    const Entry& e = entries[order[r]];
    out.texts.push_back(e.text);
    out.frequencies.push_back(static_cast<float>(e.count));
    out.lm_scores.push_back(static_cast<float>(lm_score[order[r]]));
    std::string intent;
    std::int64_t best = 0;
    for (const auto& [name, c] : e.intents) {
      if (c > best) best = c, intent = name;
    }
    out.intents.push_back(intent);
    ids.push_back(vocab.Encode(e.tokens));
  }
  const std::size_t d = encoder.config.output_dim();
  out.phi_y = Tensor::Zeros(ids.size(), d);
  for (std::size_t start = 0; start < ids.size(); start += 256) {
    const std::size_t end = std::min(ids.size(), start + 256);
    Tensor block =
        EncodeBatch(encoder, Side::kReply, std::span<const TokenIds>(ids.data() + start, end - start));
    std::copy(block.data().begin(), block.data().end(),
              out.phi_y.mutable_data().begin() + static_cast<std::ptrdiff_t>(start * d));
  }
  out.cluster_ids = BuildClusters(out.texts, tables).cluster_of;
  out.metadata = {{"corpus_pairs", corpus.size()},
                  {"distinct_replies", entries.size()},
                  {"freq_top", options.freq_top},
                  {"lm_top", options.lm_top},
                  {"size", out.texts.size()},
                  {"encoder", encoder.config.ToJson()}};
  out.Validate();
  return out;
}

std::string ToString(Ranker r) {
  switch (r) {
    case Ranker::kMatching: return "matching";
    case Ranker::kMmr: return "mmr";
    case Ranker::kMcvae: return "mcvae";
  }
  return "?";
}

Ranker ParseRanker(const std::string& name) {
  if (name == "matching") return Ranker::kMatching;
  if (name == "mmr") return Ranker::kMmr;
  if (name == "mcvae") return Ranker::kMcvae;
  throw ContractError("unknown ranker '" + name + "' (expected matching, mmr or mcvae)");
}

void PipelineConfig::Validate() const {
  if (k < 3) throw ContractError("k must be at least 3");
  if (samples < 1) throw ContractError("s must be at least 1");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ContractError("beta must lie in [0, 1]");
  if (!(alpha >= 0.0f) || !std::isfinite(alpha)) throw ContractError("alpha must be >= 0");
  if (top_n < 1) throw ContractError("top_n must be at least 1");
}

nlohmann::json PipelineConfig::ToJson() const {
  return {{"alpha", alpha},
          {"beta", beta},
          {"k", k},
          {"s", samples},
          {"use_mmr_preselect", use_mmr_preselect},
          {"alpha_in_sampling", alpha_in_sampling},
          {"dedupe", dedupe},
          {"top_n", top_n},
          {"seed", seed}};
}

PipelineConfig PipelineConfig::FromJson(const nlohmann::json& j, const PipelineConfig& base) {
  PipelineConfig c = base;
  if (!j.is_object()) throw ContractError("pipeline config must be a JSON object");
  auto read = [&](const char* key, auto& field) {
    if (!j.contains(key) || j[key].is_null()) return;
    try {
      j[key].get_to(field);
    } catch (const nlohmann::json::exception&) {
      throw ContractError(std::string("field '") + key + "' has the wrong type");
    }
  };
  read("alpha", c.alpha);
  read("beta", c.beta);
  read("k", c.k);
  read("s", c.samples);
  read("use_mmr_preselect", c.use_mmr_preselect);
  read("alpha_in_sampling", c.alpha_in_sampling);
  read("dedupe", c.dedupe);
  read("top_n", c.top_n);
  read("seed", c.seed);
  return c;
}

PipelineConfig PipelineConfig::FromJson(const nlohmann::json& j) {
  return FromJson(j, PipelineConfig{});
}

std::int64_t VoteTally::total() const {
  return std::accumulate(votes.begin(), votes.end(), std::int64_t{0});
}

std::map<std::size_t, std::int64_t> VoteTally::ByResponse() const {
  std::map<std::size_t, std::int64_t> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (votes[i] > 0) out[candidates[i]] += votes[i];
  }
  return out;
}

VoteTally ConstrainedSampleVote(std::span<const float> phi_x, const Tensor& candidates,
                                std::span<const float> candidate_lm,
                                std::span<const std::size_t> candidate_ids,
                                const CvaeParams& cvae, std::size_t samples, Rng& rng,
                                float lm_weight, SampleVoteTimings* timings) {
  const std::size_t k = candidates.rows();
  if (k == 0 || samples == 0) throw ContractError("sampling needs K >= 1 and s >= 1");
  if (candidate_lm.size() != k || candidate_ids.size() != k) {
    throw DimensionError("candidate lm scores / ids do not match " +
                         ShapeToString(candidates.shape()));
  }
  auto t0 = Clock::now();
  Tensor z = SampleGaussian(rng, {samples, cvae.z_dim()});
  Tensor decoded = DecodeSamples(cvae, z, phi_x);
  auto t1 = Clock::now();
  Tensor scores = MatMulTransB(decoded, candidates);
  VoteTally tally;
  tally.candidates.assign(candidate_ids.begin(), candidate_ids.end());
  tally.votes.assign(k, 0);
  tally.samples = samples;
  for (std::size_t i = 0; i < samples; ++i) {
    auto row = scores.row(i);
    std::size_t best = 0;
    float best_score = row[0] + lm_weight * candidate_lm[0];
    for (std::size_t j = 1; j < k; ++j) {
      const float s = row[j] + lm_weight * candidate_lm[j];
      if (s > best_score) best = j, best_score = s;
    }
    ++tally.votes[best];
  }
  if (timings) {
    timings->sample_us = Micros(t0, t1);
    timings->vote_us = Micros(t1, Clock::now());
  }
  return tally;
}

nlohmann::json StageTimings::ToJson() const {
  return {{"encode_us", encode_us},   {"score_us", score_us},
          {"preselect_us", preselect_us}, {"sample_us", sample_us},
          {"vote_us", vote_us},       {"sample_vote_us", sample_vote_us()},
          {"dedup_us", dedup_us},     {"total_us", total_us}};
}

nlohmann::json SuggestionResult::ToJson() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : suggestions) {
    nlohmann::json row = {{"id", s.id},
                          {"text", s.text},
                          {"score", s.score},
                          {"cluster", s.cluster},
                          {"intent", s.intent}};
    row["mmr"] = s.mmr ? nlohmann::json(*s.mmr) : nlohmann::json(nullptr);
    row["votes"] = s.votes ? nlohmann::json(*s.votes) : nlohmann::json(nullptr);
    rows.push_back(std::move(row));
  }
  return {{"ranker", ToString(ranker)},
          {"suggestions", rows},
          {"timings", timings.ToJson()},
          {"warnings", warnings}};
}

Tensor EncodeMessage(const SuggestionModels& models, std::string_view message) {
  Tokens tokens = Tokenize(message);
  if (tokens.empty()) throw ContractError("message is empty");
  if (tokens.size() > kDefaultMaxLength) tokens.resize(kDefaultMaxLength);
  return Encode(models.encoder, Side::kMessage, models.vocab.Encode(tokens));
}

namespace {

struct Candidates {
  Tensor phi_x;
  MatchScores scores;
  std::unordered_map<std::size_t, float> raw_of;
};

// Encode + matching top-n, filling the first two timing stages.
Candidates MatchStage(const SuggestionModels& models, std::string_view message,
                      const PipelineConfig& config, std::size_t n, StageTimings& t) {
  config.Validate();
  const ResponseSetArtifact& a = models.artifact;
  auto t0 = Clock::now();
  Candidates c;
  c.phi_x = EncodeMessage(models, message);
  auto t1 = Clock::now();
  c.scores = MatchScore(c.phi_x.data(), a.phi_y, a.lm_scores, config.alpha,
                        std::min(n, a.size()));
  for (std::size_t i = 0; i < c.scores.ids.size(); ++i) c.raw_of[c.scores.ids[i]] = c.scores.raw[i];
  t.encode_us = Micros(t0, t1);
  t.score_us = Micros(t1, Clock::now());
  return c;
}

Suggestion MakeSuggestion(const ResponseSetArtifact& a, std::size_t id, float raw) {
  Suggestion s;
  s.id = id;
  s.text = a.texts[id];
  s.score = raw;
  s.cluster = a.cluster_ids[id];
  s.intent = a.intents[id];
  return s;
}

std::vector<std::size_t> Finalize(const ResponseSetArtifact& a, std::span<const std::size_t> ranked,
                                  const PipelineConfig& config, StageTimings& t) {
  auto t0 = Clock::now();
  std::vector<std::size_t> out;
  if (config.dedupe) {
    out = Dedupe(ranked, a.cluster_ids, config.top_n);
  } else {
    out.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(
                                                    std::min(config.top_n, ranked.size())));
  }
  t.dedup_us = Micros(t0, Clock::now());
  return out;
}

SuggestionResult SampleAndRank(const SuggestionModels& models, const Candidates& c,
                               std::vector<std::size_t> pool, const PipelineConfig& config,
                               Clock::time_point start, SuggestionResult res) {
  if (!models.cvae) throw ContractError("the mcvae ranker needs a trained CVAE");
  const ResponseSetArtifact& a = models.artifact;
  Tensor cand = GatherRows(a.phi_y, pool);
  std::vector<float> lm;
  for (std::size_t id : pool) lm.push_back(a.lm_scores[id]);
  Rng rng(config.seed);
  SampleVoteTimings svt;
  VoteTally tally = ConstrainedSampleVote(c.phi_x.data(), cand, lm, pool, *models.cvae,
                                          config.samples, rng,
                                          config.alpha_in_sampling ? config.alpha : 1.0f, &svt);
  res.timings.sample_us = svt.sample_us;
  res.timings.vote_us = svt.vote_us;

  auto raw = [&](std::size_t pos) {
    auto it = c.raw_of.find(pool[pos]);
    return it == c.raw_of.end() ? -INFINITY : it->second;
  };
  std::vector<std::size_t> pos(pool.size());
  std::iota(pos.begin(), pos.end(), 0);
  std::sort(pos.begin(), pos.end(), [&](std::size_t x, std::size_t y) {
    if (tally.votes[x] != tally.votes[y]) return tally.votes[x] > tally.votes[y];
    if (raw(x) != raw(y)) return raw(x) > raw(y);
    return pool[x] < pool[y];
  });
  std::unordered_map<std::size_t, std::int64_t> votes_of;
  for (std::size_t p : pos) {
    res.ranked.push_back(pool[p]);
    votes_of[pool[p]] = tally.votes[p];
  }
  for (std::size_t id : Finalize(a, res.ranked, config, res.timings)) {
    const auto it = c.raw_of.find(id);
    Suggestion s = MakeSuggestion(a, id, it == c.raw_of.end() ? 0.0f : it->second);
    s.votes = votes_of[id];
    res.suggestions.push_back(std::move(s));
  }
  res.timings.total_us = Micros(start, Clock::now());
  return res;
}

}  // namespace

SuggestionResult SuggestMatching(const SuggestionModels& models, std::string_view message,
                                 const PipelineConfig& config) {
  auto start = Clock::now();
  SuggestionResult res;
  res.ranker = Ranker::kMatching;
  Candidates c = MatchStage(models, message, config, config.k, res.timings);
  res.ranked = c.scores.ids;
  for (std::size_t id : Finalize(models.artifact, res.ranked, config, res.timings)) {
    res.suggestions.push_back(MakeSuggestion(models.artifact, id, c.raw_of[id]));
  }
  res.timings.total_us = Micros(start, Clock::now());
  return res;
}

SuggestionResult SuggestMmr(const SuggestionModels& models, std::string_view message,
                            const PipelineConfig& config) {
  auto start = Clock::now();
  SuggestionResult res;
  res.ranker = Ranker::kMmr;
  Candidates c = MatchStage(models, message, config, config.k, res.timings);
  auto t0 = Clock::now();
  std::unordered_map<std::size_t, double> mmr_of;
  if (c.scores.ids.size() >= 2) {
    MmrResult m = MmrRerank(c.scores.softmax, GatherRows(models.artifact.phi_y, c.scores.ids),
                            config.beta);
    for (std::size_t p : m.order) {
      res.ranked.push_back(c.scores.ids[p]);
      mmr_of[c.scores.ids[p]] = m.mmr[p];
    }
  } else {
    res.ranked = c.scores.ids;
  }
  res.timings.preselect_us = Micros(t0, Clock::now());
  for (std::size_t id : Finalize(models.artifact, res.ranked, config, res.timings)) {
    Suggestion s = MakeSuggestion(models.artifact, id, c.raw_of[id]);
    if (mmr_of.count(id)) s.mmr = mmr_of[id];
    res.suggestions.push_back(std::move(s));
  }
  res.timings.total_us = Micros(start, Clock::now());
  return res;
}

SuggestionResult SuggestMcvae(const SuggestionModels& models, std::string_view message,
                              const PipelineConfig& config) {
  auto start = Clock::now();
  if (!models.cvae) throw ContractError("the mcvae ranker needs a trained CVAE");
  SuggestionResult res;
  res.ranker = Ranker::kMcvae;
  Candidates c = MatchStage(models, message, config, 2 * config.k, res.timings);
  auto t0 = Clock::now();
  std::vector<std::size_t> pool;
  if (config.use_mmr_preselect) {
    pool = MmrPreselect(c.scores, models.artifact.phi_y, config.beta, config.k, &res.warnings);
  } else {
    pool.assign(c.scores.ids.begin(),
                c.scores.ids.begin() +
                    static_cast<std::ptrdiff_t>(std::min(config.k, c.scores.ids.size())));
  }
  res.timings.preselect_us = Micros(t0, Clock::now());
  return SampleAndRank(models, c, std::move(pool), config, start, std::move(res));
}

SuggestionResult SuggestMcvaeUnconstrained(const SuggestionModels& models,
                                           std::string_view message,
                                           const PipelineConfig& config) {
  auto start = Clock::now();
  SuggestionResult res;
  res.ranker = Ranker::kMcvae;
  // Scores are still needed for the tie-break, so the match stage spans R.
  Candidates c = MatchStage(models, message, config, models.artifact.size(), res.timings);
  std::vector<std::size_t> pool(models.artifact.size());
  std::iota(pool.begin(), pool.end(), 0);
  return SampleAndRank(models, c, std::move(pool), config, start, std::move(res));
}

SuggestionResult Suggest(const SuggestionModels& models, std::string_view message,
                         Ranker ranker, const PipelineConfig& config) {
  switch (ranker) {
    case Ranker::kMatching: return SuggestMatching(models, message, config);
    case Ranker::kMmr: return SuggestMmr(models, message, config);
    case Ranker::kMcvae: return SuggestMcvae(models, message, config);
  }
  throw ContractError("unknown ranker");
}

nlohmann::json CostReport::ToJson() const {
  return {{"unconstrained_scoring", unconstrained_scoring},
          {"constrained_scoring", constrained_scoring},
          {"decoder", decoder},
          {"scoring_ratio", scoring_ratio},
          {"total_ratio", total_ratio}};
}

CostReport CountMultiplications(std::size_t r, std::size_t k, std::size_t samples,
                                std::size_t d, std::size_t z_dim, std::size_t hidden) {
  if (k == 0 || k > r) throw ContractError("K must lie in [1, R]");
  CostReport c;
  c.unconstrained_scoring = static_cast<std::uint64_t>(d) * r * samples;
  c.constrained_scoring = static_cast<std::uint64_t>(d) * k * samples;
  c.decoder = static_cast<std::uint64_t>(samples) * ((z_dim + d) * hidden + hidden * d);
  c.scoring_ratio = static_cast<double>(r) / static_cast<double>(k);
  c.total_ratio = static_cast<double>(c.unconstrained_scoring + c.decoder) /
                  static_cast<double>(c.constrained_scoring + c.decoder);
  return c;
}

}  // namespace smartreply
