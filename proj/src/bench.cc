#include "smartreply/bench.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "smartreply/error.h"

namespace smartreply {

namespace {

SuggestionResult Run(const SuggestionModels& models, const std::string& ranker,
                     const std::string& message, const PipelineConfig& config) {
  if (ranker == "mcvae-unconstrained") return SuggestMcvaeUnconstrained(models, message, config);
  return Suggest(models, message, ParseRanker(ranker), config);
}

void Accumulate(StageTimings& sum, const StageTimings& t) {
  sum.encode_us += t.encode_us;
  sum.score_us += t.score_us;
  sum.preselect_us += t.preselect_us;
  sum.sample_us += t.sample_us;
  sum.vote_us += t.vote_us;
  sum.dedup_us += t.dedup_us;
  sum.total_us += t.total_us;
}

nlohmann::json ToJson(const Percentiles& p) {
  return {{"p50", p.p50}, {"p95", p.p95}, {"p99", p.p99}, {"mean", p.mean}};
}

}  // namespace

void BenchConfig::Validate() const {
  if (queries == 0) throw ContractError("bench needs at least one query");
  for (const auto& r : rankers) {
    if (r != "mcvae-unconstrained") ParseRanker(r);
  }
}

Percentiles Summarize(std::vector<double> samples) {
  Percentiles p;
  if (samples.empty()) return p;
  std::sort(samples.begin(), samples.end());
  auto rank = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
    return samples[std::clamp<std::size_t>(idx, 1, samples.size()) - 1];
  };
  p.p50 = rank(0.50);
  p.p95 = rank(0.95);
  p.p99 = rank(0.99);
  p.mean = std::accumulate(samples.begin(), samples.end(), 0.0) /
           static_cast<double>(samples.size());
  return p;
}

const RankerLatency* BenchReport::Find(const std::string& ranker) const {
  for (const auto& r : rankers) {
    if (r.ranker == ranker) return &r;
  }
  return nullptr;
}

BenchReport RunBench(const SuggestionModels& models, std::span<const std::string> messages,
                     const PipelineConfig& pipeline, const BenchConfig& config) {
  config.Validate();
  pipeline.Validate();
  if (messages.empty()) throw ContractError("bench needs at least one message");
  BenchReport report;
  report.pipeline = pipeline.ToJson();
  for (const auto& ranker : config.rankers) {
    for (std::size_t i = 0; i < config.warmup; ++i) {
      Run(models, ranker, messages[i % messages.size()], pipeline);
    }
    std::vector<double> total, sample_vote, vote;
    StageTimings sum;
    for (std::size_t i = 0; i < config.queries; ++i) {
      const StageTimings t = Run(models, ranker, messages[i % messages.size()], pipeline).timings;
      total.push_back(t.total_us);
      sample_vote.push_back(t.sample_vote_us());
      vote.push_back(t.vote_us);
      Accumulate(sum, t);
    }
    RankerLatency l;
    l.ranker = ranker;
    l.queries = config.queries;
    l.total_us = Summarize(total);
    l.sample_vote_us = Summarize(sample_vote);
    l.vote_us = Summarize(vote);
    const double n = static_cast<double>(config.queries);
    l.mean_stages = {sum.encode_us / n, sum.score_us / n,  sum.preselect_us / n,
                     sum.sample_us / n, sum.vote_us / n,   sum.dedup_us / n,
                     sum.total_us / n};
    report.rankers.push_back(std::move(l));
  }
  const RankerLatency* constrained = report.Find("mcvae");
  const RankerLatency* unconstrained = report.Find("mcvae-unconstrained");
  if (constrained && unconstrained) {
    report.vote_speedup = unconstrained->vote_us.p50 / constrained->vote_us.p50;
    report.sample_vote_speedup =
        unconstrained->sample_vote_us.p50 / constrained->sample_vote_us.p50;
  }
  const std::size_t d = models.artifact.dim();
  const std::size_t z = models.cvae ? models.cvae->z_dim() : 0;
  const std::size_t h = models.cvae ? models.cvae->hidden() : 0;
  report.cost = CountMultiplications(models.artifact.size(), std::min(pipeline.k, models.artifact.size()),
                                     pipeline.samples, d, z, h);
  return report;
}

nlohmann::json BenchReport::ToJson() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rankers) {
    rows.push_back({{"ranker", r.ranker},
                    {"queries", r.queries},
                    {"total_us", smartreply::ToJson(r.total_us)},
                    {"sample_vote_us", smartreply::ToJson(r.sample_vote_us)},
                    {"vote_us", smartreply::ToJson(r.vote_us)},
                    {"mean_stages_us", r.mean_stages.ToJson()}});
  }
  return {{"rankers", rows},
          {"vote_speedup", vote_speedup},
          {"sample_vote_speedup", sample_vote_speedup},
          {"cost", cost.ToJson()},
          {"pipeline", pipeline}};
}

std::string BenchReport::ToTable() const {
  std::string out = fmt::format("{:<20} {:>10} {:>10} {:>10} {:>12} {:>12}\n", "ranker",
                                "p50 us", "p95 us", "p99 us", "vote p50", "samp+vote p50");
  for (const auto& r : rankers) {
    out += fmt::format("{:<20} {:>10.1f} {:>10.1f} {:>10.1f} {:>12.1f} {:>12.1f}\n", r.ranker,
                       r.total_us.p50, r.total_us.p95, r.total_us.p99, r.vote_us.p50,
                       r.sample_vote_us.p50);
  }
  if (vote_speedup > 0) {
    out += fmt::format("constrained vote stage speedup: {:.1f}x (analytic R/K = {:.1f}x)\n",
                       vote_speedup, cost.scoring_ratio);
    out += fmt::format("sample+vote stage speedup: {:.2f}x (analytic incl. decoder {:.2f}x)\n",
                       sample_vote_speedup, cost.total_ratio);
  }
  return out;
}

}  // namespace smartreply
