#ifndef SMARTREPLY_BENCH_H_
#define SMARTREPLY_BENCH_H_

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartreply/inference.h"

namespace smartreply {

struct BenchConfig {
  std::size_t queries = 1000;
  std::size_t warmup = 100;
  // Any of matching, mmr, mcvae, mcvae-unconstrained.
  std::vector<std::string> rankers = {"matching", "mmr", "mcvae", "mcvae-unconstrained"};

  void Validate() const;
};

struct Percentiles {
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double mean = 0.0;
};

// Nearest-rank percentiles; `samples` need not be sorted.
Percentiles Summarize(std::vector<double> samples);

struct RankerLatency {
  std::string ranker;
  std::size_t queries = 0;
  Percentiles total_us;
  Percentiles sample_vote_us;
  Percentiles vote_us;
  StageTimings mean_stages;
};

struct BenchReport {
  std::vector<RankerLatency> rankers;
  // Unconstrained over constrained p50, both present only when both
  // mcvae variants were measured.
  double vote_speedup = 0.0;         // candidate scoring and argmax
  double sample_vote_speedup = 0.0;  // including the prior decode
  CostReport cost;
  nlohmann::json pipeline;

  const RankerLatency* Find(const std::string& ranker) const;
  nlohmann::json ToJson() const;
  std::string ToTable() const;
};

// Runs `config.warmup` untimed then `config.queries` timed requests per
// ranker, cycling through `messages`.
BenchReport RunBench(const SuggestionModels& models, std::span<const std::string> messages,
                     const PipelineConfig& pipeline, const BenchConfig& config);

}  // namespace smartreply

#endif  // SMARTREPLY_BENCH_H_
