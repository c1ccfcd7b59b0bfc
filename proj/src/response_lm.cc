#include "smartreply/response_lm.h"

#include <algorithm>
#include <cmath>

#include "smartreply/error.h"

namespace smartreply {

std::string ToString(LmNormalize n) { return n == LmNormalize::kMean ? "mean" : "sum"; }

LmNormalize ParseLmNormalize(const std::string& name) {
  if (name == "mean") return LmNormalize::kMean;
  if (name == "sum") return LmNormalize::kSum;
  throw ContractError("lm_normalize must be 'mean' or 'sum', got '" + name + "'");
}

namespace {

void CheckConfig(const NgramLmConfig& config) {
  if (config.order < 1) throw ContractError("lm order must be >= 1");
  if (!(config.discount > 0.0 && config.discount < 1.0)) {
    throw ContractError("lm discount must lie in (0, 1)");
  }
}

}  // namespace

NgramLm NgramLm::Train(std::span<const Tokens> sentences, NgramLmConfig config) {
  CheckConfig(config);
  if (sentences.empty()) throw ContractError("lm training needs a nonempty corpus");
  NgramLm lm;
  lm.config_ = config;
  std::map<std::string, int> seen;
  for (const auto& s : sentences) {
    for (const auto& t : s) seen.emplace(t, 0);
  }
  seen.erase(kBos);
  seen.erase(kEos);
  seen.erase(kUnk);
  for (const auto& [surface, unused] : seen) lm.vocab_.push_back(surface);
  lm.vocab_.push_back(kEos);
  lm.vocab_.push_back(kUnk);
  for (std::size_t i = 0; i < lm.vocab_.size(); ++i) {
    lm.ids_.emplace(lm.vocab_[i], static_cast<std::int32_t>(i));
  }
  lm.bos_id_ = static_cast<std::int32_t>(lm.vocab_.size());
  lm.eos_id_ = lm.ids_.at(kEos);
  lm.unk_id_ = lm.ids_.at(kUnk);
  const std::size_t n = static_cast<std::size_t>(config.order);
  for (const auto& s : sentences) {
    Key seq(n - 1, lm.bos_id_);
    for (const auto& t : s) seq.push_back(lm.Id(t));
    seq.push_back(lm.eos_id_);
    for (std::size_t i = n - 1; i < seq.size(); ++i) {
      Key gram(seq.begin() + static_cast<std::ptrdiff_t>(i + 1 - n),
               seq.begin() + static_cast<std::ptrdiff_t>(i + 1));
      lm.top_counts_[gram] += 1.0;
    }
  }
  lm.Derive();
  return lm;
}

NgramLm NgramLm::FromCounts(NgramLmConfig config, std::vector<std::string> vocabulary,
                            const Tensor& ngrams) {
  CheckConfig(config);
  NgramLm lm;
  lm.config_ = config;
  lm.vocab_ = std::move(vocabulary);
  for (std::size_t i = 0; i < lm.vocab_.size(); ++i) {
    lm.ids_.emplace(lm.vocab_[i], static_cast<std::int32_t>(i));
  }
  if (!lm.ids_.count(kEos) || !lm.ids_.count(kUnk)) {
    throw ContractError("lm vocabulary lacks </s> or <unk>");
  }
  lm.bos_id_ = static_cast<std::int32_t>(lm.vocab_.size());
  lm.eos_id_ = lm.ids_.at(kEos);
  lm.unk_id_ = lm.ids_.at(kUnk);
  const std::size_t n = static_cast<std::size_t>(config.order);
  if (ngrams.cols() != n + 1) {
    throw DimensionError("lm count table needs " + std::to_string(n + 1) +
                         " columns, got " + ShapeToString(ngrams.shape()));
  }
  for (std::size_t r = 0; r < ngrams.rows(); ++r) {
    Key gram;
    for (std::size_t c = 0; c < n; ++c) {
      const auto id = static_cast<std::int32_t>(ngrams.at(r, c));
      if (id < 0 || id > lm.bos_id_) throw ContractError("lm count table id out of range");
      gram.push_back(id);
    }
    lm.top_counts_[gram] = ngrams.at(r, n);
  }
  lm.Derive();
  return lm;
}

void NgramLm::Derive() {
  const std::size_t n = static_cast<std::size_t>(config_.order);
  stats_.assign(n, {});
  for (const auto& [gram, count] : top_counts_) {
    Key h(gram.begin(), gram.end() - 1);
    stats_[n - 1][h].counts[gram.back()] += count;
  }
  // Lower orders use continuation counts: the number of distinct left
  // extensions each shorter n-gram has one order up.
  for (std::size_t k = n - 1; k-- > 0;) {
    for (const auto& [h, st] : stats_[k + 1]) {
      Key shorter(h.begin() + 1, h.end());
      for (const auto& [w, c] : st.counts) {
        if (c > 0.0) stats_[k][shorter].counts[w] += 1.0;
      }
    }
  }
  for (auto& level : stats_) {
    for (auto& [h, st] : level) {
      st.total = 0.0;
      st.distinct = 0.0;
      for (const auto& [w, c] : st.counts) {
        st.total += c;
        if (c > 0.0) st.distinct += 1.0;
      }
    }
  }
}

std::int32_t NgramLm::Id(const std::string& surface) const {
  auto it = ids_.find(surface);
  return it == ids_.end() ? unk_id_ : it->second;
}

double NgramLm::ProbabilityIds(const std::int32_t* history, std::size_t history_len,
                               std::int32_t token) const {
  // history holds exactly order-1 ids (already padded).
  double p = 1.0 / static_cast<double>(vocab_.size());
  for (std::size_t k = 0; k < stats_.size(); ++k) {
    Key h(history + (history_len - k), history + history_len);
    auto it = stats_[k].find(h);
    if (it == stats_[k].end() || it->second.total <= 0.0) continue;
    const ContextStats& st = it->second;
    auto c = st.counts.find(token);
    const double count = c == st.counts.end() ? 0.0 : c->second;
    const double d = config_.discount;
    p = std::max(count - d, 0.0) / st.total + d * st.distinct / st.total * p;
  }
  return p;
}

double NgramLm::Probability(std::span<const std::string> context,
                            const std::string& token) const {
  const std::size_t m = static_cast<std::size_t>(config_.order) - 1;
  Key h(m, bos_id_);
  const std::size_t take = std::min(m, context.size());
  for (std::size_t i = 0; i < take; ++i) {
    h[m - take + i] = Id(context[context.size() - take + i]);
  }
  return ProbabilityIds(h.data(), m, Id(token));
}

std::vector<double> NgramLm::Distribution(std::span<const std::string> context) const {
  std::vector<double> out;
  out.reserve(vocab_.size());
  for (const auto& w : vocab_) out.push_back(Probability(context, w));
  return out;
}

double NgramLm::SumLogProb(std::span<const std::string> tokens) const {
  const std::size_t m = static_cast<std::size_t>(config_.order) - 1;
  Key seq(m, bos_id_);
  for (const auto& t : tokens) seq.push_back(Id(t));
  seq.push_back(eos_id_);
  double total = 0.0;
  for (std::size_t i = m; i < seq.size(); ++i) {
    total += std::log(ProbabilityIds(seq.data() + (i - m), m, seq[i]));
  }
  return total;
}

double NgramLm::Score(std::span<const std::string> tokens) const {
  if (tokens.empty()) throw ContractError("lm score needs a nonempty reply");
  const double total = SumLogProb(tokens);
  if (config_.normalize == LmNormalize::kSum) return total;
  return total / static_cast<double>(tokens.size() + 1);
}

double NgramLm::Perplexity(std::span<const Tokens> sentences) const {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& s : sentences) {
    total += SumLogProb(s);
    count += s.size() + 1;
  }
  if (count == 0) throw ContractError("perplexity needs at least one sentence");
  return std::exp(-total / static_cast<double>(count));
}

Tensor NgramLm::CountTable() const {
  const std::size_t n = static_cast<std::size_t>(config_.order);
  Tensor out = Tensor::Zeros(top_counts_.size(), n + 1);
  std::size_t r = 0;
  for (const auto& [gram, count] : top_counts_) {
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) = static_cast<float>(gram[c]);
    out.at(r, n) = static_cast<float>(count);
    ++r;
  }
  return out;
}

}  // namespace smartreply
