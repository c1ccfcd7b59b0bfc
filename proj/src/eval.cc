#include "smartreply/eval.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "smartreply/error.h"

namespace smartreply {

RankerSpec ParseRankerSpec(const std::string& name) {
  RankerSpec s;
  s.name = name;
  std::string base = name;
  if (base.size() > 5 && base.ends_with("-nolc")) {
    s.dedupe = false;
    base.resize(base.size() - 5);
  }
  if (base == "mcvae-mmr") {
    s.mmr_preselect = true;
    base = "mcvae";
  }
  s.ranker = ParseRanker(base);
  return s;
}

std::vector<RankerSpec> ParseRankerList(const std::string& comma_separated) {
  std::vector<RankerSpec> out;
  std::stringstream ss(comma_separated);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(ParseRankerSpec(item));
  }
  if (out.empty()) throw ContractError("no rankers given");
  return out;
}

std::vector<EvalMessage> SelectEvalMessages(std::span<const MessageReplyPair> held_out,
                                            std::size_t limit) {
  std::vector<EvalMessage> out;
  std::set<std::string> seen;
  for (const auto& p : held_out) {
    if (out.size() >= limit) break;
    if (seen.insert(p.message_text).second) out.push_back({p.message_text, p.message_intent});
  }
  return out;
}

bool IsDuplicateList(std::span<const Suggestion> top, const ResponseSetArtifact& artifact) {
  for (std::size_t i = 0; i < top.size(); ++i) {
    for (std::size_t j = i + 1; j < top.size(); ++j) {
      if (artifact.cluster_ids[top[i].id] == artifact.cluster_ids[top[j].id]) return true;
      const std::string& a = artifact.intents[top[i].id];
      if (!a.empty() && a == artifact.intents[top[j].id]) return true;
    }
  }
  return false;
}

bool IsDefect(std::span<const Suggestion> top, const std::string& message_intent,
              const std::map<std::string, std::vector<std::string>>& compatibility) {
  if (top.empty()) return true;
  auto it = compatibility.find(message_intent);
  if (it == compatibility.end()) return true;
  return std::find(it->second.begin(), it->second.end(), top[0].intent) == it->second.end();
}

std::size_t DistinctIntents(std::span<const Suggestion> top) {
  std::set<std::string> s;
  for (const auto& x : top) {
    if (!x.intent.empty()) s.insert(x.intent);
  }
  return s.size();
}

PipelineConfig ConfigFor(const RankerSpec& spec, const PipelineConfig& base) {
  PipelineConfig c = base;
  c.dedupe = spec.dedupe;
  c.use_mmr_preselect = spec.mmr_preselect;
  return c;
}

const EvalRow& EvalReport::Row(const std::string& ranker) const {
  for (const auto& r : rows) {
    if (r.ranker == ranker) return r;
  }
  throw ContractError("no eval row for ranker " + ranker);
}

nlohmann::json EvalReport::ToJson() const {
  nlohmann::json out = {{"baseline", baseline}, {"pipeline", pipeline}};
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows) {
    rs.push_back({{"ranker", r.ranker},
                  {"messages", r.messages},
                  {"duplicate_rate", r.duplicate_rate},
                  {"defect_rate", r.defect_rate},
                  {"intent_coverage", r.intent_coverage},
                  {"duplicate_change", r.duplicate_change},
                  {"defect_change", r.defect_change},
                  {"defect_delta", r.defect_delta},
                  {"coverage_change", r.coverage_change}});
  }
  out["rows"] = rs;
  return out;
}

namespace {

double Relative(double x, double base) {
  if (base == 0.0) return x == 0.0 ? 0.0 : 1.0;
  return (x - base) / base;
}

}  // namespace

EvalReport Evaluate(const SuggestionModels& models, std::span<const EvalMessage> messages,
                    const std::map<std::string, std::vector<std::string>>& compatibility,
                    std::span<const RankerSpec> rankers, const PipelineConfig& config) {
  if (rankers.empty()) throw ContractError("no rankers to evaluate");
  if (messages.empty()) throw ContractError("no evaluation messages");
  EvalReport report;
  report.baseline = rankers.front().name;
  report.pipeline = config.ToJson();
  for (const auto& spec : rankers) {
    const PipelineConfig c = ConfigFor(spec, config);
    EvalRow row;
    row.ranker = spec.name;
    std::size_t dup = 0, defect = 0, covered = 0;
    for (const auto& m : messages) {
      SuggestionResult r = Suggest(models, m.text, spec.ranker, c);
      dup += IsDuplicateList(r.suggestions, models.artifact);
      defect += IsDefect(r.suggestions, m.intent, compatibility);
      covered += DistinctIntents(r.suggestions);
    }
    const double n = static_cast<double>(messages.size());
    row.messages = messages.size();
    row.duplicate_rate = static_cast<double>(dup) / n;
    row.defect_rate = static_cast<double>(defect) / n;
    row.intent_coverage = static_cast<double>(covered) / n;
    report.rows.push_back(row);
  }
  const EvalRow base = report.rows.front();
  for (auto& r : report.rows) {
    r.duplicate_change = Relative(r.duplicate_rate, base.duplicate_rate);
    r.defect_change = Relative(r.defect_rate, base.defect_rate);
    r.defect_delta = r.defect_rate - base.defect_rate;
    r.coverage_change = Relative(r.intent_coverage, base.intent_coverage);
  }
  return report;
}

}  // namespace smartreply
