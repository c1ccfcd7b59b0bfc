#include "smartreply/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "embedded_data.h"
#include "smartreply/error.h"
#include "smartreply/rng.h"

namespace smartreply {
namespace {

bool IsWordChar(unsigned char c) {
  return std::isalnum(c) || c >= 0x80 || c == '_';
}

std::string Sanitize(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\t', ' ');
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return cols;
}

}  // namespace

Tokens Tokenize(std::string_view text) {
  Tokens tokens;
  std::string current;
  auto flush = [&]() {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
    } else if (IsWordChar(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '\'' && !current.empty() && i + 1 < text.size() &&
               IsWordChar(static_cast<unsigned char>(text[i + 1]))) {
      current.push_back('\'');
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return tokens;
}

std::string Detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::optional<MessageReplyPair> MakePair(std::string_view message,
                                         std::string_view reply,
                                         std::size_t max_length) {
  MessageReplyPair pair;
  pair.message_text = Sanitize(message);
  pair.reply_text = Sanitize(reply);
  pair.message = Tokenize(message);
  pair.reply = Tokenize(reply);
  if (pair.message.empty() || pair.reply.empty()) return std::nullopt;
  if (pair.message.size() > max_length) pair.message.resize(max_length);
  if (pair.reply.size() > max_length) pair.reply.resize(max_length);
  return pair;
}

Vocabulary::Vocabulary() : surfaces_{"<pad>", "<unk>"} {
  ids_.emplace("<pad>", kPadId);
  ids_.emplace("<unk>", kUnkId);
}

Vocabulary Vocabulary::Build(std::span<const MessageReplyPair> pairs,
                             std::int64_t min_frequency) {
  if (pairs.empty()) throw ContractError("vocabulary needs a nonempty corpus");
  Vocabulary vocab;
  vocab.min_frequency_ = min_frequency;
  for (const auto& p : pairs) {
    for (const auto& t : p.message) ++vocab.frequency_[t];
    for (const auto& t : p.reply) ++vocab.frequency_[t];
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (const auto& [tok, n] : vocab.frequency_) {
    if (n >= min_frequency && !vocab.ids_.count(tok)) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (auto& [tok, n] : kept) {
    vocab.ids_.emplace(tok, static_cast<TokenId>(vocab.surfaces_.size()));
    vocab.surfaces_.push_back(tok);
  }
  return vocab;
}

Vocabulary Vocabulary::FromSurfaces(std::vector<std::string> surfaces) {
  if (surfaces.size() < 2 || surfaces[0] != "<pad>" || surfaces[1] != "<unk>") {
    throw ContractError("vocabulary surfaces must start with <pad>, <unk>");
  }
  Vocabulary vocab;
  vocab.surfaces_ = std::move(surfaces);
  vocab.ids_.clear();
  for (std::size_t i = 0; i < vocab.surfaces_.size(); ++i) {
    vocab.ids_.emplace(vocab.surfaces_[i], static_cast<TokenId>(i));
  }
  return vocab;
}

TokenId Vocabulary::Lookup(std::string_view surface) const {
  auto it = ids_.find(std::string(surface));
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::Surface(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= surfaces_.size()) {
    throw ContractError("token id " + std::to_string(id) + " out of range");
  }
  return surfaces_[static_cast<std::size_t>(id)];
}

TokenIds Vocabulary::Encode(std::span<const std::string> tokens) const {
  TokenIds ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(Lookup(t));
  return ids;
}

std::int64_t Vocabulary::Frequency(std::string_view surface) const {
  auto it = frequency_.find(std::string(surface));
  return it == frequency_.end() ? 0 : it->second;
}

std::vector<MessageReplyPair> ReadPairsTsv(const std::filesystem::path& path,
                                           std::size_t max_length) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::vector<MessageReplyPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = SplitTabs(line);
    if (cols.size() < 2 || cols.size() > 4) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": expected 2-4 tab-separated columns, got " +
                    std::to_string(cols.size()));
    }
    auto pair = MakePair(cols[0], cols[1], max_length);
    if (!pair) continue;
    if (cols.size() > 2) pair->reply_intent = cols[2];
    if (cols.size() > 3) pair->message_intent = cols[3];
    pairs.push_back(std::move(*pair));
  }
  return pairs;
}

void WritePairsTsv(const std::filesystem::path& path,
                   std::span<const MessageReplyPair> pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus " + path.string());
  for (const auto& p : pairs) {
    out << Sanitize(p.message_text) << '\t' << Sanitize(p.reply_text);
    if (!p.reply_intent.empty() || !p.message_intent.empty()) {
      out << '\t' << p.reply_intent;
      if (!p.message_intent.empty()) out << '\t' << p.message_intent;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<MessageReplyPair> ApplyBlocklist(
    std::span<const MessageReplyPair> pairs,
    const std::unordered_set<std::string>& blocklist) {
  std::vector<MessageReplyPair> kept;
  for (const auto& p : pairs) {
    bool blocked = std::any_of(p.reply.begin(), p.reply.end(),
                               [&](const std::string& t) { return blocklist.count(t); });
    if (!blocked) kept.push_back(p);
  }
  return kept;
}

Split SplitPairs(std::span<const MessageReplyPair> pairs,
                 double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ContractError("validation fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(pairs.size())));
  std::vector<char> is_val(pairs.size(), 0);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = 1;
  Split split;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    (is_val[i] ? split.validation : split.train).push_back(pairs[i]);
  }
  return split;
}

SyntheticConfig SyntheticConfig::FromJson(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ContractError(std::string("synthetic config: ") + e.what());
  }
  SyntheticConfig config;
  try {
    config.zipf_exponent = j.value("zipf_exponent", 1.0);
    config.seed = j.value("seed", std::uint64_t{1});
    config.max_length = j.value("max_length", kDefaultMaxLength);
    for (const auto& [slot, fillers] : j.at("slots").items()) {
      config.slots[slot] = fillers.get<std::vector<std::string>>();
    }
    for (const auto& [intent, tmpls] : j.at("reply_intents").items()) {
      config.reply_templates[intent] = tmpls.get<std::vector<std::string>>();
    }
    for (const auto& ji : j.at("message_intents")) {
      MessageIntent intent;
      intent.name = ji.at("name").get<std::string>();
      if (ji.contains("weight")) intent.weight = ji.at("weight").get<double>();
      intent.message_templates = ji.at("messages").get<std::vector<std::string>>();
      for (const auto& [reply, w] : ji.at("replies").items()) {
        intent.replies.emplace_back(reply, w.get<double>());
      }
      config.intents.push_back(std::move(intent));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("synthetic config: ") + e.what());
  }
  config.Validate();
  return config;
}

SyntheticConfig SyntheticConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open synthetic config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return FromJson(ss.str());
}

SyntheticConfig SyntheticConfig::Default() {
  return FromJson(embedded::SyntheticIntentsJson());
}

namespace {

std::vector<std::string> TemplateSlots(std::string_view tmpl) {
  std::vector<std::string> slots;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string_view::npos) {
    std::size_t end = tmpl.find('}', pos);
    if (end == std::string_view::npos) {
      throw ContractError("unterminated slot in template '" + std::string(tmpl) + "'");
    }
    slots.emplace_back(tmpl.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  return slots;
}

}  // namespace

void SyntheticConfig::Validate() const {
  if (intents.size() < 5) {
    throw ContractError("synthetic config needs at least 5 intents, got " +
                        std::to_string(intents.size()));
  }
  auto check_slots = [&](const std::string& tmpl) {
    for (const auto& s : TemplateSlots(tmpl)) {
      auto it = slots.find(s);
      if (it == slots.end() || it->second.empty()) {
        throw ContractError("template '" + tmpl + "' uses unknown slot {" + s + "}");
      }
    }
  };
  std::map<std::string, std::string> owner;
  for (const auto& [intent, tmpls] : reply_templates) {
    if (tmpls.empty()) throw ContractError("reply intent " + intent + " has no templates");
    std::set<std::string> seen;
    for (const auto& t : tmpls) {
      check_slots(t);
      if (!seen.insert(t).second) {
        throw ContractError("reply intent " + intent + " lists '" + t + "' twice");
      }
      auto [it, inserted] = owner.emplace(t, intent);
      if (!inserted && it->second != intent) {
        throw ContractError("reply template '" + t + "' belongs to both " +
                            it->second + " and " + intent);
      }
    }
  }
  std::set<std::string> names;
  for (const auto& intent : intents) {
    if (!names.insert(intent.name).second) {
      throw ContractError("duplicate intent " + intent.name);
    }
    if (intent.message_templates.empty()) {
      throw ContractError("intent " + intent.name + " has no message templates");
    }
    for (const auto& t : intent.message_templates) check_slots(t);
    if (intent.replies.size() < 2) {
      throw ContractError("intent " + intent.name +
                          " needs at least 2 distinct reply intents");
    }
    for (const auto& [reply, w] : intent.replies) {
      if (!reply_templates.count(reply)) {
        throw ContractError("intent " + intent.name + " references unknown reply intent " +
                            reply);
      }
      if (!(w > 0.0)) throw ContractError("reply weights must be positive");
    }
  }
}

std::map<std::string, std::vector<std::string>> SyntheticConfig::Compatibility() const {
  std::map<std::string, std::vector<std::string>> table;
  for (const auto& intent : intents) {
    auto& row = table[intent.name];
    for (const auto& [reply, w] : intent.replies) row.push_back(reply);
  }
  return table;
}

std::vector<double> SyntheticConfig::IntentDistribution() const {
  std::vector<double> w;
  for (std::size_t i = 0; i < intents.size(); ++i) {
    w.push_back(intents[i].weight.value_or(
        1.0 / std::pow(static_cast<double>(i + 1), zipf_exponent)));
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

std::string FillTemplate(std::string_view tmpl, const SyntheticConfig& config,
                         std::map<std::string, std::string>& fills, Rng& rng) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    std::size_t close = tmpl.find('}', open);
    if (close == std::string_view::npos) {
      throw ContractError("unterminated slot in template '" + std::string(tmpl) + "'");
    }
    std::string slot(tmpl.substr(open + 1, close - open - 1));
    auto it = fills.find(slot);
    if (it == fills.end()) {
      const auto& options = config.slots.at(slot);
      it = fills.emplace(slot, options[rng.Index(options.size())]).first;
    }
    out += it->second;
    pos = close + 1;
  }
  return out;
}

std::vector<MessageReplyPair> GenerateSynthetic(const SyntheticConfig& config,
                                                std::int64_t n_pairs,
                                                std::uint64_t seed) {
  if (n_pairs <= 0) throw ContractError("n_pairs must be positive");
  config.Validate();
  Rng rng(seed);
  const std::vector<double> intent_dist = config.IntentDistribution();
  std::discrete_distribution<std::size_t> pick_intent(intent_dist.begin(),
                                                      intent_dist.end());
  std::vector<std::discrete_distribution<std::size_t>> pick_reply;
  for (const auto& intent : config.intents) {
    std::vector<double> w;
    for (const auto& r : intent.replies) w.push_back(r.second);
    pick_reply.emplace_back(w.begin(), w.end());
  }
  std::vector<MessageReplyPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n_pairs));
  while (static_cast<std::int64_t>(pairs.size()) < n_pairs) {
    const std::size_t ii = pick_intent(rng.engine());
    const MessageIntent& intent = config.intents[ii];
    const std::string& mt =
        intent.message_templates[rng.Index(intent.message_templates.size())];
    const auto& reply_intent = intent.replies[pick_reply[ii](rng.engine())].first;
    const auto& reply_tmpls = config.reply_templates.at(reply_intent);
    const std::string& rt = reply_tmpls[rng.Index(reply_tmpls.size())];
    std::map<std::string, std::string> fills;
    std::string message = FillTemplate(mt, config, fills, rng);
    std::string reply = FillTemplate(rt, config, fills, rng);
    auto pair = MakePair(message, reply, config.max_length);
    if (!pair) continue;
    pair->reply_intent = reply_intent;
    pair->message_intent = intent.name;
    pairs.push_back(std::move(*pair));
  }
  return pairs;
}

}  // namespace smartreply
