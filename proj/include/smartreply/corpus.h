#ifndef SMARTREPLY_CORPUS_H_
#define SMARTREPLY_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace smartreply {

using TokenId = std::int32_t;
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr std::size_t kDefaultMaxLength = 30;

using Tokens = std::vector<std::string>;
using TokenIds = std::vector<TokenId>;

// Lowercases, splits on whitespace and splits punctuation marks into their
// own tokens. Apostrophes inside a word stay attached ("can't", "i'm").
Tokens Tokenize(std::string_view text);
// Space-joined surface form; Tokenize(Detokenize(t)) == t for tokenizer
// output.
std::string Detokenize(std::span<const std::string> tokens);

struct MessageReplyPair {
  std::string message_text;
  std::string reply_text;
  Tokens message;
  Tokens reply;
  // Ground-truth labels; empty for real data.
  std::string reply_intent;
  std::string message_intent;
};

// Tokenizes and truncates both sides to `max_length`. Returns nullopt when
// either side is empty after tokenization.
std::optional<MessageReplyPair> MakePair(std::string_view message,
                                         std::string_view reply,
                                         std::size_t max_length = kDefaultMaxLength);

class Vocabulary {
 public:
  Vocabulary();

  // Ids are assigned by descending frequency, ties broken lexicographically;
  // 0 and 1 are reserved for padding and unknown.
  static Vocabulary Build(std::span<const MessageReplyPair> pairs,
                          std::int64_t min_frequency);
  // Restores a frozen vocabulary from its id-ordered surface list (as
  // produced by surfaces()).
  static Vocabulary FromSurfaces(std::vector<std::string> surfaces);

  TokenId Lookup(std::string_view surface) const;
  const std::string& Surface(TokenId id) const;
  TokenIds Encode(std::span<const std::string> tokens) const;
  std::int64_t Frequency(std::string_view surface) const;
  std::size_t size() const { return surfaces_.size(); }
  std::int64_t min_frequency() const { return min_frequency_; }
  const std::vector<std::string>& surfaces() const { return surfaces_; }

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TokenId> ids_;
  std::unordered_map<std::string, std::int64_t> frequency_;
  std::int64_t min_frequency_ = 1;
};

// TSV corpus: message \t reply [\t reply_intent [\t message_intent]].
std::vector<MessageReplyPair> ReadPairsTsv(const std::filesystem::path& path,
                                           std::size_t max_length = kDefaultMaxLength);
void WritePairsTsv(const std::filesystem::path& path,
                   std::span<const MessageReplyPair> pairs);

// Drops pairs whose reply contains a blocklisted token.
std::vector<MessageReplyPair> ApplyBlocklist(
    std::span<const MessageReplyPair> pairs,
    const std::unordered_set<std::string>& blocklist);

struct Split {
  std::vector<MessageReplyPair> train;
  std::vector<MessageReplyPair> validation;
};

// Seeded, disjoint and exhaustive. The validation part holds
// round(n * fraction) pairs; both parts keep corpus order.
Split SplitPairs(std::span<const MessageReplyPair> pairs,
                 double validation_fraction, std::uint64_t seed);

// Intent-templated conversation generator.
struct MessageIntent {
  std::string name;
  // Relative weight; when absent the Zipf weight 1/rank^s is used.
  std::optional<double> weight;
  std::vector<std::string> message_templates;
  // Compatible reply intents with their conditional weights.
  std::vector<std::pair<std::string, double>> replies;
};

struct SyntheticConfig {
  std::vector<MessageIntent> intents;
  // Reply intent -> surface templates. Templates may reference {slot}s;
  // a slot also present in the message reuses the message's filler.
  std::map<std::string, std::vector<std::string>> reply_templates;
  std::map<std::string, std::vector<std::string>> slots;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 1;
  std::size_t max_length = kDefaultMaxLength;

  static SyntheticConfig FromJson(std::string_view json);
  static SyntheticConfig Load(const std::filesystem::path& path);
  // The shipped default (data/synthetic_intents.json).
  static SyntheticConfig Default();

  // Throws ContractError on fewer than 5 intents, an intent with fewer than
  // 2 reply intents, unknown reply intents or slots, or a reply template
  // listed under two reply intents.
  void Validate() const;

  // Message intent -> reply intents it accepts.
  std::map<std::string, std::vector<std::string>> Compatibility() const;
  // Normalised intent sampling distribution in declaration order.
  std::vector<double> IntentDistribution() const;
};

std::vector<MessageReplyPair> GenerateSynthetic(const SyntheticConfig& config,
                                                std::int64_t n_pairs,
                                                std::uint64_t seed);

// Replaces {slot} markers using `fills`, drawing unfilled slots from the
// config and recording them in `fills`.
class Rng;
std::string FillTemplate(std::string_view tmpl, const SyntheticConfig& config,
                         std::map<std::string, std::string>& fills, Rng& rng);

}  // namespace smartreply

#endif  // SMARTREPLY_CORPUS_H_
