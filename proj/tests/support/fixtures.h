#ifndef SMARTREPLY_TESTS_SUPPORT_FIXTURES_H_
#define SMARTREPLY_TESTS_SUPPORT_FIXTURES_H_

#include <cstdint>
#include <string>
#include <vector>

#include "smartreply/corpus.h"
#include "smartreply/rng.h"

namespace smartreply::testing {

// Two intents whose replies echo the message's slot fillers, so every
// in-batch pair is individually distinguishable.
inline std::vector<MessageReplyPair> TwoIntentCorpus(std::size_t n, std::uint64_t seed) {
  const std::vector<std::string> foods = {"pizza", "sushi", "tacos", "ramen", "curry",
                                          "pho", "salad", "burgers", "thai", "bagels"};
  const std::vector<std::string> times = {"noon", "1pm", "2pm", "3pm", "4pm", "5pm",
                                          "6pm", "7pm", "8am", "9am", "10am", "11am"};
  const std::vector<std::string> items = {"report", "slides", "budget", "draft",
                                          "invoice", "contract", "proposal", "memo",
                                          "deck", "spreadsheet"};
  const std::vector<std::string> days = {"monday", "tuesday", "wednesday", "thursday",
                                         "friday", "today", "tomorrow", "tonight"};
  Rng rng(seed);
  std::vector<MessageReplyPair> out;
  while (out.size() < n) {
    if (rng.Uniform() < 0.5f) {
      const auto& f = foods[rng.Index(foods.size())];
      const auto& t = times[rng.Index(times.size())];
      auto p = MakePair("want to grab " + f + " at " + t + "?", "sure, " + f + " at " + t + " works.");
      p->message_intent = "lunch";
      p->reply_intent = "accept";
      out.push_back(*p);
    } else {
      const auto& it = items[rng.Index(items.size())];
      const auto& d = days[rng.Index(days.size())];
      auto p = MakePair("is the " + it + " done by " + d + "?", "yes, the " + it + " is done " + d + ".");
      p->message_intent = "status";
      p->reply_intent = "done";
      out.push_back(*p);
    }
  }
  return out;
}

}  // namespace smartreply::testing

#endif  // SMARTREPLY_TESTS_SUPPORT_FIXTURES_H_
