#include "smartreply/service.h"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "support/models.h"

namespace smartreply {
namespace {

namespace fs = std::filesystem;

nlohmann::json WithoutTimings(nlohmann::json j) {
  if (j.contains("timings")) j.erase("timings");
  if (j.contains("results")) {
    for (auto& r : j["results"]) r.erase("timings");
  }
  return j;
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    log_ = fs::temp_directory_path() /
           ("smartreply_clicks_" + std::to_string(::getpid()) + ".jsonl");
    fs::remove(log_);
    service_ = std::make_unique<SuggestionService>(models_, PipelineConfig{}, log_, "abc123");
  }
  void TearDown() override { fs::remove(log_); }

  std::vector<std::string> LogLines() const {
    std::ifstream in(log_);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
  }

  SuggestionModels models_ = testing::TinyModels();
  fs::path log_;
  std::unique_ptr<SuggestionService> service_;
};

TEST_F(ServiceTest, SuggestIsDeterministicAndEchoesParams) {
  const std::string body =
      R"({"message": "want to grab pizza at noon?", "ranker": "mcvae", "params": {"k": 5, "s": 40}})";
  HttpReply a = service_->Suggest(body);
  HttpReply b = service_->Suggest(body);
  ASSERT_EQ(a.status, 200) << a.body.dump();
  EXPECT_EQ(WithoutTimings(a.body), WithoutTimings(b.body));
  EXPECT_EQ(a.body["params"]["k"], 5);
  EXPECT_EQ(a.body["params"]["s"], 40);
  EXPECT_EQ(a.body["params"]["seed"], PipelineConfig{}.seed);
  EXPECT_LE(a.body["suggestions"].size(), 3u);
  for (const auto& s : a.body["suggestions"]) EXPECT_TRUE(s.contains("votes"));

  HttpReply m1 = service_->Suggest(R"({"message": "is the memo done by friday?", "ranker": "matching"})");
  HttpReply m2 = service_->Suggest(R"({"message": "is the memo done by friday?", "ranker": "matching"})");
  EXPECT_EQ(WithoutTimings(m1.body), WithoutTimings(m2.body));
}

TEST_F(ServiceTest, ResponsesDoNotDependOnRequestOrder) {
  std::vector<std::string> bodies;
  for (const char* r : {"matching", "mmr", "mcvae"}) {
    for (const char* m : {"want to grab sushi at 2pm?", "is the deck done by monday?", "hello?"}) {
      bodies.push_back(nlohmann::json{{"message", m}, {"ranker", r}}.dump());
    }
  }
  std::map<std::string, nlohmann::json> first;
  for (const auto& b : bodies) first[b] = WithoutTimings(service_->Suggest(b).body);
  std::mt19937 g(3);
  std::shuffle(bodies.begin(), bodies.end(), g);
  for (const auto& b : bodies) EXPECT_EQ(WithoutTimings(service_->Suggest(b).body), first[b]);
}

TEST_F(ServiceTest, CompareReturnsThreeRankers) {
  HttpReply r = service_->Compare(R"({"message": "want to grab tacos at 5pm?", "params": {"beta": 0.3}})");
  ASSERT_EQ(r.status, 200) << r.body.dump();
  ASSERT_EQ(r.body["results"].size(), 3u);
  std::vector<std::string> names;
  for (const auto& block : r.body["results"]) {
    names.push_back(block["ranker"]);
    EXPECT_LE(block["suggestions"].size(), 3u);
    EXPECT_GT(block["timings"]["total_us"].get<double>(), 0.0);
    EXPECT_DOUBLE_EQ(block["params"]["beta"].get<double>(), 0.3);
  }
  EXPECT_EQ(names, (std::vector<std::string>{"matching", "mmr", "mcvae"}));
}

TEST_F(ServiceTest, ClickAppendsOneLinePerCall) {
  for (int i = 0; i < 3; ++i) {
    HttpReply r = service_->Click(
        R"({"message": "want to meet up for lunch?", "chosen_text": "sure!", "ranker": "mcvae"})");
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(LogLines().size(), static_cast<std::size_t>(i + 1));
  }
  auto entry = nlohmann::json::parse(LogLines().back());
  EXPECT_EQ(entry["chosen_text"], "sure!");
  EXPECT_EQ(service_->Click(R"({"message": "x"})").status, 400);
  EXPECT_EQ(LogLines().size(), 3u);
}

TEST_F(ServiceTest, ConcurrentClicksNeverInterleave) {
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) {
        nlohmann::json body = {{"message", std::string(200, 'a' + t)},
                               {"chosen_text", std::to_string(i)},
                               {"ranker", "matching"}};
        service_->Click(body.dump());
      }
    });
  }
  for (auto& t : threads) t.join();
  auto lines = LogLines();
  ASSERT_EQ(lines.size(), 400u);
  for (const auto& l : lines) {
    auto j = nlohmann::json::parse(l, nullptr, false);
    ASSERT_FALSE(j.is_discarded()) << l;
    const std::string msg = j["message"];
    EXPECT_EQ(std::count(msg.begin(), msg.end(), msg[0]), 200);
  }
}

TEST_F(ServiceTest, MalformedRequestsNameTheField) {
  struct Case {
    const char* body;
    const char* field;
  };
  for (const Case& c : std::vector<Case>{
           {"not json", "body"},
           {"[1, 2]", "body"},
           {R"({"ranker": "mcvae"})", "message"},
           {R"({"message": 7})", "message"},
           {R"({"message": "hi", "ranker": "best"})", "ranker"},
           {R"({"message": "hi", "params": {"k": "many"}})", "params.k"},
           {R"({"message": "hi", "params": {"k": 1}})", "params.k"},
           {R"({"message": "hi", "params": {"beta": 2}})", "params.beta"},
           {R"({"message": "hi", "params": {"s": 0}})", "params.s"},
           {R"({"message": "hi", "params": {"temperature": 1}})", "params.temperature"},
           {R"({"message": "hi", "params": []})", "params"},
           {R"({"message": "   "})", "message"},
       }) {
    HttpReply r = service_->Suggest(c.body);
    EXPECT_EQ(r.status, 400) << c.body;
    EXPECT_EQ(r.body["field"], c.field) << c.body;
  }
}

TEST_F(ServiceTest, OversizeMessageIs413) {
  std::string long_message;
  for (int i = 0; i < 31; ++i) long_message += "word ";
  HttpReply r = service_->Suggest(nlohmann::json{{"message", long_message}}.dump());
  EXPECT_EQ(r.status, 413);
  EXPECT_EQ(r.body["field"], "message");
  std::string fits;
  for (int i = 0; i < 30; ++i) fits += "word ";
  EXPECT_EQ(service_->Suggest(nlohmann::json{{"message", fits}}.dump()).status, 200);
  EXPECT_EQ(service_->Compare(nlohmann::json{{"message", long_message}}.dump()).status, 413);
}

TEST_F(ServiceTest, HealthAndConfig) {
  HttpReply h = service_->Health();
  EXPECT_EQ(h.body["status"], "ok");
  EXPECT_EQ(h.body["model_hash"], "abc123");
  EXPECT_EQ(service_->Config().body, PipelineConfig{}.ToJson());
}

TEST_F(ServiceTest, ServesOverHttp) {
  httplib::Server server;
  RegisterRoutes(server, *service_);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  auto health = client.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(nlohmann::json::parse(health->body)["model_hash"], "abc123");

  auto config = client.Get("/config");
  ASSERT_TRUE(config);
  EXPECT_EQ(nlohmann::json::parse(config->body), PipelineConfig{}.ToJson());

  auto suggest = client.Post("/suggest", R"({"message": "want to grab pho at 1pm?", "ranker": "mmr"})",
                             "application/json");
  ASSERT_TRUE(suggest);
  EXPECT_EQ(suggest->status, 200);
  EXPECT_EQ(nlohmann::json::parse(suggest->body)["ranker"], "mmr");

  auto compare = client.Post("/compare", R"({"message": "want to grab pho at 1pm?"})", "application/json");
  ASSERT_TRUE(compare);
  EXPECT_EQ(nlohmann::json::parse(compare->body)["results"].size(), 3u);

  auto click = client.Post("/click", R"({"message": "a", "chosen_text": "b", "ranker": "mmr"})",
                           "application/json");
  ASSERT_TRUE(click);
  EXPECT_EQ(click->status, 200);
  EXPECT_EQ(LogLines().size(), 1u);

  auto bad = client.Post("/suggest", R"({"message": 1})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(nlohmann::json::parse(bad->body)["field"], "message");

  server.stop();
  thread.join();
}

}  // namespace
}  // namespace smartreply
