// Command-line driver for the desk-scale lifecycle:
//   gen-corpus -> train-matching -> train-lm -> build-response-set
//   -> train-cvae -> eval / bench / suggest / serve
// Every subcommand shares one run directory (--out) and one JSON config.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "smartreply/error.h"
#include "smartreply/model_io.h"
#include "smartreply/service.h"
#include "smartreply/stages.h"

namespace fs = std::filesystem;
using namespace smartreply;

namespace {

constexpr int kContractExit = 1;
constexpr int kIoExit = 2;

struct Common {
  std::string config_path;
  std::string out = "run";
  std::optional<std::uint64_t> seed;
  std::string lexical_tables;
};

SystemConfig LoadConfig(const Common& c) {
  SystemConfig config = c.config_path.empty() ? SystemConfig{} : SystemConfig::Load(c.config_path);
  if (c.seed) config = config.WithSeed(*c.seed);
  config.Validate();
  return config;
}

LexicalTables LoadTables(const Common& c) {
  return c.lexical_tables.empty() ? LexicalTables::Default() : LexicalTables::Load(c.lexical_tables);
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void AddCommon(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "System config JSON")->check(CLI::ExistingFile);
  app->add_option("-o,--out", c.out, "Run directory")->capture_default_str();
  app->add_option("--seed", c.seed, "Re-derive every stage seed from this value");
  app->add_option("--lexical-tables", c.lexical_tables, "Synonym/negation tables JSON");
}

httplib::Server* g_server = nullptr;

void StopServer(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smart reply: matching, diversification and M-CVAE suggestions"};
  app.require_subcommand(1);
  Common common;
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  auto* show = app.add_subcommand("show-config", "Print the effective config as JSON");
  AddCommon(show, common);

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic corpus and split it");
  AddCommon(gen, common);
  std::optional<std::int64_t> pairs;
  std::string synthetic;
  gen->add_option("--pairs", pairs, "Number of message/reply pairs");
  gen->add_option("--synthetic", synthetic, "Intent templates JSON")->check(CLI::ExistingFile);

  auto* train_matching = app.add_subcommand("train-matching", "Train the dual encoder");
  AddCommon(train_matching, common);
  std::optional<int> matching_epochs;
  train_matching->add_option("--epochs", matching_epochs, "Training epochs");

  auto* train_lm = app.add_subcommand("train-lm", "Train the n-gram response LM");
  AddCommon(train_lm, common);

  auto* build = app.add_subcommand("build-response-set", "Select, encode and cluster responses");
  AddCommon(build, common);
  std::optional<std::size_t> freq_top, lm_top;
  build->add_option("--freq-top", freq_top, "Frequency cut");
  build->add_option("--lm-top", lm_top, "LM-score cut");

  auto* train_cvae = app.add_subcommand("train-cvae", "Train the CVAE on the frozen encoder");
  AddCommon(train_cvae, common);
  std::optional<int> cvae_epochs;
  std::optional<float> kl_weight;
  train_cvae->add_option("--epochs", cvae_epochs, "Training epochs");
  train_cvae->add_option("--kl-weight", kl_weight, "Weight of the KL term");

  auto* eval = app.add_subcommand("eval", "Duplicate/defect proxies per ranker");
  AddCommon(eval, common);
  std::string rankers = "matching-nolc,matching,mmr,mcvae";
  std::optional<std::size_t> eval_messages;
  eval->add_option("--rankers", rankers, "Comma-separated rankers; the first is the baseline")
      ->capture_default_str();
  eval->add_option("--messages", eval_messages, "Number of held-out messages");

  auto* bench = app.add_subcommand("bench", "Latency percentiles per ranker");
  AddCommon(bench, common);
  BenchConfig bench_config;
  bench->add_option("--queries", bench_config.queries)->capture_default_str();
  bench->add_option("--warmup", bench_config.warmup)->capture_default_str();
  bench->add_option("--rankers", bench_config.rankers)->delimiter(',');

  auto* suggest = app.add_subcommand("suggest", "Suggest replies for one message");
  AddCommon(suggest, common);
  std::string message, ranker = "mcvae";
  std::optional<double> beta;
  std::optional<float> alpha;
  std::optional<std::size_t> k, samples;
  suggest->add_option("-m,--message", message, "Incoming message")->required();
  suggest->add_option("-r,--ranker", ranker, "matching, mmr or mcvae")->capture_default_str();
  suggest->add_option("--alpha", alpha);
  suggest->add_option("--beta", beta);
  suggest->add_option("--k", k);
  suggest->add_option("--s", samples);

  auto* serve = app.add_subcommand("serve", "HTTP suggestion service");
  AddCommon(serve, common);
  std::string host = "127.0.0.1", click_log;
  int port = 8080;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--click-log", click_log, "JSON-lines click log (default <out>/clicks.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kContractExit;
  }
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);
  const fs::path run = common.out;

  try {
    SystemConfig config = LoadConfig(common);
    if (*show) {
      std::cout << config.ToJson().dump(2) << "\n";
    } else if (*gen) {
      if (pairs) config.pairs = *pairs;
      config.Validate();
      GenerateCorpusStage(config, synthetic.empty() ? std::string() : ReadText(synthetic), run);
    } else if (*train_matching) {
      if (matching_epochs) config.matching.epochs = *matching_epochs;
      config.Validate();
      TrainingReport r = TrainMatchingToRun(config, run);
      std::cout << r.ToJson().dump(2) << "\n";
    } else if (*train_lm) {
      TrainLmToRun(config, run);
    } else if (*build) {
      if (freq_top) config.response_set.freq_top = *freq_top;
      if (lm_top) config.response_set.lm_top = *lm_top;
      BuildResponseSetToRun(config, LoadTables(common), run);
    } else if (*train_cvae) {
      if (cvae_epochs) config.cvae.epochs = *cvae_epochs;
      if (kl_weight) config.cvae.kl_weight = *kl_weight;
      config.Validate();
      CvaeTrainingReport r = TrainCvaeToRun(config, run);
      std::cout << r.ToJson().dump(2) << "\n";
    } else if (*eval) {
      if (eval_messages) config.eval_messages = *eval_messages;
      EvalReport r = EvaluateRun(config, run, rankers);
      WriteJsonFile(run / "eval.json", r.ToJson());
      std::cout << r.ToJson().dump(2) << "\n";
    } else if (*bench) {
      BenchReport r = BenchRun(config, run, bench_config);
      WriteJsonFile(run / "bench.json", r.ToJson());
      std::cerr << r.ToTable();
      std::cout << r.ToJson().dump(2) << "\n";
    } else if (*suggest) {
      if (alpha) config.pipeline.alpha = *alpha;
      if (beta) config.pipeline.beta = *beta;
      if (k) config.pipeline.k = *k;
      if (samples) config.pipeline.samples = *samples;
      if (common.seed) config.pipeline.seed = *common.seed;
      config.pipeline.Validate();
      std::vector<std::string> warnings;
      SuggestionModels models = LoadSuggestionModels(run, &warnings);
      SuggestionResult r = Suggest(models, message, ParseRanker(ranker), config.pipeline);
      nlohmann::json out = r.ToJson();
      out["params"] = config.pipeline.ToJson();
      std::cout << out.dump(2) << "\n";
    } else if (*serve) {
      SuggestionModels models = LoadSuggestionModels(run);
      SuggestionService service(models, config.pipeline,
                                click_log.empty() ? run / "clicks.jsonl" : fs::path(click_log),
                                RunModelHash(run));
      httplib::Server server;
      server.set_payload_max_length(1 << 16);
      RegisterRoutes(server, service);
      g_server = &server;
      std::signal(SIGINT, StopServer);
      std::signal(SIGTERM, StopServer);
      spdlog::info("serving {} on http://{}:{}", run.string(), host, port);
      if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
    }
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kIoExit;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kContractExit;
  }
  return 0;
}
