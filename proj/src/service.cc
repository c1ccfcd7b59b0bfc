#include "smartreply/service.h"

#include <chrono>
#include <fstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "smartreply/error.h"

namespace smartreply {

namespace {

// A request the client got wrong; `status` is 400 or 413.
struct BadRequest {
  int status;
  std::string field;
  std::string message;
};

HttpReply Error(const BadRequest& e) {
  return {e.status, {{"error", e.message}, {"field", e.field}}};
}

nlohmann::json ParseBody(const std::string& body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw BadRequest{400, "body", "request body is not valid JSON"};
  if (!j.is_object()) throw BadRequest{400, "body", "request body must be a JSON object"};
  return j;
}

std::string RequireString(const nlohmann::json& j, const std::string& field) {
  if (!j.contains(field)) throw BadRequest{400, field, "missing field '" + field + "'"};
  if (!j.at(field).is_string()) throw BadRequest{400, field, "field '" + field + "' must be a string"};
  return j.at(field).get<std::string>();
}

void CheckMessage(const std::string& message, std::size_t max_tokens) {
  const std::size_t n = Tokenize(message).size();
  if (n == 0) throw BadRequest{400, "message", "message has no tokens"};
  if (n > max_tokens) {
    throw BadRequest{413, "message", "message has " + std::to_string(n) +
                                         " tokens, the limit is " + std::to_string(max_tokens)};
  }
}

PipelineConfig ParseParams(const nlohmann::json& body, const PipelineConfig& defaults) {
  PipelineConfig c = defaults;
  if (!body.contains("params")) return c;
  const nlohmann::json& p = body.at("params");
  if (!p.is_object()) throw BadRequest{400, "params", "field 'params' must be an object"};
  for (const auto& [key, value] : p.items()) {
    const std::string field = "params." + key;
    auto number = [&] {
      if (!value.is_number()) throw BadRequest{400, field, "'" + field + "' must be a number"};
      return value.get<double>();
    };
    auto count = [&](std::size_t min) {
      if (!value.is_number_integer() || value.get<std::int64_t>() < static_cast<std::int64_t>(min)) {
        throw BadRequest{400, field, "'" + field + "' must be an integer >= " + std::to_string(min)};
      }
      return value.get<std::size_t>();
    };
    auto flag = [&] {
      if (!value.is_boolean()) throw BadRequest{400, field, "'" + field + "' must be a boolean"};
      return value.get<bool>();
    };
    if (key == "alpha") {
      c.alpha = static_cast<float>(number());
    } else if (key == "beta") {
      c.beta = number();
      if (c.beta < 0.0 || c.beta > 1.0) throw BadRequest{400, field, "'params.beta' must be in [0, 1]"};
    } else if (key == "k") {
      c.k = count(3);
    } else if (key == "s") {
      c.samples = count(1);
    } else if (key == "top_n") {
      c.top_n = count(1);
    } else if (key == "seed") {
      c.seed = count(0);
    } else if (key == "use_mmr_preselect") {
      c.use_mmr_preselect = flag();
    } else if (key == "alpha_in_sampling") {
      c.alpha_in_sampling = flag();
    } else if (key == "dedupe") {
      c.dedupe = flag();
    } else {
      throw BadRequest{400, field, "unknown parameter '" + key + "'"};
    }
  }
  return c;
}

Ranker ParseRankerField(const nlohmann::json& body) {
  if (!body.contains("ranker")) return Ranker::kMatching;
  const std::string name = RequireString(body, "ranker");
  try {
    return ParseRanker(name);
  } catch (const ContractError&) {
    throw BadRequest{400, "ranker", "unknown ranker '" + name + "'"};
  }
}

nlohmann::json Run(const SuggestionModels& models, const std::string& message, Ranker ranker,
                   const PipelineConfig& config) {
  nlohmann::json j = smartreply::Suggest(models, message, ranker, config).ToJson();
  j["params"] = config.ToJson();
  return j;
}

template <typename F>
HttpReply Guard(F&& f) {
  try {
    return f();
  } catch (const BadRequest& e) {
    return Error(e);
  } catch (const ContractError& e) {
    return {400, {{"error", e.what()}, {"field", ""}}};
  } catch (const std::exception& e) {
    spdlog::error("request failed: {}", e.what());
    return {500, {{"error", e.what()}}};
  }
}

}  // namespace

SuggestionService::SuggestionService(const SuggestionModels& models, PipelineConfig defaults,
                                     std::filesystem::path click_log, std::string model_hash)
    : models_(models),
      defaults_(std::move(defaults)),
      click_log_(std::move(click_log)),
      model_hash_(std::move(model_hash)),
      max_tokens_(kDefaultMaxLength) {
  defaults_.Validate();
}

HttpReply SuggestionService::Suggest(const std::string& body) const {
  return Guard([&]() -> HttpReply {
    const nlohmann::json j = ParseBody(body);
    const std::string message = RequireString(j, "message");
    CheckMessage(message, max_tokens_);
    const Ranker ranker = ParseRankerField(j);
    const PipelineConfig config = ParseParams(j, defaults_);
    if (ranker == Ranker::kMcvae && !models_.cvae) {
      throw BadRequest{400, "ranker", "no CVAE is loaded, so ranker 'mcvae' is unavailable"};
    }
    return {200, Run(models_, message, ranker, config)};
  });
}

HttpReply SuggestionService::Compare(const std::string& body) const {
  return Guard([&]() -> HttpReply {
    const nlohmann::json j = ParseBody(body);
    const std::string message = RequireString(j, "message");
    CheckMessage(message, max_tokens_);
    const PipelineConfig config = ParseParams(j, defaults_);
    nlohmann::json out = {{"message", message}, {"params", config.ToJson()}};
    nlohmann::json results = nlohmann::json::array();
    for (Ranker r : {Ranker::kMatching, Ranker::kMmr, Ranker::kMcvae}) {
      if (r == Ranker::kMcvae && !models_.cvae) continue;
      results.push_back(Run(models_, message, r, config));
    }
    out["results"] = std::move(results);
    return {200, out};
  });
}

HttpReply SuggestionService::Click(const std::string& body) {
  return Guard([&]() -> HttpReply {
    const nlohmann::json j = ParseBody(body);
    nlohmann::json entry = {{"message", RequireString(j, "message")},
                            {"chosen_text", RequireString(j, "chosen_text")},
                            {"ranker", RequireString(j, "ranker")}};
    entry["time_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
    const std::string line = entry.dump() + "\n";
    {
      std::lock_guard<std::mutex> lock(click_mutex_);
      std::ofstream out(click_log_, std::ios::app | std::ios::binary);
      if (!out) throw IoError("cannot open click log " + click_log_.string());
      out.write(line.data(), static_cast<std::streamsize>(line.size()));
      out.flush();
      if (!out) throw IoError("cannot write click log " + click_log_.string());
    }
    return {200, {{"status", "ok"}}};
  });
}

HttpReply SuggestionService::Health() const {
  return {200, {{"status", "ok"}, {"model_hash", model_hash_}, {"responses", models_.artifact.size()},
                {"cvae", models_.cvae.has_value()}}};
}

HttpReply SuggestionService::Config() const {
  return {200, defaults_.ToJson()};
}

void RegisterRoutes(httplib::Server& server, SuggestionService& service) {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };
  // The playground is served from another origin during development.
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  server.Post("/suggest", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.Suggest(req.body));
  });
  server.Post("/compare", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.Compare(req.body));
  });
  server.Post("/click", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.Click(req.body));
  });
  server.Get("/health", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.Health());
  });
  server.Get("/config", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.Config());
  });
}

}  // namespace smartreply
