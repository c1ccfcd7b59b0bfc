#ifndef SMARTREPLY_SERVICE_H_
#define SMARTREPLY_SERVICE_H_

#include <filesystem>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "smartreply/inference.h"

namespace httplib {
class Server;
}

namespace smartreply {

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

// Request handling for the suggestion service, independent of the HTTP
// library so it can be tested directly. Models are read-only after
// construction; the click log is the only mutable state.
class SuggestionService {
 public:
  SuggestionService(const SuggestionModels& models, PipelineConfig defaults,
                    std::filesystem::path click_log, std::string model_hash);

  HttpReply Suggest(const std::string& body) const;
  HttpReply Compare(const std::string& body) const;
  HttpReply Click(const std::string& body);
  HttpReply Health() const;
  HttpReply Config() const;

  // Longest accepted message, in tokens.
  std::size_t max_tokens() const { return max_tokens_; }

 private:
  const SuggestionModels& models_;
  PipelineConfig defaults_;
  std::filesystem::path click_log_;
  std::string model_hash_;
  std::size_t max_tokens_;
  std::mutex click_mutex_;
};

// Routes: POST /suggest, /compare, /click; GET /health, /config.
void RegisterRoutes(httplib::Server& server, SuggestionService& service);

}  // namespace smartreply

#endif  // SMARTREPLY_SERVICE_H_
