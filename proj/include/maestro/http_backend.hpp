#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "maestro/backend.hpp"
#include "maestro/config.hpp"

namespace maestro {

// Chat-completions worker: POSTs {model, messages, temperature, top_p} and
// reads choices[0].message.content plus usage token counts. The capacity
// level selects the model name; the API key comes from the environment.
class HttpBackend : public WorkerBackend {
 public:
  explicit HttpBackend(HttpConfig cfg) : cfg_(std::move(cfg)) {
    std::string url = cfg_.endpoint;
    const std::string scheme = "http://";
    if (url.rfind(scheme, 0) != 0)
      throw std::invalid_argument("http backend: endpoint must start with http://");
    url = url.substr(scheme.size());
    std::size_t slash = url.find('/');
    std::string hostport = slash == std::string::npos ? url : url.substr(0, slash);
    path_ = slash == std::string::npos ? "/v1/chat/completions" : url.substr(slash);
    std::size_t colon = hostport.find(':');
    if (colon == std::string::npos) {
      host_ = hostport;
      port_ = 80;
    } else {
      host_ = hostport.substr(0, colon);
      port_ = std::stoi(hostport.substr(colon + 1));
    }
  }

  const std::string& model_for(CapacityLevel c) const {
    switch (c) {
      case CapacityLevel::small: return cfg_.model_small;
      case CapacityLevel::medium: return cfg_.model_medium;
      case CapacityLevel::large: return cfg_.model_large;
    }
    return cfg_.model_medium;
  }

  static std::string system_prompt(const WorkerCall& call) {
    return "You are " + call.role.agent_type + ", acting as " + call.role.base_role + ". " +
           call.role.duty;
  }

  static std::string user_prompt(const WorkerCall& call) {
    std::string out = "Task: " + call.task.prompt;
    for (const auto& [id, text] : call.parent_outputs)
      out += "\n\nOutput of " + id + ":\n" + text;
    return out;
  }

  WorkerResult run(const WorkerCall& call) override {
    nlohmann::json body{
        {"model", model_for(call.capacity)},
        {"temperature", cfg_.temperature},
        {"top_p", cfg_.top_p},
        {"messages",
         {{{"role", "system"}, {"content", system_prompt(call)}},
          {{"role", "user"}, {"content", user_prompt(call)}}}},
    };

    httplib::Client client(host_, port_);
    client.set_connection_timeout(0, cfg_.timeout_ms * 1000);
    client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string payload = body.dump();
    httplib::Result res;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      res = client.Post(path_, headers, payload, "application/json");
      if (res) break;
    }
    if (!res) throw BackendError("http backend: transport error contacting " + host_);
    if (res->status < 200 || res->status >= 300)
      throw BackendError("http backend: status " + std::to_string(res->status));

    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("http backend: malformed response: ") + e.what());
    }
    WorkerResult out;
    try {
      out.output = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw BackendError("http backend: response lacks choices[0].message.content");
    }
    if (reply.contains("usage")) {
      out.tokens_in = reply["usage"].value("prompt_tokens", 0);
      out.tokens_out = reply["usage"].value("completion_tokens", 0);
    }
    return out;
  }

  std::string backend_id() const override { return "http"; }

 private:
  HttpConfig cfg_;
  std::string host_;
  std::string path_;
  int port_ = 80;
};

}  // namespace maestro
