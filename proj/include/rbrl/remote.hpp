#pragma once

// HTTP backend speaking the OpenAI-compatible chat-completions and
// embeddings wire formats. The API key is read from an environment variable
// at call time and never appears in any config file or log.

#include "rbrl/gateway.hpp"

#include <memory>
#include <string>

namespace rbrl {

struct RemoteLlmConfig {
  std::string endpoint = "http://127.0.0.1:8089";  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key_env = "RBRL_API_KEY";
  int max_retries = 3;
  double timeout_sec = 30.0;
  int max_tokens = 768;

  void validate() const;
};

std::shared_ptr<LlmBackend> make_remote_backend(const RemoteLlmConfig& cfg);

}  // namespace rbrl
