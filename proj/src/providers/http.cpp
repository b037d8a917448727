#include <httplib.h>

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <json.hpp>
#include <semaphore>
#include <thread>
#include <unordered_set>

#include "uqa/hash.hpp"
#include "uqa/providers.hpp"

namespace uqa {

namespace {

using nlohmann::json;

class InFlightSlot {
 public:
  explicit InFlightSlot(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~InFlightSlot() { sem_.release(); }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

bool retryable_status(int status) { return status == 429 || status >= 500; }

// Accepts {"tok": lp, ...} (completions style) or [{"token": .., "logprob": ..}, ...].
std::vector<std::pair<std::string, double>> parse_top_logprobs(const json& body) {
  const json* top = nullptr;
  try {
    top = &body.at("choices").at(0).at("logprobs").at("top_logprobs").at(0);
  } catch (const json::exception&) {
    throw ProviderError("response lacks choices[0].logprobs.top_logprobs[0]");
  }
  std::vector<std::pair<std::string, double>> out;
  if (top->is_object()) {
    for (const auto& [tok, lp] : top->items()) {
      if (!lp.is_number()) throw ProviderError(fmt::format("non-numeric logprob for token \"{}\"", tok));
      out.emplace_back(tok, lp.get<double>());
    }
  } else if (top->is_array()) {
    for (const auto& item : *top) {
      if (!item.contains("token") || !item.contains("logprob") || !item["logprob"].is_number()) {
        throw ProviderError("top_logprobs entry needs token and numeric logprob");
      }
      out.emplace_back(item["token"].get<std::string>(), item["logprob"].get<double>());
    }
  } else {
    throw ProviderError("top_logprobs[0] must be an object or a list");
  }
  return out;
}

class HttpProvider final : public Provider {
 public:
  HttpProvider(HttpConfig config, ModelInfo info)
      : config_(std::move(config)), info_(std::move(info)), in_flight_(std::max(1, config_.max_in_flight)) {
    if (config_.model.empty()) config_.model = info_.model_id;
    if (config_.top_k < 1) throw ValidationError("http top_k must be >= 1");
    if (config_.retries < 0) throw ValidationError("http retries must be >= 0");
    if (info_.param_count <= 0) throw ValidationError("model param_count must be positive");
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }

  ProviderKind kind() const override { return ProviderKind::Http; }

  Capabilities capabilities() const override {
    return {.full_distribution = false, .top_k_only = config_.top_k, .ensemble = false, .token_resolution = true};
  }

  const ModelInfo& model_info() const override { return info_; }

  TokenDistribution next_token_distribution(std::string_view prompt, std::optional<Variant> variant) const override {
    if (prompt.empty()) throw ValidationError("empty prompt");
    if (variant) throw ProviderError("http provider has no ENSEMBLE capability; variants are unsupported");

    const json request = {{"model", config_.model}, {"prompt", std::string(prompt)}, {"max_tokens", 1},
                          {"temperature", 0},       {"logprobs", config_.top_k}, {"echo", false}};
    const json body = post_with_retry(request.dump());
    auto pairs = parse_top_logprobs(body);
    if (pairs.empty()) throw ProviderError("server returned no top logprobs");
    std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<TokenEntry> entries;
    std::unordered_set<std::int64_t> seen;
    for (auto& [text, lp] : pairs) {
      const auto id = text_token_id(text);
      if (!seen.insert(id).second) continue;  // duplicate rendering of one id; keep the larger
      entries.push_back(TokenEntry::from_logprob(id, std::move(text), lp));
    }

    DistributionMeta meta;
    meta.model_id = info_.model_id;
    meta.prompt_sha256 = sha256_hex(prompt);
    const auto k = static_cast<std::int64_t>(entries.size());
    try {
      return TokenDistribution(std::move(entries), Completeness::top_k(k), std::move(meta));
    } catch (const ValidationError& e) {
      throw ProviderError(fmt::format("server distribution violates invariants: {}", e.what()));
    }
  }

  std::int64_t resolve_label_token(std::string_view text) const override {
    return text_token_id(config_.label_prefix + std::string(text));
  }

 private:
  json post_with_retry(const std::string& payload) const {
    InFlightSlot slot(in_flight_);
    std::string last_error;
    int attempts = 0;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      ++attempts;
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(backoff_delay_ms(attempt - 1, config_.backoff_base_ms, config_.backoff_max_ms)));
      }
      httplib::Client client(config_.base_url);
      const auto timeout = std::chrono::duration<double>(config_.timeout_s);
      client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

      auto res = client.Post(config_.path, headers, payload, "application/json");
      if (!res) {
        last_error = fmt::format("transport error: {}", httplib::to_string(res.error()));
        continue;
      }
      if (res->status == 200) {
        try {
          return json::parse(res->body);
        } catch (const json::parse_error& e) {
          throw ProviderError(fmt::format("response is not JSON: {}", e.what()));
        }
      }
      last_error = fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 200));
      if (!retryable_status(res->status)) break;
    }
    throw ProviderError(fmt::format("{}{} failed after {} attempt(s): {}", config_.base_url, config_.path,
                                    attempts, last_error));
  }

  HttpConfig config_;
  ModelInfo info_;
  std::string api_key_;
  mutable std::counting_semaphore<> in_flight_;
};

}  // namespace

int backoff_delay_ms(int attempt, int base_ms, int max_ms) {
  if (attempt < 0) attempt = 0;
  if (attempt >= 30) return max_ms;
  const long long delay = static_cast<long long>(base_ms) << attempt;
  return static_cast<int>(std::min<long long>(delay, max_ms));
}

std::int64_t text_token_id(std::string_view text) {
  return static_cast<std::int64_t>(fnv1a64(text) & ((std::uint64_t{1} << 62) - 1));
}

ProviderHandle http_provider(HttpConfig config, ModelInfo info) {
  return std::make_shared<HttpProvider>(std::move(config), std::move(info));
}

}  // namespace uqa
