#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uqa/dist.hpp"
#include "uqa/error.hpp"
#include "uqa/records.hpp"

namespace uqa {

enum class ProviderKind { Http, Replay, Synthetic };

std::string_view to_string(ProviderKind kind);

struct Capabilities {
  bool full_distribution = false;
  std::optional<std::int64_t> top_k_only;  // set when only the top k tokens are reported
  bool ensemble = false;
  bool token_resolution = false;
};

/// One stochastic model variant: the id is recorded, the seed drives the dropout mask.
struct Variant {
  int id = 0;
  std::uint64_t seed = 0;
};

struct EvaluatorProbs {
  double p_best = 0.0;
  double p_worst = 0.0;
};

/// A label that the provider's vocabulary splits into several tokens.
class MultiTokenLabel : public ProviderError {
 public:
  MultiTokenLabel(std::string label, std::vector<std::string> pieces);
  const std::string& label() const { return label_; }
  const std::vector<std::string>& pieces() const { return pieces_; }

 private:
  std::string label_;
  std::vector<std::string> pieces_;
};

/// Source of next-token distributions. Implementations are immutable after
/// construction and safe to call from several threads.
class Provider {
 public:
  virtual ~Provider() = default;

  virtual ProviderKind kind() const = 0;
  virtual Capabilities capabilities() const = 0;
  virtual const ModelInfo& model_info() const = 0;

  /// Distribution at the position following `prompt`. With `variant` set the
  /// provider returns that dropout variant (ENSEMBLE capability required).
  /// The result carries model_id, variant_id and prompt_sha256; the caller
  /// fills in question_id.
  virtual TokenDistribution next_token_distribution(std::string_view prompt,
                                                    std::optional<Variant> variant) const = 0;

  /// Token id for `text` in continuation position.
  virtual std::int64_t resolve_label_token(std::string_view text) const = 0;

  /// Evaluator-token probabilities at the slot after a self-report probe
  /// prompt. The default reads them off next_token_distribution.
  virtual EvaluatorProbs evaluate_probe(std::string_view prompt, std::optional<Variant> variant,
                                        const EvaluatorTokens& tokens) const;
};

using ProviderHandle = std::shared_ptr<const Provider>;

// --- synthetic ------------------------------------------------------------

/// Deterministic feed-forward scorer: prompt hash -> embedding -> tanh hidden
/// layer -> logits over `vocab_size` tokens. A variant seed applies a
/// Bernoulli(dropout_rate) mask to the hidden units (inverted scaling), the
/// Monte Carlo dropout mechanism. Vocabulary: letters "A".."Z" (as many as
/// fit), then "best", "worst", then filler tokens.
ProviderHandle synthetic_model(int vocab_size, double dropout_rate, std::uint64_t seed,
                               std::optional<ModelInfo> info = std::nullopt);

// --- HTTP -----------------------------------------------------------------

/// Completions-style endpoint that reports per-token top-k log-probabilities.
struct HttpConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/completions";
  std::string model;         // server-side model name; defaults to model_id
  std::int64_t top_k = 20;   // logprobs requested per position
  double timeout_s = 60.0;
  int retries = 3;           // additional attempts after the first
  int backoff_base_ms = 500;
  int backoff_max_ms = 8000;
  std::string api_key_env = "UQA_API_KEY";
  std::string label_prefix = " ";  // labels resolve as prefix + label, e.g. " A"
  int max_in_flight = 4;
};

/// Delay before retry number `attempt` (0-based): base * 2^attempt, capped.
int backoff_delay_ms(int attempt, int base_ms, int max_ms);

/// Token ids for text-keyed servers: a stable 62-bit hash of the token text.
std::int64_t text_token_id(std::string_view text);

ProviderHandle http_provider(HttpConfig config, ModelInfo info);

// --- replay ---------------------------------------------------------------

/// Serves previously collected records, keyed by (prompt hash, variant id).
ProviderHandle replay_provider(ModelRecords records);

}  // namespace uqa
