#include <fmt/format.h>

#include <map>

#include "uqa/hash.hpp"
#include "uqa/providers.hpp"

namespace uqa {

namespace {

using Key = std::pair<std::string, int>;  // (prompt sha256, variant id)

class ReplayProvider final : public Provider {
 public:
  explicit ReplayProvider(ModelRecords records) : records_(std::move(records)) {
    for (const auto& q : records_.questions) {
      index(q.base);
      for (const auto& v : q.ensemble.variants) index(v);
      if (q.self_report) probes_.emplace(Key{q.self_report->prompt_sha256, q.self_report->variant_id}, *q.self_report);
      for (const auto& per_variant : q.population_probes) {
        for (const auto& p : per_variant) probes_.emplace(Key{p.prompt_sha256, p.variant_id}, p);
      }
    }
    // Only distributions that carry their whole vocabulary advertise FULL.
    bool all_full = !distributions_.empty();
    std::optional<std::int64_t> top_k;
    for (const auto& [_, d] : distributions_) {
      if (!d.completeness().is_full()) {
        all_full = false;
        top_k = std::max(top_k.value_or(0), d.completeness().k_reported);
      }
    }
    caps_.full_distribution = all_full;
    caps_.top_k_only = top_k;
    caps_.ensemble = true;
    caps_.token_resolution = true;
  }

  ProviderKind kind() const override { return ProviderKind::Replay; }
  Capabilities capabilities() const override { return caps_; }
  const ModelInfo& model_info() const override { return records_.model; }

  TokenDistribution next_token_distribution(std::string_view prompt, std::optional<Variant> variant) const override {
    const Key key{sha256_hex(prompt), variant ? variant->id : 0};
    auto it = distributions_.find(key);
    if (it == distributions_.end()) {
      throw ProviderError(fmt::format("replay has no distribution for prompt {} variant {}", key.first, key.second));
    }
    return it->second;
  }

  std::int64_t resolve_label_token(std::string_view text) const override {
    if (auto it = records_.label_tokens.find(std::string(text)); it != records_.label_tokens.end()) return it->second;
    if (text == "best") return records_.evaluator.best;
    if (text == "worst") return records_.evaluator.worst;
    throw ProviderError(fmt::format("replay dump has no token mapping for \"{}\"", text));
  }

  EvaluatorProbs evaluate_probe(std::string_view prompt, std::optional<Variant> variant,
                                const EvaluatorTokens&) const override {
    const Key key{sha256_hex(prompt), variant ? variant->id : 0};
    auto it = probes_.find(key);
    if (it == probes_.end()) {
      throw ProviderError(fmt::format("replay has no probe for prompt {} variant {}", key.first, key.second));
    }
    return {it->second.p_best, it->second.p_worst};
  }

 private:
  void index(const TokenDistribution& d) {
    distributions_.emplace(Key{d.meta().prompt_sha256, d.meta().variant_id}, d);
  }

  ModelRecords records_;
  Capabilities caps_;
  std::map<Key, TokenDistribution> distributions_;
  std::map<Key, SelfReportProbe> probes_;
};

}  // namespace

ProviderHandle replay_provider(ModelRecords records) {
  return std::make_shared<ReplayProvider>(std::move(records));
}

}  // namespace uqa
