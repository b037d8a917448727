#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include "uqa/hash.hpp"
#include "uqa/providers.hpp"

namespace uqa {

namespace {

constexpr int kEmbedDim = 16;
constexpr int kHiddenDim = 32;

class SyntheticProvider final : public Provider {
 public:
  SyntheticProvider(int vocab_size, double dropout_rate, std::uint64_t seed, std::optional<ModelInfo> info)
      : vocab_size_(vocab_size), dropout_rate_(dropout_rate), seed_(seed) {
    if (vocab_size < 4) throw ValidationError(fmt::format("synthetic vocab_size must be >= 4, got {}", vocab_size));
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ValidationError(fmt::format("dropout_rate must lie in [0, 1), got {}", dropout_rate));
    }
    const int letters = std::min(26, vocab_size - 2);
    for (int i = 0; i < vocab_size; ++i) {
      std::string text;
      if (i < letters) {
        text = std::string(1, static_cast<char>('A' + i));
      } else if (i == letters) {
        text = "best";
      } else if (i == letters + 1) {
        text = "worst";
      } else {
        text = fmt::format("tok{}", i);
      }
      ids_.emplace(text, i);
      texts_.push_back(std::move(text));
    }

    Rng rng(mix_seed(seed, 0x77e1'6475));
    w1_.resize(kHiddenDim * kEmbedDim);
    b1_.resize(kHiddenDim);
    w2_.resize(static_cast<std::size_t>(vocab_size) * kHiddenDim);
    b2_.resize(static_cast<std::size_t>(vocab_size));
    for (auto& w : w1_) w = rng.normal() / std::sqrt(static_cast<double>(kEmbedDim));
    for (auto& b : b1_) b = 0.1 * rng.normal();
    for (auto& w : w2_) w = 1.5 * rng.normal() / std::sqrt(static_cast<double>(kHiddenDim));
    // Letters and evaluator phrases are favoured continuations; filler decays Zipf-like.
    for (int i = 0; i < vocab_size; ++i) {
      const double prior = i < letters + 2 ? 2.0 : -0.7 * std::log1p(static_cast<double>(i - letters - 1));
      b2_[i] = prior + 0.2 * rng.normal();
    }

    if (info) {
      info_ = std::move(*info);
    } else {
      info_.model_id = fmt::format("synthetic-{}", seed);
      info_.family = "synthetic";
      info_.param_count = static_cast<std::int64_t>(w1_.size() + b1_.size() + w2_.size() + b2_.size());
    }
    if (info_.param_count <= 0) throw ValidationError("model param_count must be positive");
  }

  ProviderKind kind() const override { return ProviderKind::Synthetic; }

  Capabilities capabilities() const override {
    return {.full_distribution = true, .top_k_only = std::nullopt, .ensemble = true, .token_resolution = true};
  }

  const ModelInfo& model_info() const override { return info_; }

  TokenDistribution next_token_distribution(std::string_view prompt, std::optional<Variant> variant) const override {
    if (prompt.empty()) throw ValidationError("empty prompt");

    Rng embed_rng(mix_seed(seed_ ^ 0xe3b0'c442, fnv1a64(prompt)));
    std::array<double, kEmbedDim> x{};
    for (auto& v : x) v = embed_rng.normal();
    const double gain = std::exp(0.9 * std::tanh(x[0]));

    std::array<double, kHiddenDim> h{};
    for (int j = 0; j < kHiddenDim; ++j) {
      double acc = b1_[j];
      for (int i = 0; i < kEmbedDim; ++i) acc += w1_[j * kEmbedDim + i] * x[i];
      h[j] = std::tanh(acc);
    }
    if (variant && dropout_rate_ > 0.0) {
      Rng mask_rng(mix_seed(seed_ ^ 0xd409'0c75, variant->seed));
      const double keep_scale = 1.0 / (1.0 - dropout_rate_);
      for (auto& v : h) v = mask_rng.bernoulli(dropout_rate_) ? 0.0 : v * keep_scale;
    }

    std::vector<double> logits(static_cast<std::size_t>(vocab_size_));
    double max_logit = -INFINITY;
    for (int t = 0; t < vocab_size_; ++t) {
      double acc = 0.0;
      for (int j = 0; j < kHiddenDim; ++j) acc += w2_[static_cast<std::size_t>(t) * kHiddenDim + j] * h[j];
      logits[t] = gain * acc + b2_[t];
      max_logit = std::max(max_logit, logits[t]);
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l - max_logit);
    const double log_z = max_logit + std::log(z);

    std::vector<TokenEntry> entries;
    entries.reserve(logits.size());
    for (int t = 0; t < vocab_size_; ++t) entries.push_back(TokenEntry::from_logprob(t, texts_[t], logits[t] - log_z));

    DistributionMeta meta;
    meta.model_id = info_.model_id;
    meta.variant_id = variant ? variant->id : 0;
    meta.prompt_sha256 = sha256_hex(prompt);
    return TokenDistribution(std::move(entries), Completeness::full(), std::move(meta));
  }

  std::int64_t resolve_label_token(std::string_view text) const override {
    if (auto it = ids_.find(std::string(text)); it != ids_.end()) return it->second;
    std::vector<std::string> pieces;
    for (char c : text) {
      std::string piece(1, c);
      if (!ids_.contains(piece)) {
        throw ProviderError(fmt::format("synthetic vocabulary has no token for \"{}\"", text));
      }
      pieces.push_back(std::move(piece));
    }
    if (pieces.size() > 1) throw MultiTokenLabel(std::string(text), std::move(pieces));
    throw ProviderError(fmt::format("synthetic vocabulary has no token for \"{}\"", text));
  }

 private:
  int vocab_size_;
  double dropout_rate_;
  std::uint64_t seed_;
  ModelInfo info_;
  std::vector<std::string> texts_;
  std::unordered_map<std::string, std::int64_t> ids_;
  std::vector<double> w1_, b1_, w2_, b2_;
};

}  // namespace

ProviderHandle synthetic_model(int vocab_size, double dropout_rate, std::uint64_t seed, std::optional<ModelInfo> info) {
  return std::make_shared<SyntheticProvider>(vocab_size, dropout_rate, seed, std::move(info));
}

}  // namespace uqa
