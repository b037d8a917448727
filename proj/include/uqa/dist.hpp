#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "uqa/survey.hpp"

namespace uqa {

/// Mass tolerance for FULL distributions, and slack above 1 for TOP_K ones.
inline constexpr double kMassTolerance = 1e-6;

/// Slack used when comparing a cumulative sum against the nucleus threshold,
/// so that e.g. 95 terms of 0.01 reach 0.95 regardless of summation rounding.
inline constexpr double kNucleusTolerance = 1e-12;

struct TokenEntry {
  std::int64_t token_id = 0;
  std::string token_text;
  double prob = 0.0;
  double logprob = 0.0;  // -inf for zero-probability entries

  static TokenEntry from_prob(std::int64_t id, std::string text, double prob);
  static TokenEntry from_logprob(std::int64_t id, std::string text, double logprob);

  bool operator==(const TokenEntry&) const = default;
};

struct Completeness {
  enum class Kind { Full, TopK };
  Kind kind = Kind::Full;
  std::int64_t k_reported = 0;

  static Completeness full() { return {}; }
  static Completeness top_k(std::int64_t k) { return {Kind::TopK, k}; }
  bool is_full() const { return kind == Kind::Full; }
  bool operator==(const Completeness&) const = default;
};

struct DistributionMeta {
  std::string model_id;
  std::string question_id;
  int variant_id = 0;  // 0 for the base model, 1..N for ensemble variants
  std::string prompt_sha256;

  bool operator==(const DistributionMeta&) const = default;
};

/// Next-token distribution for one generation step. Entries are kept in
/// canonical order: descending probability, ties by ascending token id.
class TokenDistribution {
 public:
  TokenDistribution() = default;

  /// Validates the invariants (probabilities in [0,1], unique ids, FULL mass
  /// within kMassTolerance of 1, TOP_K mass at most 1 + kMassTolerance) and
  /// throws ValidationError on violation.
  TokenDistribution(std::vector<TokenEntry> entries, Completeness completeness, DistributionMeta meta = {});

  std::span<const TokenEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Completeness& completeness() const { return completeness_; }
  const DistributionMeta& meta() const { return meta_; }
  void set_meta(DistributionMeta meta) { meta_ = std::move(meta); }

  double covered_mass() const;
  bool contains(std::int64_t token_id) const;
  /// Probability of the token, 0 when it is not listed.
  double prob_of(std::int64_t token_id) const;

  bool operator==(const TokenDistribution&) const = default;

 private:
  std::vector<TokenEntry> entries_;
  Completeness completeness_;
  DistributionMeta meta_;
};

/// Distribution over ids 0..n-1 with texts "t<i>".
TokenDistribution make_distribution(std::span<const double> probs, Completeness completeness = Completeness::full());

struct AllTokens {};
struct TopTokens {
  std::int64_t k = 0;
};
struct TokenSet {
  std::vector<std::int64_t> ids;
};
using EntropySubset = std::variant<AllTokens, TopTokens, TokenSet>;

/// Sum of -p ln p over the given probabilities, with 0 ln 0 = 0. Terms are
/// used as-is; nothing is renormalized.
double shannon_entropy(std::span<const double> probs);

/// Raw-term entropy (nats) over the selected entries.
double entropy(const TokenDistribution& d, const EntropySubset& subset = AllTokens{});

/// Entropy of the selected entries after rescaling them to sum to 1. For
/// exploration only; the measure pipeline uses `entropy`.
double renormalized_entropy(const TokenDistribution& d, const EntropySubset& subset);

/// Size of the smallest canonical-order prefix whose cumulative probability
/// reaches `threshold`. Throws Unavailable for TOP_K data that covers less
/// mass than the threshold.
std::int64_t nucleus_size(const TokenDistribution& d, double threshold);

using LabelTokens = std::map<std::string, std::int64_t>;

struct ChoiceProb {
  std::string label;
  std::int64_t token_id = 0;
  double prob = 0.0;
  bool truncated = false;  // label token absent from a TOP_K distribution
};

struct ChoiceProjection {
  std::string question_id;
  std::vector<ChoiceProb> choices;

  std::vector<double> probs() const;
};

ChoiceProjection project_choices(const TokenDistribution& d, const SurveyQuestion& q, const LabelTokens& label_tokens);

}  // namespace uqa
