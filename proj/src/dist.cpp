#include "uqa/dist.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "uqa/error.hpp"

namespace uqa {

namespace {

double term(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

std::vector<double> selected_probs(const TokenDistribution& d, const EntropySubset& subset) {
  std::vector<double> probs;
  const auto entries = d.entries();
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, AllTokens>) {
          for (const auto& e : entries) probs.push_back(e.prob);
        } else if constexpr (std::is_same_v<S, TopTokens>) {
          if (s.k < 1) throw ValidationError(fmt::format("top-k entropy needs k >= 1, got {}", s.k));
          const auto n = std::min<std::size_t>(static_cast<std::size_t>(s.k), entries.size());
          for (std::size_t i = 0; i < n; ++i) probs.push_back(entries[i].prob);
        } else {
          std::unordered_set<std::int64_t> wanted(s.ids.begin(), s.ids.end());
          for (const auto& e : entries) {
            if (wanted.contains(e.token_id)) probs.push_back(e.prob);
          }
        }
      },
      subset);
  if (probs.empty()) throw ValidationError("entropy over an empty selection");
  return probs;
}

}  // namespace

TokenEntry TokenEntry::from_prob(std::int64_t id, std::string text, double prob) {
  const double lp = prob > 0.0 ? std::log(prob) : -std::numeric_limits<double>::infinity();
  return {id, std::move(text), prob, lp};
}

TokenEntry TokenEntry::from_logprob(std::int64_t id, std::string text, double logprob) {
  return {id, std::move(text), std::exp(logprob), logprob};
}

TokenDistribution::TokenDistribution(std::vector<TokenEntry> entries, Completeness completeness, DistributionMeta meta)
    : entries_(std::move(entries)), completeness_(completeness), meta_(std::move(meta)) {
  std::unordered_set<std::int64_t> ids;
  double mass = 0.0;
  for (const auto& e : entries_) {
    if (!(e.prob >= 0.0 && e.prob <= 1.0)) {
      throw ValidationError(fmt::format("token {} has probability {} outside [0, 1]", e.token_id, e.prob));
    }
    if (!ids.insert(e.token_id).second) throw ValidationError(fmt::format("duplicate token id {}", e.token_id));
    mass += e.prob;
  }
  if (completeness_.is_full()) {
    if (std::abs(mass - 1.0) > kMassTolerance) {
      throw ValidationError(fmt::format("FULL distribution sums to {:.12g}, not 1 within {:g}", mass, kMassTolerance));
    }
  } else {
    if (completeness_.k_reported < 1) throw ValidationError("TOP_K distribution must report k >= 1");
    if (mass > 1.0 + kMassTolerance) {
      throw ValidationError(fmt::format("TOP_K distribution sums to {:.12g} > 1", mass));
    }
  }
  std::stable_sort(entries_.begin(), entries_.end(), [](const TokenEntry& a, const TokenEntry& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.token_id < b.token_id;
  });
}

double TokenDistribution::covered_mass() const {
  double mass = 0.0;
  for (const auto& e : entries_) mass += e.prob;
  return mass;
}

bool TokenDistribution::contains(std::int64_t token_id) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const TokenEntry& e) { return e.token_id == token_id; });
}

double TokenDistribution::prob_of(std::int64_t token_id) const {
  for (const auto& e : entries_) {
    if (e.token_id == token_id) return e.prob;
  }
  return 0.0;
}

TokenDistribution make_distribution(std::span<const double> probs, Completeness completeness) {
  std::vector<TokenEntry> entries;
  entries.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    entries.push_back(TokenEntry::from_prob(static_cast<std::int64_t>(i), fmt::format("t{}", i), probs[i]));
  }
  return TokenDistribution(std::move(entries), completeness);
}

double shannon_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) h += term(p);
  return h;
}

double entropy(const TokenDistribution& d, const EntropySubset& subset) {
  return shannon_entropy(selected_probs(d, subset));
}

double renormalized_entropy(const TokenDistribution& d, const EntropySubset& subset) {
  auto probs = selected_probs(d, subset);
  double mass = 0.0;
  for (double p : probs) mass += p;
  if (mass <= 0.0) throw Unavailable("renormalized entropy over zero mass");
  for (auto& p : probs) p /= mass;
  return shannon_entropy(probs);
}

std::int64_t nucleus_size(const TokenDistribution& d, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ValidationError(fmt::format("nucleus threshold must lie in (0, 1], got {}", threshold));
  }
  if (d.empty()) throw ValidationError("nucleus of an empty distribution");
  if (!d.completeness().is_full() && d.covered_mass() + kNucleusTolerance < threshold) {
    throw Unavailable(fmt::format("TOP_K({}) covers mass {:.6f} < nucleus threshold {}",
                                  d.completeness().k_reported, d.covered_mass(), threshold));
  }
  double cumulative = 0.0;
  std::int64_t count = 0;
  for (const auto& e : d.entries()) {
    cumulative += e.prob;
    ++count;
    if (cumulative + kNucleusTolerance >= threshold) return count;
  }
  // FULL distributions within kMassTolerance of 1 can fall just short of a
  // threshold of 1; the whole support is the nucleus then.
  return count;
}

std::vector<double> ChoiceProjection::probs() const {
  std::vector<double> out;
  out.reserve(choices.size());
  for (const auto& c : choices) out.push_back(c.prob);
  return out;
}

ChoiceProjection project_choices(const TokenDistribution& d, const SurveyQuestion& q, const LabelTokens& label_tokens) {
  ChoiceProjection proj{q.id, {}};
  proj.choices.reserve(q.choices.size());
  for (const auto& choice : q.choices) {
    auto it = label_tokens.find(choice.label);
    if (it == label_tokens.end()) {
      throw ValidationError(fmt::format("question \"{}\": label \"{}\" has no token mapping", q.id, choice.label));
    }
    const bool present = d.contains(it->second);
    proj.choices.push_back({choice.label, it->second, present ? d.prob_of(it->second) : 0.0,
                            !present && !d.completeness().is_full()});
  }
  return proj;
}

}  // namespace uqa
