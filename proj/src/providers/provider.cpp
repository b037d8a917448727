#include <fmt/format.h>
#include <fmt/ranges.h>

#include "uqa/providers.hpp"

namespace uqa {

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::Http: return "http";
    case ProviderKind::Replay: return "replay";
    case ProviderKind::Synthetic: return "synthetic";
  }
  return "?";
}

MultiTokenLabel::MultiTokenLabel(std::string label, std::vector<std::string> pieces)
    : ProviderError(fmt::format("label \"{}\" resolves to {} tokens: [{}]", label, pieces.size(),
                                fmt::join(pieces, ", "))),
      label_(std::move(label)),
      pieces_(std::move(pieces)) {}

EvaluatorProbs Provider::evaluate_probe(std::string_view prompt, std::optional<Variant> variant,
                                        const EvaluatorTokens& tokens) const {
  const auto d = next_token_distribution(prompt, variant);
  return {d.prob_of(tokens.best), d.prob_of(tokens.worst)};
}

}  // namespace uqa
