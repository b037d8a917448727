#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uqa/dist.hpp"
#include "uqa/providers.hpp"
#include "uqa/records.hpp"
#include "uqa/survey.hpp"

namespace uqa {

inline constexpr std::string_view kBaseInstruction =
    "Following is a question and a selection of answer choices. "
    "Provide the label for the answer with which you most agree.";

/// Connective sentence of the self-report probe; the slot after it is where
/// the evaluator tokens "best" and "worst" are read.
inline constexpr std::string_view kSecondaryQuery = "Of the available choices, this answer is the: ";

inline constexpr std::string_view kBestPhrase = "best";
inline constexpr std::string_view kWorstPhrase = "worst";

struct BaseQuery {
  std::string question_id;
  std::string rendered_text;
  std::vector<std::string> labels;  // in choice order
  LabelTokens label_tokens;         // empty until bound to a provider
};

/// Renders
///
///   <instruction>
///   Question: <question text>
///    A. <choice 0>
///    B. <choice 1>
///   Answer: <- trailing space, no newline
///
/// Throws ValidationError past 26 choices or when `label_tokens` is non-empty
/// but misses a label.
BaseQuery render_base_query(const SurveyQuestion& q, LabelTokens label_tokens = {});

struct ParsedQuery {
  std::string question_text;
  std::vector<std::pair<std::string, std::string>> choices;  // (label, text)
};

/// Inverse of render_base_query's text layout.
ParsedQuery parse_base_query(std::string_view text);

struct ClozeOutcome {
  std::string question_id;
  std::string chosen_label;
  std::vector<std::pair<std::string, double>> label_probs;
  bool tie = false;
};

/// Most probable label; ties go to the earliest label. Labels absent from the
/// distribution count as 0. Throws Unavailable when every label is 0.
ClozeOutcome cloze_select(const TokenDistribution& d, const BaseQuery& bq);

struct EnsembleChoice {
  std::string label;
  bool tie = false;
  std::map<std::string, int> votes;
};

EnsembleChoice ensemble_select(std::span<const ClozeOutcome> outcomes);

/// Base query, the answer label, a newline, then the secondary query.
std::string render_sr_probe(const BaseQuery& bq, std::string_view answer_label,
                            std::string_view secondary_query = kSecondaryQuery);

/// Dropout seed for one (question, variant) pair under a run seed.
std::uint64_t variant_seed(std::uint64_t seed, std::string_view question_id, int variant_id);

struct CollectOptions {
  int ensemble_n = 30;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string secondary_query = std::string(kSecondaryQuery);
};

/// Queries `provider` for every question: the base distribution, ensemble_n
/// dropout variants, the self-report probe conditioned on the base cloze
/// answer, and per variant one probe per choice. Provider failures are
/// rethrown as ProviderError naming the question. Output order is the input
/// question order regardless of `workers`.
ModelRecords collect(const Provider& provider, std::span<const SurveyQuestion> questions,
                     const CollectOptions& options = {});

}  // namespace uqa
