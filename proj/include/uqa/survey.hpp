#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace uqa {

struct AnswerChoice {
  std::string label;  // "A", "B", ... in choice order
  std::string text;
  std::int64_t human_count = 0;

  bool operator==(const AnswerChoice&) const = default;
};

struct SurveyQuestion {
  std::string id;
  std::string text;
  std::vector<AnswerChoice> choices;
  std::optional<std::string> wave;

  std::int64_t total_responses() const;
  bool operator==(const SurveyQuestion&) const = default;
};

/// Relative frequency of each choice among human respondents, in choice order.
struct HumanDistribution {
  std::string question_id;
  std::vector<double> probs;
};

/// Label for the choice at `index`: 0 -> "A", 1 -> "B", ... Throws past "Z".
std::string choice_label(std::size_t index);

/// Parses a survey document: a top-level array of
/// {id, text, wave?, choices: [{label, text, count}]} records. Unknown fields,
/// duplicate ids, non-consecutive labels, fewer than two choices and negative
/// or non-integer counts are rejected with the record index in the message.
std::vector<SurveyQuestion> parse_survey(const nlohmann::json& doc);
std::vector<SurveyQuestion> load_survey(std::istream& in);
std::vector<SurveyQuestion> load_survey_file(const std::filesystem::path& path);

nlohmann::json survey_to_json(std::span<const SurveyQuestion> questions);
void save_survey_file(const std::filesystem::path& path, std::span<const SurveyQuestion> questions);

HumanDistribution human_distribution(const SurveyQuestion& q);

/// Shannon entropy (nats) of the human response frequencies. Throws
/// ValidationError when the question has no responses.
double human_uncertainty(const SurveyQuestion& q);

/// Synthetic stand-in for a survey wave. Response distributions sweep from
/// near-unanimous to near-uniform; totals lie in [5079, 30861]. Deterministic
/// for a fixed seed.
std::vector<SurveyQuestion> generate_fixture(int n_questions, std::pair<int, int> n_choices_range,
                                             std::uint64_t seed);

}  // namespace uqa
