#include "uqa/survey.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "uqa/dist.hpp"
#include "uqa/error.hpp"
#include "uqa/hash.hpp"

namespace uqa {

namespace {

using nlohmann::json;

constexpr std::int64_t kFixtureMinResponses = 5079;
constexpr std::int64_t kFixtureMaxResponses = 30861;

std::string locus(std::size_t index, const json& record) {
  if (record.is_object() && record.contains("id") && record["id"].is_string()) {
    return fmt::format("record {} (id \"{}\")", index, record["id"].get<std::string>());
  }
  return fmt::format("record {}", index);
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(fmt::format("{}: unknown field \"{}\"", where, key));
    }
  }
}

std::string required_string(const json& obj, const char* field, const std::string& where) {
  auto it = obj.find(field);
  if (it == obj.end()) throw ValidationError(fmt::format("{}: missing field \"{}\"", where, field));
  if (!it->is_string()) throw ValidationError(fmt::format("{}: field \"{}\" must be a string", where, field));
  return it->get<std::string>();
}

std::int64_t parse_count(const json& value, const std::string& where) {
  if (value.is_number_integer()) {
    const auto n = value.get<std::int64_t>();
    if (n < 0) throw ValidationError(fmt::format("{}: negative count {}", where, n));
    return n;
  }
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (d < 0) throw ValidationError(fmt::format("{}: negative count {}", where, d));
    throw ValidationError(fmt::format("{}: count must be an integer, got {}", where, d));
  }
  throw ValidationError(fmt::format("{}: non-numeric count {}", where, value.dump()));
}

}  // namespace

std::int64_t SurveyQuestion::total_responses() const {
  std::int64_t total = 0;
  for (const auto& c : choices) total += c.human_count;
  return total;
}

std::string choice_label(std::size_t index) {
  if (index >= 26) throw ValidationError(fmt::format("choice index {} exceeds the alphabet", index));
  return std::string(1, static_cast<char>('A' + index));
}

std::vector<SurveyQuestion> parse_survey(const json& doc) {
  if (!doc.is_array()) throw ValidationError("survey document must be a top-level list of records");
  if (doc.empty()) throw ValidationError("survey document contains no records");

  std::vector<SurveyQuestion> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    const std::string where = locus(i, rec);
    if (!rec.is_object()) throw ValidationError(where + ": record must be an object");
    reject_unknown(rec, {"id", "text", "wave", "choices"}, where);

    SurveyQuestion q;
    q.id = required_string(rec, "id", where);
    q.text = required_string(rec, "text", where);
    if (rec.contains("wave")) q.wave = required_string(rec, "wave", where);
    if (!seen.insert(q.id).second) throw ValidationError(fmt::format("{}: duplicate question id", where));

    auto choices = rec.find("choices");
    if (choices == rec.end() || !choices->is_array()) {
      throw ValidationError(where + ": field \"choices\" must be a list");
    }
    if (choices->size() < 2) throw ValidationError(where + ": fewer than 2 choices");
    for (std::size_t c = 0; c < choices->size(); ++c) {
      const json& ch = (*choices)[c];
      const std::string cwhere = fmt::format("{} choice {}", where, c);
      if (!ch.is_object()) throw ValidationError(cwhere + ": choice must be an object");
      reject_unknown(ch, {"label", "text", "count"}, cwhere);
      AnswerChoice a;
      a.label = required_string(ch, "label", cwhere);
      a.text = required_string(ch, "text", cwhere);
      if (!ch.contains("count")) throw ValidationError(cwhere + ": missing field \"count\"");
      a.human_count = parse_count(ch["count"], cwhere);
      if (c >= 26 || a.label != choice_label(c)) {
        throw ValidationError(fmt::format("{}: label \"{}\" out of sequence (expected consecutive labels from \"A\")",
                                          cwhere, a.label));
      }
      q.choices.push_back(std::move(a));
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<SurveyQuestion> load_survey(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("survey is not valid JSON: {}", e.what()));
  }
  return parse_survey(doc);
}

std::vector<SurveyQuestion> load_survey_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open survey file {}", path.string()));
  try {
    return load_survey(in);
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

json survey_to_json(std::span<const SurveyQuestion> questions) {
  json doc = json::array();
  for (const auto& q : questions) {
    json rec = {{"id", q.id}, {"text", q.text}};
    if (q.wave) rec["wave"] = *q.wave;
    json choices = json::array();
    for (const auto& c : q.choices) {
      choices.push_back({{"label", c.label}, {"text", c.text}, {"count", c.human_count}});
    }
    rec["choices"] = std::move(choices);
    doc.push_back(std::move(rec));
  }
  return doc;
}

void save_survey_file(const std::filesystem::path& path, std::span<const SurveyQuestion> questions) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write survey file {}", path.string()));
  out << survey_to_json(questions).dump(2) << '\n';
}

HumanDistribution human_distribution(const SurveyQuestion& q) {
  const std::int64_t total = q.total_responses();
  if (total < 1) throw ValidationError(fmt::format("question \"{}\" has zero total responses", q.id));
  HumanDistribution h{q.id, {}};
  h.probs.reserve(q.choices.size());
  for (const auto& c : q.choices) {
    h.probs.push_back(static_cast<double>(c.human_count) / static_cast<double>(total));
  }
  return h;
}

double human_uncertainty(const SurveyQuestion& q) {
  return shannon_entropy(human_distribution(q).probs);
}

std::vector<SurveyQuestion> generate_fixture(int n_questions, std::pair<int, int> n_choices_range,
                                             std::uint64_t seed) {
  if (n_questions < 1) throw ValidationError("generate_fixture: n_questions must be >= 1");
  auto [lo, hi] = n_choices_range;
  if (lo < 2 || hi < lo || hi > 26) {
    throw ValidationError(fmt::format("generate_fixture: invalid choice range ({}, {})", lo, hi));
  }

  Rng rng(mix_seed(seed, 0x5eed'f1c7));

  // Spread position per question: 0 is one dominant answer, 1 is uniform.
  std::vector<double> spread(static_cast<std::size_t>(n_questions));
  for (int i = 0; i < n_questions; ++i) {
    spread[i] = n_questions == 1 ? 0.5 : 0.02 + 0.98 * static_cast<double>(i) / (n_questions - 1);
  }
  for (std::size_t i = spread.size(); i > 1; --i) {
    std::swap(spread[i - 1], spread[rng.below(i)]);
  }

  std::vector<SurveyQuestion> out;
  out.reserve(spread.size());
  for (int i = 0; i < n_questions; ++i) {
    const int n_choices = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    const auto dominant = rng.below(static_cast<std::uint64_t>(n_choices));

    std::vector<double> probs(static_cast<std::size_t>(n_choices));
    double sum = 0.0;
    for (int c = 0; c < n_choices; ++c) {
      const double base = spread[i] / n_choices + (static_cast<std::uint64_t>(c) == dominant ? 1.0 - spread[i] : 0.0);
      probs[c] = base * rng.uniform(0.85, 1.15);
      sum += probs[c];
    }
    for (auto& p : probs) p /= sum;

    std::int64_t total = kFixtureMinResponses +
                         static_cast<std::int64_t>(rng.below(kFixtureMaxResponses - kFixtureMinResponses + 1));
    if (i == 0) total = kFixtureMinResponses;
    if (i == 1) total = kFixtureMaxResponses;

    // Largest-remainder rounding keeps the counts summing to `total`.
    std::vector<std::int64_t> counts(probs.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::int64_t assigned = 0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
      const double exact = probs[c] * static_cast<double>(total);
      counts[c] = static_cast<std::int64_t>(std::floor(exact));
      assigned += counts[c];
      remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++counts[remainders[r % remainders.size()].second];

    SurveyQuestion q;
    q.id = fmt::format("fx{:03d}", i + 1);
    q.text = fmt::format("Synthetic opinion question {}?", i + 1);
    q.wave = fmt::format("W{}", 113 + i % 8);
    for (int c = 0; c < n_choices; ++c) {
      q.choices.push_back({choice_label(static_cast<std::size_t>(c)), fmt::format("Option {}", c + 1), counts[c]});
    }
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace uqa
