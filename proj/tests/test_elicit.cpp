#include <doctest.h>

#include "uqa/elicit.hpp"
#include "uqa/error.hpp"
#include "uqa/hash.hpp"

namespace {

uqa::SurveyQuestion sample_question() {
  return {"q1",
          "How much do you trust the news?",
          {{"A", "A lot", 10}, {"B", "Some", 20}, {"C", "Not at all", 5}},
          std::nullopt};
}

// Serves one fixed distribution; used to exercise the capability checks.
class FixedProvider final : public uqa::Provider {
 public:
  explicit FixedProvider(bool ensemble) : ensemble_(ensemble), info_{"fixed", "test", 1, false} {}
  uqa::ProviderKind kind() const override { return uqa::ProviderKind::Synthetic; }
  uqa::Capabilities capabilities() const override { return {true, std::nullopt, ensemble_, true}; }
  const uqa::ModelInfo& model_info() const override { return info_; }
  uqa::TokenDistribution next_token_distribution(std::string_view prompt,
                                                 std::optional<uqa::Variant> variant) const override {
    auto d = uqa::make_distribution(std::vector<double>{0.1, 0.6, 0.1, 0.1, 0.1});
    d.set_meta({info_.model_id, "", variant ? variant->id : 0, uqa::sha256_hex(prompt)});
    return d;
  }
  std::int64_t resolve_label_token(std::string_view text) const override {
    if (text == "best") return 3;
    if (text == "worst") return 4;
    if (text.size() == 1 && text[0] >= 'A' && text[0] <= 'C') return text[0] - 'A';
    throw uqa::ProviderError("no token");
  }

 private:
  bool ensemble_;
  uqa::ModelInfo info_;
};

}  // namespace

TEST_CASE("base query layout") {
  const auto bq = uqa::render_base_query(sample_question());
  CHECK(bq.rendered_text ==
        "Following is a question and a selection of answer choices. Provide the label for the answer with which you "
        "most agree.\n"
        "Question: How much do you trust the news?\n"
        " A. A lot\n"
        " B. Some\n"
        " C. Not at all\n"
        "Answer: ");
  CHECK(bq.labels == std::vector<std::string>{"A", "B", "C"});

  const auto parsed = uqa::parse_base_query(bq.rendered_text);
  CHECK(parsed.question_text == "How much do you trust the news?");
  REQUIRE(parsed.choices.size() == 3);
  CHECK(parsed.choices[2] == std::pair<std::string, std::string>{"C", "Not at all"});
  CHECK_THROWS_AS(uqa::parse_base_query("Question: x\nAnswer: "), uqa::ValidationError);
}

TEST_CASE("base query validation") {
  auto q = sample_question();
  CHECK_THROWS_AS(uqa::render_base_query(q, {{"A", 0}, {"B", 1}}), uqa::ValidationError);
  for (int i = 3; i < 27; ++i) q.choices.push_back({"?", "x", 1});
  CHECK_THROWS_AS(uqa::render_base_query(q), uqa::ValidationError);
}

TEST_CASE("cloze selection reads label tokens at the answer slot") {
  const auto bq = uqa::render_base_query(sample_question(), {{"A", 0}, {"B", 1}, {"C", 2}});
  const auto d = uqa::make_distribution(std::vector<double>{0.2, 0.5, 0.1, 0.2});
  const auto out = uqa::cloze_select(d, bq);
  CHECK(out.chosen_label == "B");
  CHECK_FALSE(out.tie);
  CHECK(out.label_probs[2].second == 0.1);

  const auto tied = uqa::make_distribution(std::vector<double>{0.3, 0.3, 0.1, 0.3});
  const auto t = uqa::cloze_select(tied, bq);
  CHECK(t.chosen_label == "A");
  CHECK(t.tie);

  const auto none = uqa::make_distribution(std::vector<double>{0.0, 0.0, 0.0, 1.0});
  CHECK_THROWS_AS(uqa::cloze_select(none, bq), uqa::Unavailable);
  CHECK_THROWS_AS(uqa::cloze_select(d, uqa::render_base_query(sample_question())), uqa::ValidationError);
}

TEST_CASE("ensemble majority vote") {
  std::vector<uqa::ClozeOutcome> votes(5);
  const char* labels[] = {"B", "A", "B", "C", "A"};
  for (int i = 0; i < 5; ++i) votes[i].chosen_label = labels[i];
  const auto tie = uqa::ensemble_select(votes);
  CHECK(tie.label == "A");  // A and B both have two votes
  CHECK(tie.tie);
  CHECK(tie.votes.at("C") == 1);

  votes[3].chosen_label = "B";
  const auto clear = uqa::ensemble_select(votes);
  CHECK(clear.label == "B");
  CHECK_FALSE(clear.tie);
  CHECK_THROWS_AS(uqa::ensemble_select({}), uqa::ValidationError);
}

TEST_CASE("self-report probe appends the answer and the secondary query") {
  const auto bq = uqa::render_base_query(sample_question());
  const auto p = uqa::render_sr_probe(bq, "B");
  CHECK(p == bq.rendered_text + "B\nOf the available choices, this answer is the: ");
  CHECK_THROWS_AS(uqa::render_sr_probe(bq, "D"), uqa::ValidationError);
}

TEST_CASE("variant seeds separate questions and variants") {
  CHECK(uqa::variant_seed(1, "q1", 1) == uqa::variant_seed(1, "q1", 1));
  CHECK(uqa::variant_seed(1, "q1", 1) != uqa::variant_seed(1, "q1", 2));
  CHECK(uqa::variant_seed(1, "q1", 1) != uqa::variant_seed(1, "q2", 1));
  CHECK(uqa::variant_seed(1, "q1", 1) != uqa::variant_seed(2, "q1", 1));
}

TEST_CASE("collection from a synthetic model") {
  const auto questions = uqa::generate_fixture(5, {2, 5}, 9);
  const auto model = uqa::synthetic_model(48, 0.1, 4);

  uqa::CollectOptions opts;
  opts.seed = 21;
  const auto rec = uqa::collect(*model, questions, opts);
  REQUIRE(rec.questions.size() == 5);
  std::size_t distributions = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& qr = rec.questions[i];
    CHECK(qr.question_id == questions[i].id);
    CHECK(qr.base.meta().question_id == questions[i].id);
    CHECK(qr.base.meta().variant_id == 0);
    REQUIRE(qr.ensemble.variants.size() == 30);
    CHECK(qr.ensemble.variants[29].meta().variant_id == 30);
    CHECK(qr.self_report.has_value());
    REQUIRE(qr.population_probes.size() == 30);
    CHECK(qr.population_probes[0].size() == questions[i].choices.size());
    distributions += 1 + qr.ensemble.variants.size();
  }
  CHECK(distributions == 5 + 150);
  CHECK(rec.label_tokens.at("A") == 0);

  SUBCASE("deterministic and independent of the worker count") {
    opts.workers = 3;
    CHECK(uqa::collect(*model, questions, opts) == rec);
  }
  SUBCASE("ensemble_n = 0 collects the base only") {
    opts.ensemble_n = 0;
    const auto base_only = uqa::collect(*model, questions, opts);
    CHECK(base_only.questions[0].ensemble.variants.empty());
    CHECK(base_only.questions[0].population_probes.empty());
    CHECK(base_only.questions[0].base == rec.questions[0].base);
  }
  SUBCASE("negative ensemble size is rejected") {
    opts.ensemble_n = -1;
    CHECK_THROWS_AS(uqa::collect(*model, questions, opts), uqa::ValidationError);
  }
}

TEST_CASE("collection checks provider capabilities") {
  const auto questions = uqa::generate_fixture(2, {3, 3}, 1);
  FixedProvider no_ensemble(false);
  CHECK_THROWS_AS(uqa::collect(no_ensemble, questions), uqa::ProviderError);
  uqa::CollectOptions base_only;
  base_only.ensemble_n = 0;
  const auto rec = uqa::collect(no_ensemble, questions, base_only);
  CHECK(rec.questions.size() == 2);
  REQUIRE(rec.questions[0].self_report.has_value());
  CHECK(rec.questions[0].self_report->chosen_label == "B");
  CHECK(rec.questions[0].self_report->p_best == 0.1);  // read at token "best"

  auto wide = uqa::generate_fixture(1, {4, 4}, 1);
  CHECK_THROWS_AS(uqa::collect(no_ensemble, wide, base_only), uqa::ProviderError);  // no token for "D"
}
