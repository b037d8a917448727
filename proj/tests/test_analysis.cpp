#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "uqa/analysis.hpp"
#include "uqa/error.hpp"
#include "uqa/hash.hpp"

using uqa::MeasureKind;
using Vec = std::vector<double>;

namespace {

Vec pearson_args(std::initializer_list<double> v) { return Vec(v); }

// Centred, orthogonal to `basis`, unit population variance.
Vec orthonormal(Vec v, const std::vector<Vec>& basis) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (auto& x : v) x -= mean;
  for (const auto& b : basis) {
    const double c = std::inner_product(v.begin(), v.end(), b.begin(), 0.0) /
                     std::inner_product(b.begin(), b.end(), b.begin(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * b[i];
  }
  const double s = std::sqrt(static_cast<double>(v.size()) / std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  for (auto& x : v) x *= s;
  return v;
}

Vec human_entropies(const std::vector<uqa::SurveyQuestion>& qs) {
  Vec h;
  for (const auto& q : qs) h.push_back(uqa::human_uncertainty(q));
  return h;
}

Vec normals(uqa::Rng& rng, std::size_t n) {
  Vec v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Values whose sample correlation with `h` is exactly `r` (up to rounding).
Vec with_correlation(const Vec& h, double r, uqa::Rng& rng) {
  const Vec z = orthonormal(h, {});
  const Vec w = orthonormal(normals(rng, h.size()), {z});
  Vec x(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) x[i] = 2.0 + r * z[i] + std::sqrt(1 - r * r) * w[i];
  return x;
}

uqa::MeasureResult scalar(const std::string& model, MeasureKind k, const std::string& qid, double v) {
  return {model, k, qid, {v}, {}, true, ""};
}

uqa::ModelMeasures measures_for(const std::string& id, std::int64_t params, const std::vector<uqa::SurveyQuestion>& qs,
                                const std::map<MeasureKind, Vec>& values) {
  uqa::ModelMeasures m{{id, "test", params, false}, {}};
  for (std::size_t i = 0; i < qs.size(); ++i) {
    for (const auto& [k, v] : values) m.results.push_back(scalar(id, k, qs[i].id, v[i]));
  }
  return m;
}

Eigen::MatrixXd to_matrix(const std::vector<Vec>& rows) {
  Eigen::MatrixXd x(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[0].size(); ++j) x(i, j) = rows[i][j];
  }
  return x;
}

Eigen::VectorXd to_vector(const Vec& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

}  // namespace

TEST_CASE("pearson anchors") {
  CHECK(*uqa::pearson(pearson_args({1, 2, 3}), pearson_args({2, 4, 6})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(*uqa::pearson(pearson_args({1, 2, 3}), pearson_args({3, 2, 1})) == doctest::Approx(-1.0).epsilon(1e-15));
  // The product-moment value; 0.8 would be the rank correlation of these vectors.
  CHECK(*uqa::pearson(pearson_args({1, 2, 3, 4}), pearson_args({1, 3, 2, 5})) ==
        doctest::Approx(0.8315218406202999).epsilon(1e-14));
  CHECK_FALSE(uqa::pearson(pearson_args({1, 1, 1}), pearson_args({1, 2, 3})).has_value());
  CHECK_FALSE(uqa::pearson(pearson_args({1, 2, 3}), pearson_args({4, 4, 4})).has_value());
  CHECK_THROWS_AS(uqa::pearson(pearson_args({1, 2}), pearson_args({1, 2})), uqa::AnalysisError);
  CHECK_THROWS_AS(uqa::pearson(pearson_args({1, 2, 3}), pearson_args({1, 2})), uqa::AnalysisError);

  uqa::Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto x = normals(rng, 3 + rng.below(60));
    auto y = normals(rng, x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += 0.5 * x[i];
    const double r = *uqa::pearson(x, y);
    CHECK(r == doctest::Approx(oracle::pearson(x, y)).epsilon(1e-12));
    // Positive affine maps of either argument leave r unchanged.
    Vec x2 = x;
    for (auto& v : x2) v = 3.0 * v + 7.0;
    CHECK(std::abs(*uqa::pearson(x2, y) - r) < 1e-12);
  }
}

TEST_CASE("ordinary least squares") {
  SUBCASE("noiseless line") {
    const Vec x = {0, 1, 2, 3, 4, 5};
    Vec y;
    for (double v : x) y.push_back(2 * v + 1);
    Eigen::MatrixXd xm = to_vector(x);
    const auto fit = uqa::fit_ols(xm, to_vector(y));
    CHECK(std::abs(fit.coefficients[0] - 2.0) < 1e-9);
    CHECK(std::abs(fit.intercept - 1.0) < 1e-9);
    CHECK(fit.full_fit_r == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("two features against the normal-equation oracle") {
    uqa::Rng rng(31);
    std::vector<Vec> rows;
    Vec y;
    for (int i = 0; i < 12; ++i) {
      const Vec row = {rng.normal(), rng.uniform(0, 5)};
      rows.push_back(row);
      y.push_back(0.5 + 1.5 * row[0] - 2.0 * row[1] + 0.3 * rng.normal());
    }
    const auto fit = uqa::fit_ols(to_matrix(rows), to_vector(y));
    const auto ref = oracle::ols(rows, y);
    CHECK(std::abs(fit.intercept - ref.intercept) < 1e-9);
    CHECK(std::abs(fit.coefficients[0] - ref.coefficients[0]) < 1e-9);
    CHECK(std::abs(fit.coefficients[1] - ref.coefficients[1]) < 1e-9);
    CHECK(std::abs(fit.full_fit_r - ref.r) < 1e-9);
  }

  SUBCASE("degenerate designs") {
    Eigen::MatrixXd x(5, 2);
    x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;  // second column = 2 * first
    const Eigen::VectorXd y = (Eigen::VectorXd(5) << 1, 3, 2, 5, 4).finished();
    const std::vector<std::string> names = {"KE", "NS"};
    CHECK_THROWS_WITH_AS(uqa::fit_ols(x, y, names), doctest::Contains("collinear"), uqa::AnalysisError);
    try {
      uqa::fit_ols(x, y, names);
    } catch (const uqa::AnalysisError& e) {
      const std::string msg = e.what();
      CHECK((msg.find("KE") != std::string::npos || msg.find("NS") != std::string::npos));
    }

    Eigen::MatrixXd constant_col(5, 1);
    constant_col << 3, 3, 3, 3, 3;  // collinear with the intercept
    CHECK_THROWS_AS(uqa::fit_ols(constant_col, y), uqa::AnalysisError);

    const Eigen::VectorXd flat = Eigen::VectorXd::Constant(5, 2.0);
    CHECK_THROWS_WITH_AS(uqa::fit_ols(x.leftCols(1), flat), doctest::Contains("zero variance"), uqa::AnalysisError);
    CHECK_THROWS_AS(uqa::fit_ols(x.topRows(2).leftCols(1), y.head(2)), uqa::AnalysisError);
  }
}

TEST_CASE("fold partition") {
  const auto folds = uqa::fold_partition(38, 3, 5);
  REQUIRE(folds.size() == 3);
  CHECK(folds[0].size() == 13);
  CHECK(folds[1].size() == 13);
  CHECK(folds[2].size() == 12);
  std::set<std::size_t> all;
  for (const auto& f : folds) all.insert(f.begin(), f.end());
  CHECK(all.size() == 38);
  CHECK(*all.rbegin() == 37);
  CHECK(uqa::fold_partition(38, 3, 5) == folds);
  CHECK_FALSE(uqa::fold_partition(38, 3, 6) == folds);
  CHECK_THROWS_AS(uqa::fold_partition(10, 1, 0), uqa::AnalysisError);
}

TEST_CASE("cross validation") {
  uqa::Rng rng(77);
  SUBCASE("noiseless target") {
    std::vector<Vec> rows;
    Vec y;
    for (int i = 0; i < 38; ++i) {
      rows.push_back({rng.normal(), rng.normal()});
      y.push_back(1.0 + rows.back()[0] - 0.5 * rows.back()[1]);
    }
    const auto cv = uqa::cross_validate(to_matrix(rows), to_vector(y), 3, 1);
    REQUIRE(cv.fold_rs.size() == 3);
    for (const auto& r : cv.fold_rs) CHECK(*r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*cv.mean_r == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("pure noise target generalises poorly") {
    std::vector<Vec> rows;
    Vec y;
    for (int i = 0; i < 38; ++i) {
      rows.push_back(normals(rng, 5));
      y.push_back(rng.normal());
    }
    const auto cv = uqa::cross_validate(to_matrix(rows), to_vector(y), 3, 2);
    CHECK(std::abs(*cv.mean_r) < 0.3);
    const auto again = uqa::cross_validate(to_matrix(rows), to_vector(y), 3, 2);
    CHECK(again.fold_rs == cv.fold_rs);
  }

  SUBCASE("too few rows per fold") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Random(8);
    CHECK_THROWS_AS(uqa::cross_validate(x, y, 3, 0), uqa::AnalysisError);
  }
}

TEST_CASE("phase 1 correlations") {
  const auto qs = uqa::generate_fixture(38, {2, 5}, 12);
  const Vec h = human_entropies(qs);
  uqa::Rng rng(3);

  const auto m1 = measures_for("m1", 10, qs,
                               {{MeasureKind::KE, with_correlation(h, 0.31, rng)},
                                {MeasureKind::VE, with_correlation(h, 0.29, rng)},
                                {MeasureKind::NS, Vec(qs.size(), 4.0)},
                                {MeasureKind::CE, with_correlation(h, -0.6, rng)}});
  const auto m2 = measures_for("m2", 20, qs,
                               {{MeasureKind::KE, with_correlation(h, 0.5, rng)},
                                {MeasureKind::VE, with_correlation(h, 0.1, rng)},
                                {MeasureKind::NS, Vec(qs.size(), 2.0)},
                                {MeasureKind::CE, with_correlation(h, -0.2, rng)}});
  const std::vector<uqa::ModelMeasures> models = {m1, m2};
  const auto table = uqa::phase1(models, qs);

  const auto* ke = table.find("m1", MeasureKind::KE);
  REQUIRE(ke != nullptr);
  CHECK(*ke->r == doctest::Approx(0.31).epsilon(1e-12));
  CHECK(ke->significant);
  CHECK(ke->n == 38);
  CHECK_FALSE(table.find("m1", MeasureKind::VE)->significant);
  CHECK(table.find("m1", MeasureKind::CE)->significant);  // |r| counts, sign kept
  CHECK(*table.find("m1", MeasureKind::CE)->r < 0);

  const auto* ns = table.find("m1", MeasureKind::NS);
  CHECK_FALSE(ns->r.has_value());
  CHECK_FALSE(ns->reason.empty());
  CHECK_FALSE(table.find("m1", MeasureKind::PV)->r.has_value());

  // Descending mean r, measures without any value last.
  REQUIRE(table.order.size() == 8);
  CHECK(table.order[0].measure == MeasureKind::KE);
  CHECK(*table.order[0].mean_r == doctest::Approx((0.31 + 0.5) / 2).epsilon(1e-12));
  CHECK(table.order[1].measure == MeasureKind::VE);
  CHECK(table.order[2].measure == MeasureKind::CE);
  for (std::size_t i = 3; i < 8; ++i) CHECK_FALSE(table.order[i].mean_r.has_value());
  CHECK(table.cells.size() == 16);
  CHECK(table.cells[0].measure == MeasureKind::KE);
  CHECK(table.cells[0].model_id == "m1");

  SUBCASE("independent of question and model order") {
    auto shuffled_qs = qs;
    std::reverse(shuffled_qs.begin(), shuffled_qs.end());
    auto r1 = m1;
    std::reverse(r1.results.begin(), r1.results.end());
    const std::vector<uqa::ModelMeasures> swapped = {m2, r1};
    const auto t2 = uqa::phase1(swapped, shuffled_qs);
    for (const auto& c : table.cells) {
      const auto* other = t2.find(c.model_id, c.measure);
      REQUIRE(other != nullptr);
      CHECK(other->r == c.r);
    }
  }

  SUBCASE("significance threshold is configurable") {
    const auto strict = uqa::phase1(models, qs, {0.4, uqa::ChoicePooling::Flat});
    CHECK_FALSE(strict.find("m1", MeasureKind::KE)->significant);
  }
}

TEST_CASE("phase 1 pools per-choice measures against human frequencies") {
  const auto qs = uqa::generate_fixture(20, {3, 4}, 2);
  uqa::ModelMeasures m{{"m", "t", 1, false}, {}};
  std::vector<double> xs, ys;
  std::vector<double> per_question;
  for (const auto& q : qs) {
    const auto human = uqa::human_distribution(q).probs;
    uqa::MeasureResult r{"m", MeasureKind::RF, q.id, {}, {}, true, ""};
    for (std::size_t c = 0; c < human.size(); ++c) {
      r.values.push_back(human[c] * human[c] + 0.01 * static_cast<double>(c));
      r.labels.push_back(q.choices[c].label);
    }
    per_question.push_back(oracle::pearson(r.values, human));
    m.results.push_back(r);
  }
  // Flat pooling correlates every (question, choice) pair.
  std::vector<std::pair<std::string, std::size_t>> keys;
  for (const auto& r : m.results) {
    const auto human = uqa::human_distribution(*std::find_if(qs.begin(), qs.end(), [&](const auto& q) {
      return q.id == r.question_id;
    })).probs;
    for (std::size_t c = 0; c < human.size(); ++c) {
      xs.push_back(r.values[c]);
      ys.push_back(human[c]);
    }
  }
  const std::vector<uqa::ModelMeasures> models = {m};
  const auto flat = uqa::phase1(models, qs);
  const auto* cell = flat.find("m", MeasureKind::RF);
  CHECK(cell->n == xs.size());
  CHECK(*cell->r == doctest::Approx(oracle::pearson(xs, ys)).epsilon(1e-12));

  const auto averaged = uqa::phase1(models, qs, {0.3, uqa::ChoicePooling::QuestionMean});
  const double mean = std::accumulate(per_question.begin(), per_question.end(), 0.0) / per_question.size();
  CHECK(*averaged.find("m", MeasureKind::RF)->r == doctest::Approx(mean).epsilon(1e-12));
  CHECK(averaged.find("m", MeasureKind::RF)->n == qs.size());
}

TEST_CASE("size correlation") {
  const Vec sizes = {1e9, 3e9, 7e9, 8e9};
  CHECK(*uqa::size_correlation(Vec{0.1, 0.2, 0.3, 0.4}, sizes) > 0);
  CHECK_FALSE(uqa::size_correlation(Vec{0.2, 0.2, 0.2, 0.2}, sizes).has_value());
  CHECK_FALSE(uqa::size_correlation(Vec{0.1, 0.2}, Vec{1, 2}).has_value());
  const Vec sim = {0.12, 0.35, 0.28, 0.41};
  CHECK(*uqa::size_correlation(sim, sizes) == doctest::Approx(oracle::pearson(sim, sizes)).epsilon(1e-12));
}

TEST_CASE("phase 2 regressions") {
  const auto qs = uqa::generate_fixture(38, {2, 5}, 6);
  const Vec h = human_entropies(qs);
  uqa::Rng rng(8);
  std::map<MeasureKind, Vec> values;
  for (auto k : uqa::kPerQuestionMeasures) values[k] = with_correlation(h, 0.2 + 0.1 * static_cast<int>(k), rng);
  const std::vector<uqa::ModelMeasures> models = {measures_for("m", 5, qs, values)};
  const auto regs = uqa::phase2(models, qs, {3, 4});

  std::vector<std::string> names;
  for (const auto& r : regs) names.push_back(r.name);
  CHECK(names == std::vector<std::string>{"SR", "NS", "VE", "CE", "KE", "ALL", "KE+NS"});

  const auto& all = regs[5];
  REQUIRE(all.available());
  CHECK(all.features.size() == 5);
  CHECK(all.cv.fold_rs.size() == 3);
  CHECK(all.n == 38);
  for (std::size_t i = 0; i < 5; ++i) CHECK(*all.full_fit_r >= *regs[i].full_fit_r - 1e-10);

  const auto& kens = regs[6];
  std::vector<Vec> rows;
  for (std::size_t i = 0; i < qs.size(); ++i) rows.push_back({values[MeasureKind::KE][i], values[MeasureKind::NS][i]});
  const auto ref = oracle::ols(rows, h);
  CHECK(std::abs(kens.coefficients[0] - ref.coefficients[0]) < 1e-9);
  CHECK(std::abs(kens.coefficients[1] - ref.coefficients[1]) < 1e-9);
  CHECK(std::abs(kens.intercept - ref.intercept) < 1e-9);

  SUBCASE("a constant feature fails that model only") {
    auto v2 = values;
    v2[MeasureKind::NS] = Vec(qs.size(), 1.0);
    const std::vector<uqa::ModelMeasures> m2 = {measures_for("m", 5, qs, v2)};
    const auto r2 = uqa::phase2(m2, qs);
    CHECK_FALSE(r2[1].available());
    CHECK(r2[1].reason.find("NS") != std::string::npos);
    CHECK(r2[0].available());
  }
}

TEST_CASE("analysis report") {
  const auto qs = uqa::generate_fixture(38, {2, 5}, 6);
  const Vec h = human_entropies(qs);
  uqa::Rng rng(10);
  std::vector<uqa::ModelMeasures> models;
  for (int m = 0; m < 3; ++m) {
    std::map<MeasureKind, Vec> values;
    for (auto k : uqa::kPerQuestionMeasures) values[k] = with_correlation(h, 0.1 * (m + 1), rng);
    models.push_back(measures_for("m" + std::to_string(m), (m + 1) * 1000, qs, values));
  }
  const auto report = uqa::analyze(models, qs);
  CHECK(report.models.size() == 3);
  CHECK(report.size.size() == 8);
  CHECK(report.size[0].r.has_value());
  CHECK(*report.size[0].r > 0.99);  // similarity grows with size by construction
  CHECK(report.regressions.size() == 21);
  REQUIRE(report.regression_order.size() == 7);
  for (std::size_t i = 1; i < report.regression_order.size(); ++i) {
    CHECK(*report.regression_order[i - 1].mean_cv_r <= *report.regression_order[i].mean_cv_r);
  }

  const std::vector<uqa::ModelMeasures> two(models.begin(), models.begin() + 2);
  const auto small = uqa::analyze(two, qs);
  for (const auto& s : small.size) {
    CHECK_FALSE(s.r.has_value());
    CHECK(s.n_models <= 2);
  }
}
