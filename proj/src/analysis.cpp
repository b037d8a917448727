#include "uqa/analysis.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "uqa/error.hpp"
#include "uqa/hash.hpp"

namespace uqa {

namespace {

bool constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

using ResultIndex = std::map<std::pair<std::string, MeasureKind>, const MeasureResult*>;

ResultIndex index_results(const ModelMeasures& m) {
  ResultIndex idx;
  for (const auto& r : m.results) idx[{r.question_id, r.measure}] = &r;
  return idx;
}

struct Sample {
  std::string question_id;
  std::size_t choice = 0;
  double x = 0.0;
  double y = 0.0;
};

CorrelationCell correlate_cell(const ModelMeasures& m, MeasureKind kind, std::span<const SurveyQuestion> questions,
                               const Phase1Options& options) {
  CorrelationCell cell;
  cell.model_id = m.model.model_id;
  cell.measure = kind;

  std::unordered_map<std::string, const SurveyQuestion*> by_id;
  for (const auto& q : questions) by_id.emplace(q.id, &q);

  std::vector<Sample> samples;
  std::vector<double> per_question_r;
  for (const auto& r : m.results) {
    if (r.measure != kind || !r.available) continue;
    auto it = by_id.find(r.question_id);
    if (it == by_id.end()) continue;
    const SurveyQuestion& q = *it->second;
    if (arity(kind) == Arity::PerQuestion) {
      samples.push_back({q.id, 0, r.scalar(), human_uncertainty(q)});
      continue;
    }
    const auto human = human_distribution(q).probs;
    if (r.values.size() != human.size()) {
      throw ValidationError(fmt::format("model \"{}\" {} on \"{}\": {} values for {} choices", m.model.model_id,
                                        to_string(kind), q.id, r.values.size(), human.size()));
    }
    if (options.pooling == ChoicePooling::Flat) {
      for (std::size_t c = 0; c < human.size(); ++c) samples.push_back({q.id, c, r.values[c], human[c]});
    } else if (human.size() >= 3) {
      if (auto rq = pearson(r.values, human)) per_question_r.push_back(*rq);
    }
  }

  if (arity(kind) == Arity::PerChoice && options.pooling == ChoicePooling::QuestionMean) {
    cell.n = per_question_r.size();
    if (cell.n < 3) {
      cell.reason = fmt::format("only {} questions with a defined per-question correlation", cell.n);
      return cell;
    }
    cell.r = std::accumulate(per_question_r.begin(), per_question_r.end(), 0.0) / static_cast<double>(cell.n);
  } else {
    // Canonical sample order makes the sums independent of input ordering.
    std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
      return std::tie(a.question_id, a.choice) < std::tie(b.question_id, b.choice);
    });
    cell.n = samples.size();
    if (cell.n < 3) {
      cell.reason = fmt::format("only {} samples with available values", cell.n);
      return cell;
    }
    std::vector<double> xs, ys;
    for (const auto& s : samples) {
      xs.push_back(s.x);
      ys.push_back(s.y);
    }
    cell.r = pearson(xs, ys);
    if (!cell.r) {
      cell.reason = "zero variance";
      return cell;
    }
  }
  cell.significant = std::abs(*cell.r) >= options.significance;
  return cell;
}

}  // namespace

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw AnalysisError(fmt::format("pearson: lengths {} and {} differ", x.size(), y.size()));
  if (x.size() < 3) throw AnalysisError(fmt::format("pearson: need >= 3 points, got {}", x.size()));
  if (constant(x) || constant(y)) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

const CorrelationCell* Phase1Table::find(std::string_view model_id, MeasureKind m) const {
  for (const auto& c : cells) {
    if (c.model_id == model_id && c.measure == m) return &c;
  }
  return nullptr;
}

Phase1Table phase1(std::span<const ModelMeasures> models, std::span<const SurveyQuestion> questions,
                   const Phase1Options& options) {
  std::vector<std::pair<MeasureSummary, std::vector<CorrelationCell>>> groups;
  for (auto kind : kAllMeasures) {
    std::vector<CorrelationCell> cells;
    std::vector<std::optional<double>> rs;
    for (const auto& m : models) {
      cells.push_back(correlate_cell(m, kind, questions, options));
      rs.push_back(cells.back().r);
    }
    groups.push_back({MeasureSummary{kind, mean_of(rs), uncertainty_orientation(kind)}, std::move(cells)});
  }
  std::stable_sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    const auto& ma = a.first.mean_r;
    const auto& mb = b.first.mean_r;
    if (ma.has_value() != mb.has_value()) return ma.has_value();
    return ma && *ma > *mb;
  });
  Phase1Table table;
  for (auto& [summary, cells] : groups) {
    table.order.push_back(summary);
    for (auto& c : cells) table.cells.push_back(std::move(c));
  }
  return table;
}

std::optional<double> size_correlation(std::span<const double> similarity, std::span<const double> sizes) {
  if (similarity.size() < 3) return std::nullopt;
  return pearson(similarity, sizes);
}

std::vector<SizeCorrelation> size_correlations(const Phase1Table& table, std::span<const ModelMeasures> models) {
  std::vector<SizeCorrelation> out;
  for (const auto& summary : table.order) {
    SizeCorrelation sc;
    sc.measure = summary.measure;
    std::vector<double> sim, sizes;
    for (const auto& m : models) {
      const auto* cell = table.find(m.model.model_id, summary.measure);
      if (cell && cell->r) {
        sim.push_back(*cell->r);
        sizes.push_back(static_cast<double>(m.model.param_count));
      }
    }
    sc.n_models = sim.size();
    if (sc.n_models < 3) {
      sc.reason = fmt::format("only {} models with an available correlation", sc.n_models);
    } else {
      sc.r = size_correlation(sim, sizes);
      if (!sc.r) sc.reason = "zero variance in similarity or size";
    }
    out.push_back(std::move(sc));
  }
  std::stable_sort(out.begin(), out.end(), [](const SizeCorrelation& a, const SizeCorrelation& b) {
    if (a.r.has_value() != b.r.has_value()) return a.r.has_value();
    return a.r && *a.r > *b.r;
  });
  return out;
}

Eigen::VectorXd OlsFit::predict(const Eigen::MatrixXd& features) const {
  return (features * coefficients).array() + intercept;
}

OlsFit fit_ols(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, std::span<const std::string> names) {
  const auto rows = features.rows();
  const auto cols = features.cols();
  if (target.size() != rows) throw AnalysisError("fit_ols: target length differs from row count");
  if (cols < 1) throw AnalysisError("fit_ols: no features");
  if (rows < cols + 2) {
    throw AnalysisError(fmt::format("fit_ols: {} rows for {} features (need >= {})", rows, cols, cols + 2));
  }
  std::vector<double> y(target.data(), target.data() + target.size());
  if (constant(y)) throw AnalysisError("fit_ols: target has zero variance");

  Eigen::MatrixXd design(rows, cols + 1);
  design.col(0).setOnes();
  design.rightCols(cols) = features;
  // Unit-norm columns so the rank threshold does not depend on feature scale.
  Eigen::VectorXd scale = design.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j) {
    if (scale[j] == 0.0) scale[j] = 1.0;
  }
  const Eigen::MatrixXd scaled = design * scale.cwiseInverse().asDiagonal();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols + 1) {
    std::vector<std::string> collinear;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < perm.size(); ++k) {
      const auto j = perm[k];
      if (j == 0) {
        collinear.emplace_back("intercept");
      } else if (static_cast<std::size_t>(j - 1) < names.size()) {
        collinear.push_back(names[j - 1]);
      } else {
        collinear.push_back(fmt::format("column {}", j - 1));
      }
    }
    throw AnalysisError(fmt::format("fit_ols: design matrix is rank deficient ({} of {}); collinear: {}", qr.rank(),
                                    cols + 1, fmt::join(collinear, ", ")));
  }
  const Eigen::VectorXd beta = scale.cwiseInverse().asDiagonal() * qr.solve(target);

  OlsFit fit;
  fit.intercept = beta[0];
  fit.coefficients = beta.tail(cols);
  const Eigen::VectorXd pred = fit.predict(features);
  std::vector<double> p(pred.data(), pred.data() + pred.size());
  const auto r = pearson(p, y);
  if (!r) throw AnalysisError("fit_ols: predictions are constant");
  fit.full_fit_r = *r;
  return fit;
}

std::vector<std::vector<std::size_t>> fold_partition(std::size_t rows, int folds, std::uint64_t seed) {
  if (folds < 2) throw AnalysisError(fmt::format("cross validation needs >= 2 folds, got {}", folds));
  std::vector<std::size_t> perm(rows);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(mix_seed(seed, 0xf01d));
  for (std::size_t i = rows; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  const std::size_t base = rows / folds;
  const std::size_t extra = rows % folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < out.size(); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    out[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos), perm.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return out;
}

CrossValidation cross_validate(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, int folds,
                               std::uint64_t seed) {
  const auto rows = static_cast<std::size_t>(features.rows());
  if (folds >= 2 && rows / static_cast<std::size_t>(folds) < 3) {
    throw AnalysisError(fmt::format("cross validation: {} rows cannot give {} folds of >= 3 rows", rows, folds));
  }
  const auto partition = fold_partition(rows, folds, seed);
  CrossValidation cv;
  for (const auto& held_out : partition) {
    std::vector<bool> is_held(rows, false);
    for (auto i : held_out) is_held[i] = true;
    std::vector<Eigen::Index> train;
    for (std::size_t i = 0; i < rows; ++i) {
      if (!is_held[i]) train.push_back(static_cast<Eigen::Index>(i));
    }
    std::vector<Eigen::Index> test(held_out.begin(), held_out.end());
    const Eigen::MatrixXd x_train = features(train, Eigen::all);
    const Eigen::VectorXd y_train = target(train);
    const Eigen::MatrixXd x_test = features(test, Eigen::all);
    const Eigen::VectorXd y_test = target(test);

    const auto fit = fit_ols(x_train, y_train);
    const Eigen::VectorXd pred = fit.predict(x_test);
    std::vector<double> p(pred.data(), pred.data() + pred.size());
    std::vector<double> t(y_test.data(), y_test.data() + y_test.size());
    cv.fold_rs.push_back(pearson(p, t));
  }
  cv.mean_r = mean_of(cv.fold_rs);
  return cv;
}

std::vector<std::pair<std::string, std::vector<MeasureKind>>> regression_feature_sets() {
  std::vector<std::pair<std::string, std::vector<MeasureKind>>> sets;
  for (auto m : kPerQuestionMeasures) sets.push_back({std::string(to_string(m)), {m}});
  sets.push_back({"ALL", std::vector<MeasureKind>(kPerQuestionMeasures.begin(), kPerQuestionMeasures.end())});
  sets.push_back({"KE+NS", {MeasureKind::KE, MeasureKind::NS}});
  return sets;
}

std::vector<RegressionModel> phase2(std::span<const ModelMeasures> models, std::span<const SurveyQuestion> questions,
                                    const Phase2Options& options) {
  const auto sets = regression_feature_sets();
  std::vector<RegressionModel> out;
  for (const auto& m : models) {
    const auto idx = index_results(m);
    for (const auto& [name, features] : sets) {
      RegressionModel rm;
      rm.model_id = m.model.model_id;
      rm.name = name;
      rm.features = features;

      std::vector<std::vector<double>> rows;
      std::vector<double> target;
      for (const auto& q : questions) {
        std::vector<double> row;
        for (auto f : features) {
          auto it = idx.find({q.id, f});
          if (it == idx.end() || !it->second->available) break;
          row.push_back(it->second->scalar());
        }
        if (row.size() != features.size()) continue;
        rows.push_back(std::move(row));
        target.push_back(human_uncertainty(q));
      }
      rm.n = rows.size();

      std::vector<std::string> names;
      for (auto f : features) names.emplace_back(to_string(f));
      Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(features.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < features.size(); ++j) x(i, j) = rows[i][j];
      }
      const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<Eigen::Index>(target.size()));
      try {
        const auto fit = fit_ols(x, y, names);
        rm.coefficients.assign(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
        rm.intercept = fit.intercept;
        rm.full_fit_r = fit.full_fit_r;
        rm.cv = cross_validate(x, y, options.folds, options.seed);
      } catch (const AnalysisError& e) {
        rm.reason = e.what();
        if (!rm.full_fit_r) rm.coefficients.clear();
      }
      out.push_back(std::move(rm));
    }
  }
  return out;
}

AnalysisReport analyze(std::span<const ModelMeasures> models, std::span<const SurveyQuestion> questions,
                       const AnalysisOptions& options) {
  AnalysisReport report;
  report.options = options;
  for (const auto& m : models) report.models.push_back(m.model);
  report.phase1 = phase1(models, questions, options.phase1);
  report.size = size_correlations(report.phase1, models);
  report.regressions = phase2(models, questions, options.phase2);

  for (const auto& [name, _] : regression_feature_sets()) {
    std::vector<std::optional<double>> cv, full;
    for (const auto& r : report.regressions) {
      if (r.name != name) continue;
      cv.push_back(r.cv.mean_r);
      full.push_back(r.full_fit_r);
    }
    report.regression_order.push_back({name, mean_of(cv), mean_of(full)});
  }
  std::stable_sort(report.regression_order.begin(), report.regression_order.end(),
                   [](const RegressionSummary& a, const RegressionSummary& b) {
                     if (a.mean_cv_r.has_value() != b.mean_cv_r.has_value()) return a.mean_cv_r.has_value();
                     return a.mean_cv_r && *a.mean_cv_r < *b.mean_cv_r;
                   });
  return report;
}

}  // namespace uqa
