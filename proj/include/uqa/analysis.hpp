#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uqa/measures.hpp"
#include "uqa/records.hpp"
#include "uqa/survey.hpp"

namespace uqa {

inline constexpr double kDefaultSignificance = 0.3;
inline constexpr int kDefaultFolds = 3;

/// Product-moment correlation, clamped to [-1, 1]. Returns nullopt when either
/// vector is constant. Throws AnalysisError on length mismatch or fewer than 3
/// points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// ---- phase 1 ---------------------------------------------------------------

/// How PER_CHOICE samples from questions of different sizes are pooled.
/// Flat: every (question, choice) pair is one sample. QuestionMean: one
/// correlation per question (>= 3 choices), averaged.
enum class ChoicePooling { Flat, QuestionMean };

struct ModelMeasures {
  ModelInfo model;
  std::vector<MeasureResult> results;

  bool operator==(const ModelMeasures&) const = default;
};

struct CorrelationCell {
  std::string model_id;
  MeasureKind measure = MeasureKind::SR;
  std::optional<double> r;
  std::size_t n = 0;
  bool significant = false;
  std::string reason;  // set when r is unavailable
};

struct MeasureSummary {
  MeasureKind measure = MeasureKind::SR;
  std::optional<double> mean_r;  // over models with an available r
  Orientation orientation = Orientation::Up;
};

struct Phase1Table {
  /// Measures in report order: descending mean r; measures with no available
  /// cell go last. Ties keep the canonical measure order.
  std::vector<MeasureSummary> order;
  /// Cells grouped by `order`, models in input order within each measure.
  std::vector<CorrelationCell> cells;

  const CorrelationCell* find(std::string_view model_id, MeasureKind m) const;
};

struct Phase1Options {
  double significance = kDefaultSignificance;
  ChoicePooling pooling = ChoicePooling::Flat;
};

Phase1Table phase1(std::span<const ModelMeasures> models, std::span<const SurveyQuestion> questions,
                   const Phase1Options& options = {});

struct SizeCorrelation {
  MeasureKind measure = MeasureKind::SR;
  std::optional<double> r;
  std::size_t n_models = 0;
  std::string reason;
};

/// Pearson r between per-model human-similarity scores and parameter counts.
/// nullopt with fewer than 3 models or zero variance.
std::optional<double> size_correlation(std::span<const double> similarity, std::span<const double> sizes);

/// One entry per measure, ordered by descending size correlation
/// (unavailable last).
std::vector<SizeCorrelation> size_correlations(const Phase1Table& table, std::span<const ModelMeasures> models);

// ---- regression --------------------------------------------------------------

struct OlsFit {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double full_fit_r = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;
};

/// Least squares with an intercept column via column-pivoted QR. Needs
/// rows >= features + 2. Throws AnalysisError on rank deficiency (naming
/// the collinear columns from `names`) or a constant target.
OlsFit fit_ols(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
               std::span<const std::string> names = {});

/// Seeded Fisher-Yates permutation split into contiguous folds; the first
/// n % folds folds get one extra row.
std::vector<std::vector<std::size_t>> fold_partition(std::size_t rows, int folds, std::uint64_t seed);

struct CrossValidation {
  std::vector<std::optional<double>> fold_rs;
  std::optional<double> mean_r;  // mean of the available fold r values
};

CrossValidation cross_validate(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
                               int folds = kDefaultFolds, std::uint64_t seed = 0);

struct RegressionModel {
  std::string model_id;
  std::string name;  // "SR".."KE", "ALL" or "KE+NS"
  std::vector<MeasureKind> features;
  std::vector<double> coefficients;
  double intercept = 0.0;
  std::optional<double> full_fit_r;
  CrossValidation cv;
  std::size_t n = 0;
  std::string reason;  // set when the fit failed

  bool available() const { return full_fit_r.has_value(); }
};

struct Phase2Options {
  int folds = kDefaultFolds;
  std::uint64_t seed = 0;
};

/// The regression feature sets: each per-question measure alone, all five,
/// and KE with NS.
std::vector<std::pair<std::string, std::vector<MeasureKind>>> regression_feature_sets();

/// For every model and feature set, fits human uncertainty on the questions
/// where all features are available. Failed fits are kept with `reason`.
std::vector<RegressionModel> phase2(std::span<const ModelMeasures> models, std::span<const SurveyQuestion> questions,
                                    const Phase2Options& options = {});

// ---- full report -------------------------------------------------------------

struct AnalysisOptions {
  Phase1Options phase1;
  Phase2Options phase2;
};

struct RegressionSummary {
  std::string name;
  std::optional<double> mean_cv_r;
  std::optional<double> mean_full_fit_r;
};

struct AnalysisReport {
  std::vector<ModelInfo> models;
  AnalysisOptions options;
  Phase1Table phase1;
  std::vector<SizeCorrelation> size;
  /// Feature sets in ascending order of mean CV r (unavailable last).
  std::vector<RegressionSummary> regression_order;
  std::vector<RegressionModel> regressions;

  bool empty() const { return models.empty(); }
};

AnalysisReport analyze(std::span<const ModelMeasures> models, std::span<const SurveyQuestion> questions,
                       const AnalysisOptions& options = {});

}  // namespace uqa
