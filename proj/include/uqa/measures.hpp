#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uqa/dist.hpp"
#include "uqa/records.hpp"
#include "uqa/survey.hpp"

namespace uqa {

enum class MeasureKind { SR, RF, NS, VE, CE, KE, PV, PS };

inline constexpr std::array<MeasureKind, 8> kAllMeasures = {MeasureKind::SR, MeasureKind::RF, MeasureKind::NS,
                                                            MeasureKind::VE, MeasureKind::CE, MeasureKind::KE,
                                                            MeasureKind::PV, MeasureKind::PS};

/// The measures usable as regression features (one scalar per question).
inline constexpr std::array<MeasureKind, 5> kPerQuestionMeasures = {MeasureKind::SR, MeasureKind::NS, MeasureKind::VE,
                                                                    MeasureKind::CE, MeasureKind::KE};

enum class Arity { PerQuestion, PerChoice };

// Up: larger values mean more uncertainty. Down: larger values mean more certainty.
enum class Orientation { Up, Down };

inline constexpr double kDefaultNucleusThreshold = 0.95;
inline constexpr std::int64_t kDefaultTopK = 10;

Arity arity(MeasureKind kind);
Orientation uncertainty_orientation(MeasureKind kind);
std::string_view to_string(MeasureKind kind);
std::string_view to_string(Orientation o);
MeasureKind measure_from_string(std::string_view name);

struct MeasureResult {
  std::string model_id;
  MeasureKind measure = MeasureKind::SR;
  std::string question_id;
  std::vector<double> values;       // one entry, or one per choice
  std::vector<std::string> labels;  // choice labels for PER_CHOICE results
  bool available = false;
  std::string reason;  // why the value is unavailable

  double scalar() const { return values.at(0); }
  bool operator==(const MeasureResult&) const = default;
};

std::vector<double> measure_rf(const ChoiceProjection& proj);
std::int64_t measure_ns(const TokenDistribution& d, double threshold = kDefaultNucleusThreshold);
/// Throws Unavailable for TOP_K input.
double measure_ve(const TokenDistribution& d);
double measure_ke(const TokenDistribution& d, std::int64_t k = kDefaultTopK);
/// Raw-term entropy over the label probabilities. Throws Unavailable when all are zero.
double measure_ce(const ChoiceProjection& proj);
double measure_ce(const TokenDistribution& d, const SurveyQuestion& q, const LabelTokens& label_tokens);
/// p_best / (p_best + p_worst). Throws Unavailable when both are zero.
double measure_sr(const SelfReportProbe& probe);
/// Population standard deviation across variants of each label probability.
std::vector<double> measure_pv(std::span<const ChoiceProjection> variants);
std::vector<double> measure_pv(const EnsembleRecord& ensemble, const SurveyQuestion& q, const LabelTokens& label_tokens);
/// Per-choice mean over variants of measure_sr; per_variant[v] holds one probe per choice.
std::vector<double> measure_ps(const std::vector<std::vector<SelfReportProbe>>& per_variant, const SurveyQuestion& q);

struct MeasureConfig {
  double nucleus_threshold = kDefaultNucleusThreshold;
  std::int64_t top_k = kDefaultTopK;
};

/// All eight measures for every question in `records`, in question order then
/// kAllMeasures order. Questions are looked up by id in `questions`.
std::vector<MeasureResult> compute_measures(const ModelRecords& records, std::span<const SurveyQuestion> questions,
                                            const MeasureConfig& config = {});

}  // namespace uqa
