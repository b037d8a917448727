#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uqa/dist.hpp"

namespace uqa {

struct ModelInfo {
  std::string model_id;
  std::string family;
  std::int64_t param_count = 1;  // parameters; must be positive
  bool instruct = false;

  bool operator==(const ModelInfo&) const = default;
};

/// Two-stage self-report reading: the base query with `conditioned_label`
/// appended, then the probabilities of the evaluator tokens "best" and "worst".
struct SelfReportProbe {
  std::string question_id;
  std::string chosen_label;       // the model's cloze (or ensemble-majority) answer
  std::string conditioned_label;  // the answer appended before the secondary query
  int variant_id = 0;
  double p_best = 0.0;
  double p_worst = 0.0;
  std::string prompt_sha256;

  bool operator==(const SelfReportProbe&) const = default;
};

struct EnsembleRecord {
  std::string model_id;
  std::string question_id;
  std::vector<TokenDistribution> variants;  // variant_id 1..N in order

  bool operator==(const EnsembleRecord&) const = default;
};

struct EvaluatorTokens {
  std::int64_t best = 0;
  std::int64_t worst = 0;

  bool operator==(const EvaluatorTokens&) const = default;
};

/// Everything collected for one question from one model.
struct QuestionRecords {
  std::string question_id;
  TokenDistribution base;
  EnsembleRecord ensemble;
  std::optional<SelfReportProbe> self_report;
  /// population_probes[v][c]: variant v+1, probe conditioned on choice c.
  std::vector<std::vector<SelfReportProbe>> population_probes;

  bool operator==(const QuestionRecords&) const = default;
};

struct ModelRecords {
  ModelInfo model;
  LabelTokens label_tokens;
  EvaluatorTokens evaluator;
  std::vector<QuestionRecords> questions;

  bool operator==(const ModelRecords&) const = default;
};

}  // namespace uqa
