#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqa/analysis.hpp"
#include "uqa/elicit.hpp"
#include "uqa/measures.hpp"
#include "uqa/providers.hpp"

namespace uqa {

inline constexpr int kDefaultEnsembleN = 30;

/// One model to collect from. Model fields left unset are taken from the
/// provider itself (synthetic defaults, or the dump for replay).
struct ProviderSpec {
  ProviderKind kind = ProviderKind::Synthetic;
  std::optional<std::string> model_id;
  std::optional<std::string> family;
  std::optional<std::int64_t> param_count;
  std::optional<bool> instruct;

  // synthetic
  int vocab_size = 64;
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;

  HttpConfig http;
  std::filesystem::path dump;  // replay
};

struct PipelineConfig {
  std::filesystem::path survey;
  std::vector<ProviderSpec> providers;
  int ensemble_n = kDefaultEnsembleN;
  double nucleus_threshold = kDefaultNucleusThreshold;
  std::int64_t top_k = kDefaultTopK;
  int folds = kDefaultFolds;
  double significance = kDefaultSignificance;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  int workers = 1;
  ChoicePooling pooling = ChoicePooling::Flat;

  /// Throws ValidationError when a value is outside its domain.
  void validate() const;

  CollectOptions collect_options() const;
  MeasureConfig measure_config() const;
  AnalysisOptions analysis_options() const;
};

/// Reads the keys present in `doc` over `config`. Relative paths are resolved
/// against `base_dir`. Unknown keys are rejected.
void apply_config_json(PipelineConfig& config, const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
PipelineConfig load_config_file(const std::filesystem::path& path);
nlohmann::json config_to_json(const PipelineConfig& config);

ProviderSpec parse_synthetic_spec(std::string_view text);  // "id:seed[:vocab[:dropout[:params]]]"
ChoicePooling pooling_from_string(std::string_view name);

ProviderHandle make_provider(const ProviderSpec& spec);

// ---- stages -------------------------------------------------------------------

struct CollectFailure {
  std::string model;  // model_id, or the spec description when construction failed
  std::string error;
  int exit_code = 2;
};

struct CollectOutcome {
  std::vector<ModelRecords> records;
  std::vector<std::filesystem::path> dumps;
  std::vector<CollectFailure> failures;
};

/// Collects every configured model into <output_dir>/dumps/<model_id>.ndjson
/// and writes <output_dir>/manifest.json. A failing model is recorded in the
/// manifest and does not stop the others.
CollectOutcome run_collect(const PipelineConfig& config, std::span<const SurveyQuestion> questions);

/// Dumps listed as collected in <output_dir>/manifest.json.
std::vector<std::filesystem::path> manifest_dumps(const std::filesystem::path& output_dir);

/// Computes the measure tables and writes measures.json and measures.csv.
std::vector<ModelMeasures> run_measure(const PipelineConfig& config, std::span<const ModelRecords> records,
                                       std::span<const SurveyQuestion> questions);

/// Computes the report and writes report.json, phase1.csv,
/// size_correlation.csv and phase2.csv. Throws AnalysisError when no
/// phase-1 correlation is available at all.
AnalysisReport run_analyze(const PipelineConfig& config, std::span<const ModelMeasures> measures,
                           std::span<const SurveyQuestion> questions);

/// Writes the SVG plots into <output_dir>/plots; nothing for an empty report.
std::vector<std::filesystem::path> run_report(const PipelineConfig& config, const AnalysisReport& report);

/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view text);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace uqa
