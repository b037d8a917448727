#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqa/analysis.hpp"

namespace uqa {

inline constexpr int kReportSchemaVersion = 1;

// Measure tables ---------------------------------------------------------------

nlohmann::json measures_to_json(std::span<const ModelMeasures> models);
std::vector<ModelMeasures> measures_from_json(const nlohmann::json& doc);
/// model_id,measure,question_id,choice,value,available,reason; one row per
/// value (per choice for PER_CHOICE measures), one row for unavailable results.
std::string measures_to_csv(std::span<const ModelMeasures> models);

// Analysis report --------------------------------------------------------------

nlohmann::json report_to_json(const AnalysisReport& report);
AnalysisReport report_from_json(const nlohmann::json& doc);

std::string phase1_csv(const AnalysisReport& report);
std::string size_correlation_csv(const AnalysisReport& report);
std::string phase2_csv(const AnalysisReport& report);

// Plots --------------------------------------------------------------------------

struct BarGroup {
  std::string label;
  std::vector<std::optional<double>> values;  // one per series
  std::optional<double> background;           // drawn behind the group, e.g. a mean
};

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> series;
  std::vector<BarGroup> groups;
  double y_min = -1.0;
  double y_max = 1.0;
  std::vector<double> reference_lines;  // dashed horizontal rules
};

/// Standalone SVG document; output depends only on the chart contents.
std::string render_svg(std::span<const BarChart> panels);

/// Correlations per measure (groups in phase-1 order) with one bar per model.
BarChart phase1_chart(const AnalysisReport& report);
BarChart size_chart(const AnalysisReport& report);
/// Cross-validated (first) and full-fit (second) regression panels.
std::vector<BarChart> phase2_charts(const AnalysisReport& report);

/// Writes phase1.svg, size_correlation.svg and phase2.svg into `dir` and
/// returns the paths written. An empty report writes nothing.
std::vector<std::filesystem::path> write_plots(const AnalysisReport& report, const std::filesystem::path& dir);

}  // namespace uqa
