// uqalign: compare language-model uncertainty measures with human survey
// disagreement. Stages: ingest -> collect -> measure -> analyze -> report.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>

#include "uqa/dump.hpp"
#include "uqa/error.hpp"
#include "uqa/pipeline.hpp"
#include "uqa/report.hpp"
#include "uqa/survey.hpp"

namespace fs = std::filesystem;

namespace {

// Flag values are kept optional so that only flags actually given override
// the config file.
struct Overrides {
  std::string config;
  std::optional<std::string> survey;
  std::optional<std::string> output_dir;
  std::optional<int> ensemble_n;
  std::optional<double> nucleus_threshold;
  std::optional<std::int64_t> top_k;
  std::optional<int> folds;
  std::optional<double> significance;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> pooling;
  std::vector<std::string> synthetic;
  std::vector<std::string> replay;
};

void add_config_flags(CLI::App* cmd, Overrides& o, bool with_models) {
  cmd->add_option("-c,--config", o.config, "JSON pipeline configuration file");
  cmd->add_option("--survey", o.survey, "survey file (JSON)");
  cmd->add_option("-o,--output-dir", o.output_dir, "output directory");
  cmd->add_option("--ensemble-n", o.ensemble_n, "dropout variants per question (default 30)");
  cmd->add_option("--nucleus-threshold", o.nucleus_threshold, "nucleus threshold (default 0.95)");
  cmd->add_option("--top-k", o.top_k, "k for top-k entropy (default 10)");
  cmd->add_option("--folds", o.folds, "cross-validation folds (default 3)");
  cmd->add_option("--significance", o.significance, "|r| significance threshold (default 0.3)");
  cmd->add_option("--seed", o.seed, "seed for variants and fold shuffles");
  cmd->add_option("--workers", o.workers, "questions collected in parallel per model");
  cmd->add_option("--pooling", o.pooling, "per-choice pooling: flat or question_mean");
  if (with_models) {
    cmd->add_option("--synthetic", o.synthetic, "synthetic model id:seed[:vocab[:dropout[:params]]] (repeatable)");
    cmd->add_option("--replay", o.replay, "replay a dump file as a model (repeatable)");
  }
}

uqa::PipelineConfig resolve_config(const Overrides& o) {
  uqa::PipelineConfig c = o.config.empty() ? uqa::PipelineConfig{} : uqa::load_config_file(o.config);
  if (o.survey) c.survey = *o.survey;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.ensemble_n) c.ensemble_n = *o.ensemble_n;
  if (o.nucleus_threshold) c.nucleus_threshold = *o.nucleus_threshold;
  if (o.top_k) c.top_k = *o.top_k;
  if (o.folds) c.folds = *o.folds;
  if (o.significance) c.significance = *o.significance;
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.pooling) c.pooling = uqa::pooling_from_string(*o.pooling);
  if (!o.synthetic.empty() || !o.replay.empty()) {
    c.providers.clear();
    for (const auto& s : o.synthetic) c.providers.push_back(uqa::parse_synthetic_spec(s));
    for (const auto& r : o.replay) {
      uqa::ProviderSpec spec;
      spec.kind = uqa::ProviderKind::Replay;
      spec.dump = r;
      c.providers.push_back(std::move(spec));
    }
  }
  c.validate();
  return c;
}

std::vector<uqa::SurveyQuestion> load_questions(const uqa::PipelineConfig& c) {
  if (c.survey.empty()) throw uqa::ValidationError("no survey given (--survey or \"survey\" in the config)");
  return uqa::load_survey_file(c.survey);
}

int cmd_ingest(const std::string& path) {
  const auto questions = uqa::load_survey_file(path);
  std::map<std::size_t, int> histogram;
  std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = 0;
  for (const auto& q : questions) {
    ++histogram[q.choices.size()];
    lo = std::min(lo, q.total_responses());
    hi = std::max(hi, q.total_responses());
  }
  fmt::print("{} questions\n", questions.size());
  for (const auto& [choices, n] : histogram) fmt::print("  {:>2} choices: {}\n", choices, n);
  fmt::print("responses per question: min {}, max {}\n", lo, hi);
  return 0;
}

int report_collect(const uqa::CollectOutcome& outcome) {
  for (const auto& p : outcome.dumps) fmt::print("wrote {}\n", p.string());
  int code = 0;
  for (const auto& f : outcome.failures) {
    fmt::print(stderr, "collection failed for {}: {}\n", f.model, f.error);
    code = std::max(code, f.exit_code);
  }
  return code;
}

std::vector<uqa::ModelRecords> read_dumps(const std::vector<fs::path>& paths) {
  std::vector<uqa::ModelRecords> records;
  for (const auto& p : paths) records.push_back(uqa::read_dump_file(p));
  return records;
}

void print_phase1(const uqa::AnalysisReport& report) {
  for (const auto& s : report.phase1.order) {
    fmt::print("  {:<3} mean r = {}\n", uqa::to_string(s.measure),
               s.mean_r ? fmt::format("{:+.3f}", *s.mean_r) : std::string("unavailable"));
  }
}

int cmd_report(const uqa::PipelineConfig& c, const uqa::AnalysisReport& report) {
  const auto written = uqa::run_report(c, report);
  if (written.empty()) fmt::print(stderr, "warning: report is empty, no plots written\n");
  for (const auto& p : written) fmt::print("wrote {}\n", p.string());
  return 0;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const uqa::ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const uqa::ProviderError& e) {
    fmt::print(stderr, "provider error: {}\n", e.what());
    return 2;
  } catch (const uqa::AnalysisError& e) {
    fmt::print(stderr, "analysis error: {}\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compare language-model uncertainty measures against human survey disagreement"};
  app.require_subcommand(1);

  std::string ingest_path;
  auto* ingest = app.add_subcommand("ingest", "validate a survey file and summarise it");
  ingest->add_option("survey", ingest_path, "survey file (JSON)")->required();

  int fx_questions = 38, fx_min = 2, fx_max = 5;
  std::uint64_t fx_seed = 1;
  std::string fx_out;
  auto* fixture = app.add_subcommand("fixture", "write a synthetic survey with realistic response counts");
  fixture->add_option("--questions", fx_questions, "number of questions");
  fixture->add_option("--min-choices", fx_min, "fewest choices per question");
  fixture->add_option("--max-choices", fx_max, "most choices per question");
  fixture->add_option("--seed", fx_seed, "generator seed");
  fixture->add_option("-o,--out", fx_out, "output path")->required();

  Overrides collect_o, measure_o, analyze_o, report_o, run_o;
  auto* collect = app.add_subcommand("collect", "collect distributions and probes into dumps");
  add_config_flags(collect, collect_o, true);
  auto* measure = app.add_subcommand("measure", "compute the eight measures from dumps");
  add_config_flags(measure, measure_o, false);
  std::vector<std::string> dump_files;
  measure->add_option("--dump", dump_files, "dump files (default: those listed in the manifest)");
  auto* analyze = app.add_subcommand("analyze", "correlations, size correlation and regressions");
  add_config_flags(analyze, analyze_o, false);
  auto* report = app.add_subcommand("report", "write SVG plots for report.json");
  add_config_flags(report, report_o, false);
  auto* run = app.add_subcommand("run", "collect, measure, analyze and report in one go");
  add_config_flags(run, run_o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (*ingest) return guarded([&] { return cmd_ingest(ingest_path); });

  if (*fixture) {
    return guarded([&] {
      const auto qs = uqa::generate_fixture(fx_questions, {fx_min, fx_max}, fx_seed);
      uqa::save_survey_file(fx_out, qs);
      fmt::print("wrote {} questions to {}\n", qs.size(), fx_out);
      return 0;
    });
  }

  if (*collect) {
    return guarded([&] {
      const auto c = resolve_config(collect_o);
      const auto questions = load_questions(c);
      return report_collect(uqa::run_collect(c, questions));
    });
  }

  if (*measure) {
    return guarded([&] {
      const auto c = resolve_config(measure_o);
      const auto questions = load_questions(c);
      std::vector<fs::path> paths(dump_files.begin(), dump_files.end());
      if (paths.empty()) paths = uqa::manifest_dumps(c.output_dir);
      const auto measures = uqa::run_measure(c, read_dumps(paths), questions);
      fmt::print("measured {} model(s); wrote {}\n", measures.size(), (c.output_dir / "measures.json").string());
      return 0;
    });
  }

  if (*analyze) {
    return guarded([&] {
      const auto c = resolve_config(analyze_o);
      const auto questions = load_questions(c);
      const auto measures = uqa::measures_from_json(uqa::read_json_file(c.output_dir / "measures.json"));
      const auto rep = uqa::run_analyze(c, measures, questions);
      print_phase1(rep);
      fmt::print("wrote {}\n", (c.output_dir / "report.json").string());
      return 0;
    });
  }

  if (*report) {
    return guarded([&] {
      const auto c = resolve_config(report_o);
      return cmd_report(c, uqa::report_from_json(uqa::read_json_file(c.output_dir / "report.json")));
    });
  }

  return guarded([&] {
    const auto c = resolve_config(run_o);
    const auto questions = load_questions(c);
    const auto outcome = uqa::run_collect(c, questions);
    const int collect_code = report_collect(outcome);
    if (outcome.records.empty()) return collect_code == 0 ? 2 : collect_code;
    const auto measures = uqa::run_measure(c, outcome.records, questions);
    const auto rep = uqa::run_analyze(c, measures, questions);
    print_phase1(rep);
    cmd_report(c, rep);
    return collect_code;
  });
}
