#include "uqa/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "uqa/dump.hpp"
#include "uqa/error.hpp"
#include "uqa/report.hpp"

namespace uqa {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T get_as(const json& obj, std::string_view key, std::string_view where) {
  try {
    return obj.at(std::string(key)).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(fmt::format("{}: field \"{}\" has the wrong type", where, key));
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, std::string_view where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw ValidationError(fmt::format("{}: unknown field \"{}\"", where, key));
  }
}

ProviderSpec spec_from_json(const json& j, const fs::path& base_dir, std::size_t index) {
  const std::string where = fmt::format("models[{}]", index);
  if (!j.is_object()) throw ValidationError(fmt::format("{}: expected an object", where));
  ProviderSpec spec;
  const auto kind = j.contains("kind") ? get_as<std::string>(j, "kind", where) : std::string("synthetic");
  std::set<std::string> allowed = {"kind", "model_id", "family", "param_count", "instruct"};
  if (kind == "synthetic") {
    spec.kind = ProviderKind::Synthetic;
    allowed.insert({"vocab_size", "dropout_rate", "seed"});
  } else if (kind == "http") {
    spec.kind = ProviderKind::Http;
    allowed.insert({"base_url", "path", "model", "top_k", "timeout_s", "retries", "backoff_base_ms", "backoff_max_ms",
                    "api_key_env", "label_prefix", "max_in_flight"});
  } else if (kind == "replay") {
    spec.kind = ProviderKind::Replay;
    allowed.insert("dump");
  } else {
    throw ValidationError(fmt::format("{}: unknown provider kind \"{}\"", where, kind));
  }
  reject_unknown(j, allowed, where);

  if (j.contains("model_id")) spec.model_id = get_as<std::string>(j, "model_id", where);
  if (j.contains("family")) spec.family = get_as<std::string>(j, "family", where);
  if (j.contains("param_count")) spec.param_count = get_as<std::int64_t>(j, "param_count", where);
  if (j.contains("instruct")) spec.instruct = get_as<bool>(j, "instruct", where);

  if (j.contains("vocab_size")) spec.vocab_size = get_as<int>(j, "vocab_size", where);
  if (j.contains("dropout_rate")) spec.dropout_rate = get_as<double>(j, "dropout_rate", where);
  if (j.contains("seed")) spec.seed = get_as<std::uint64_t>(j, "seed", where);

  auto& h = spec.http;
  if (j.contains("base_url")) h.base_url = get_as<std::string>(j, "base_url", where);
  if (j.contains("path")) h.path = get_as<std::string>(j, "path", where);
  if (j.contains("model")) h.model = get_as<std::string>(j, "model", where);
  if (j.contains("top_k")) h.top_k = get_as<std::int64_t>(j, "top_k", where);
  if (j.contains("timeout_s")) h.timeout_s = get_as<double>(j, "timeout_s", where);
  if (j.contains("retries")) h.retries = get_as<int>(j, "retries", where);
  if (j.contains("backoff_base_ms")) h.backoff_base_ms = get_as<int>(j, "backoff_base_ms", where);
  if (j.contains("backoff_max_ms")) h.backoff_max_ms = get_as<int>(j, "backoff_max_ms", where);
  if (j.contains("api_key_env")) h.api_key_env = get_as<std::string>(j, "api_key_env", where);
  if (j.contains("label_prefix")) h.label_prefix = get_as<std::string>(j, "label_prefix", where);
  if (j.contains("max_in_flight")) h.max_in_flight = get_as<int>(j, "max_in_flight", where);

  if (spec.kind == ProviderKind::Replay) {
    if (!j.contains("dump")) throw ValidationError(fmt::format("{}: replay needs \"dump\"", where));
    spec.dump = resolve(base_dir, get_as<std::string>(j, "dump", where));
  }
  if (spec.kind == ProviderKind::Http && !spec.model_id) {
    throw ValidationError(fmt::format("{}: http provider needs \"model_id\"", where));
  }
  return spec;
}

json spec_to_json(const ProviderSpec& s) {
  json j = {{"kind", to_string(s.kind)}};
  if (s.model_id) j["model_id"] = *s.model_id;
  if (s.family) j["family"] = *s.family;
  if (s.param_count) j["param_count"] = *s.param_count;
  if (s.instruct) j["instruct"] = *s.instruct;
  switch (s.kind) {
    case ProviderKind::Synthetic:
      j["vocab_size"] = s.vocab_size;
      j["dropout_rate"] = s.dropout_rate;
      j["seed"] = s.seed;
      break;
    case ProviderKind::Http:
      j["base_url"] = s.http.base_url;
      j["path"] = s.http.path;
      j["model"] = s.http.model;
      j["top_k"] = s.http.top_k;
      j["timeout_s"] = s.http.timeout_s;
      j["retries"] = s.http.retries;
      j["backoff_base_ms"] = s.http.backoff_base_ms;
      j["backoff_max_ms"] = s.http.backoff_max_ms;
      j["api_key_env"] = s.http.api_key_env;
      j["label_prefix"] = s.http.label_prefix;
      j["max_in_flight"] = s.http.max_in_flight;
      break;
    case ProviderKind::Replay:
      j["dump"] = s.dump.string();
      break;
  }
  return j;
}

ModelInfo overlay(ModelInfo info, const ProviderSpec& spec) {
  if (spec.model_id) info.model_id = *spec.model_id;
  if (spec.family) info.family = *spec.family;
  if (spec.param_count) info.param_count = *spec.param_count;
  if (spec.instruct) info.instruct = *spec.instruct;
  return info;
}

std::string describe(const ProviderSpec& spec, std::size_t index) {
  if (spec.model_id) return *spec.model_id;
  return fmt::format("models[{}] ({})", index, to_string(spec.kind));
}

std::size_t count_probes(const ModelRecords& r) {
  std::size_t n = 0;
  for (const auto& q : r.questions) {
    n += q.self_report ? 1 : 0;
    for (const auto& v : q.population_probes) n += v.size();
  }
  return n;
}

std::size_t count_distributions(const ModelRecords& r) {
  std::size_t n = 0;
  for (const auto& q : r.questions) n += 1 + q.ensemble.variants.size();
  return n;
}

}  // namespace

void PipelineConfig::validate() const {
  if (ensemble_n < 0) throw ValidationError(fmt::format("ensemble_n must be >= 0, got {}", ensemble_n));
  if (!(nucleus_threshold > 0.0 && nucleus_threshold <= 1.0)) {
    throw ValidationError(fmt::format("nucleus_threshold must lie in (0, 1], got {}", nucleus_threshold));
  }
  if (top_k < 1) throw ValidationError(fmt::format("top_k must be >= 1, got {}", top_k));
  if (folds < 2) throw ValidationError(fmt::format("folds must be >= 2, got {}", folds));
  if (!(significance > 0.0 && significance <= 1.0)) {
    throw ValidationError(fmt::format("significance must lie in (0, 1], got {}", significance));
  }
  if (workers < 1) throw ValidationError(fmt::format("workers must be >= 1, got {}", workers));
  for (std::size_t i = 0; i < providers.size(); ++i) {
    const auto& p = providers[i];
    if (p.param_count && *p.param_count <= 0) {
      throw ValidationError(fmt::format("models[{}]: param_count must be positive", i));
    }
    if (p.kind == ProviderKind::Synthetic) {
      if (p.vocab_size < 4) throw ValidationError(fmt::format("models[{}]: vocab_size must be >= 4", i));
      if (!(p.dropout_rate >= 0.0 && p.dropout_rate < 1.0)) {
        throw ValidationError(fmt::format("models[{}]: dropout_rate must lie in [0, 1)", i));
      }
    }
    if (p.kind == ProviderKind::Http && (p.http.top_k < 1 || p.http.retries < 0 || p.http.max_in_flight < 1)) {
      throw ValidationError(fmt::format("models[{}]: top_k and max_in_flight must be >= 1, retries >= 0", i));
    }
  }
}

CollectOptions PipelineConfig::collect_options() const {
  CollectOptions o;
  o.ensemble_n = ensemble_n;
  o.seed = seed;
  o.workers = workers;
  return o;
}

MeasureConfig PipelineConfig::measure_config() const { return {nucleus_threshold, top_k}; }

AnalysisOptions PipelineConfig::analysis_options() const {
  AnalysisOptions o;
  o.phase1.significance = significance;
  o.phase1.pooling = pooling;
  o.phase2.folds = folds;
  o.phase2.seed = seed;
  return o;
}

ChoicePooling pooling_from_string(std::string_view name) {
  if (name == "flat") return ChoicePooling::Flat;
  if (name == "question_mean") return ChoicePooling::QuestionMean;
  throw ValidationError(fmt::format("unknown pooling \"{}\" (expected flat or question_mean)", name));
}

void apply_config_json(PipelineConfig& config, const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ValidationError("config: expected a JSON object");
  reject_unknown(doc,
                 {"survey", "models", "ensemble_n", "nucleus_threshold", "top_k", "folds", "significance", "seed",
                  "output_dir", "workers", "pooling"},
                 "config");
  if (doc.contains("survey")) config.survey = resolve(base_dir, get_as<std::string>(doc, "survey", "config"));
  if (doc.contains("output_dir")) {
    config.output_dir = resolve(base_dir, get_as<std::string>(doc, "output_dir", "config"));
  }
  if (doc.contains("ensemble_n")) config.ensemble_n = get_as<int>(doc, "ensemble_n", "config");
  if (doc.contains("nucleus_threshold")) config.nucleus_threshold = get_as<double>(doc, "nucleus_threshold", "config");
  if (doc.contains("top_k")) config.top_k = get_as<std::int64_t>(doc, "top_k", "config");
  if (doc.contains("folds")) config.folds = get_as<int>(doc, "folds", "config");
  if (doc.contains("significance")) config.significance = get_as<double>(doc, "significance", "config");
  if (doc.contains("seed")) config.seed = get_as<std::uint64_t>(doc, "seed", "config");
  if (doc.contains("workers")) config.workers = get_as<int>(doc, "workers", "config");
  if (doc.contains("pooling")) config.pooling = pooling_from_string(get_as<std::string>(doc, "pooling", "config"));
  if (doc.contains("models")) {
    const auto& models = doc["models"];
    if (!models.is_array()) throw ValidationError("config: \"models\" must be an array");
    config.providers.clear();
    for (std::size_t i = 0; i < models.size(); ++i) config.providers.push_back(spec_from_json(models[i], base_dir, i));
  }
}

PipelineConfig load_config_file(const fs::path& path) {
  PipelineConfig config;
  apply_config_json(config, read_json_file(path), path.parent_path());
  return config;
}

json config_to_json(const PipelineConfig& c) {
  json models = json::array();
  for (const auto& p : c.providers) models.push_back(spec_to_json(p));
  return {{"survey", c.survey.string()},
          {"models", std::move(models)},
          {"ensemble_n", c.ensemble_n},
          {"nucleus_threshold", c.nucleus_threshold},
          {"top_k", c.top_k},
          {"folds", c.folds},
          {"significance", c.significance},
          {"seed", c.seed},
          {"output_dir", c.output_dir.string()},
          {"workers", c.workers},
          {"pooling", c.pooling == ChoicePooling::Flat ? "flat" : "question_mean"}};
}

ProviderSpec parse_synthetic_spec(std::string_view text) {
  std::vector<std::string> parts;
  std::stringstream ss{std::string(text)};
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() < 2 || parts.size() > 5 || parts[0].empty()) {
    throw ValidationError(fmt::format("synthetic model \"{}\": expected id:seed[:vocab[:dropout[:params]]]", text));
  }
  ProviderSpec spec;
  spec.kind = ProviderKind::Synthetic;
  spec.model_id = parts[0];
  try {
    spec.seed = std::stoull(parts[1]);
    if (parts.size() > 2) spec.vocab_size = std::stoi(parts[2]);
    if (parts.size() > 3) spec.dropout_rate = std::stod(parts[3]);
    if (parts.size() > 4) spec.param_count = std::stoll(parts[4]);
  } catch (const std::logic_error&) {
    throw ValidationError(fmt::format("synthetic model \"{}\": malformed number", text));
  }
  return spec;
}

ProviderHandle make_provider(const ProviderSpec& spec) {
  switch (spec.kind) {
    case ProviderKind::Synthetic: {
      auto base = synthetic_model(spec.vocab_size, spec.dropout_rate, spec.seed);
      return synthetic_model(spec.vocab_size, spec.dropout_rate, spec.seed, overlay(base->model_info(), spec));
    }
    case ProviderKind::Http: {
      ModelInfo info = overlay({*spec.model_id, "http", 1, false}, spec);
      return http_provider(spec.http, std::move(info));
    }
    case ProviderKind::Replay: {
      ModelRecords records = read_dump_file(spec.dump);
      records.model = overlay(records.model, spec);
      return replay_provider(std::move(records));
    }
  }
  throw ValidationError("unknown provider kind");
}

CollectOutcome run_collect(const PipelineConfig& config, std::span<const SurveyQuestion> questions) {
  config.validate();
  CollectOutcome outcome;
  const fs::path dump_dir = config.output_dir / "dumps";
  fs::create_directories(dump_dir);

  json entries = json::array();
  std::set<std::string> seen;
  for (std::size_t i = 0; i < config.providers.size(); ++i) {
    const auto& spec = config.providers[i];
    std::string model = describe(spec, i);
    try {
      const auto provider = make_provider(spec);
      model = provider->model_info().model_id;
      if (!seen.insert(model).second) throw ValidationError(fmt::format("duplicate model_id \"{}\"", model));
      ModelRecords records = collect(*provider, questions, config.collect_options());
      const fs::path path = dump_dir / (model + ".ndjson");
      write_dump_file(path, records);
      entries.push_back({{"model_id", model},
                         {"status", "ok"},
                         {"dump", fs::relative(path, config.output_dir).generic_string()},
                         {"distribution_records", count_distributions(records)},
                         {"probe_records", count_probes(records)}});
      outcome.dumps.push_back(path);
      outcome.records.push_back(std::move(records));
    } catch (const Error& e) {
      const int code = dynamic_cast<const ValidationError*>(&e) ? 1 : 2;
      outcome.failures.push_back({model, e.what(), code});
      entries.push_back({{"model_id", model}, {"status", "failed"}, {"error", e.what()}});
    }
  }
  const json manifest = {{"schema_version", kDumpSchemaVersion},
                         {"seed", config.seed},
                         {"ensemble_n", config.ensemble_n},
                         {"questions", questions.size()},
                         {"models", std::move(entries)}};
  write_text_file(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
  return outcome;
}

std::vector<fs::path> manifest_dumps(const fs::path& output_dir) {
  const json manifest = read_json_file(output_dir / "manifest.json");
  std::vector<fs::path> dumps;
  try {
    for (const auto& m : manifest.at("models")) {
      if (m.at("status").get<std::string>() == "ok") dumps.push_back(output_dir / m.at("dump").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: malformed manifest: {}", (output_dir / "manifest.json").string(), e.what()));
  }
  return dumps;
}

std::vector<ModelMeasures> run_measure(const PipelineConfig& config, std::span<const ModelRecords> records,
                                       std::span<const SurveyQuestion> questions) {
  config.validate();
  std::vector<ModelMeasures> out;
  for (const auto& r : records) out.push_back({r.model, compute_measures(r, questions, config.measure_config())});
  write_text_file(config.output_dir / "measures.json", measures_to_json(out).dump(2) + "\n");
  write_text_file(config.output_dir / "measures.csv", measures_to_csv(out));
  return out;
}

AnalysisReport run_analyze(const PipelineConfig& config, std::span<const ModelMeasures> measures,
                           std::span<const SurveyQuestion> questions) {
  config.validate();
  AnalysisReport report = analyze(measures, questions, config.analysis_options());
  const bool any = std::any_of(report.phase1.cells.begin(), report.phase1.cells.end(),
                               [](const CorrelationCell& c) { return c.r.has_value(); });
  if (!any) throw AnalysisError("no phase-1 correlation could be computed (too few questions or constant measures)");
  write_text_file(config.output_dir / "report.json", report_to_json(report).dump(2) + "\n");
  write_text_file(config.output_dir / "phase1.csv", phase1_csv(report));
  write_text_file(config.output_dir / "size_correlation.csv", size_correlation_csv(report));
  write_text_file(config.output_dir / "phase2.csv", phase2_csv(report));
  return report;
}

std::vector<fs::path> run_report(const PipelineConfig& config, const AnalysisReport& report) {
  return write_plots(report, config.output_dir / "plots");
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw Error(fmt::format("write failed for {}", path.string()));
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace uqa
