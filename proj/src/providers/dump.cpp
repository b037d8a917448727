#include "uqa/dump.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <unordered_map>

#include "uqa/error.hpp"

namespace uqa {

namespace {

using nlohmann::json;

json model_fields(const ModelInfo& m, std::string_view record_type) {
  return {{"schema_version", kDumpSchemaVersion},
          {"record_type", record_type},
          {"model_id", m.model_id},
          {"family", m.family},
          {"param_count", m.param_count},
          {"instruct", m.instruct}};
}

json distribution_record(const TokenDistribution& d, const ModelInfo& m) {
  json rec = model_fields(m, "distribution");
  rec["question_id"] = d.meta().question_id;
  rec["variant_id"] = d.meta().variant_id;
  rec["prompt_sha256"] = d.meta().prompt_sha256;
  rec["completeness"] = d.completeness().is_full() ? "FULL" : "TOP_K";
  if (!d.completeness().is_full()) rec["k_reported"] = d.completeness().k_reported;
  json entries = json::array();
  for (const auto& e : d.entries()) {
    json lp = std::isfinite(e.logprob) ? json(e.logprob) : json(nullptr);
    entries.push_back({{"token_id", e.token_id}, {"token_text", e.token_text}, {"logprob", std::move(lp)}});
  }
  rec["entries"] = std::move(entries);
  return rec;
}

json probe_record(const SelfReportProbe& p, const ModelInfo& m) {
  json rec = model_fields(m, "probe");
  rec["question_id"] = p.question_id;
  rec["variant_id"] = p.variant_id;
  rec["prompt_sha256"] = p.prompt_sha256;
  rec["chosen_label"] = p.chosen_label;
  rec["conditioned_label"] = p.conditioned_label;
  rec["p_best"] = p.p_best;
  rec["p_worst"] = p.p_worst;
  return rec;
}

class RecordReader {
 public:
  RecordReader(const json& rec, std::string where) : rec_(rec), where_(std::move(where)) {}

  [[noreturn]] void fail(const std::string& msg) const { throw ValidationError(fmt::format("{}: {}", where_, msg)); }

  void exact_fields(std::span<const std::string_view> required, std::span<const std::string_view> optional = {}) const {
    for (auto f : required) {
      if (!rec_.contains(f)) fail(fmt::format("missing field \"{}\"", f));
    }
    for (const auto& [key, _] : rec_.items()) {
      const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                         std::find(optional.begin(), optional.end(), key) != optional.end();
      if (!known) fail(fmt::format("unknown field \"{}\"", key));
    }
  }

  std::string str(const char* f) const {
    const auto& v = rec_.at(f);
    if (!v.is_string()) fail(fmt::format("field \"{}\" must be a string", f));
    return v.get<std::string>();
  }
  std::int64_t integer(const char* f) const { return integer_of(rec_.at(f), f); }
  std::int64_t integer_of(const json& v, const char* f) const {
    if (!v.is_number_integer()) fail(fmt::format("field \"{}\" must be an integer", f));
    return v.get<std::int64_t>();
  }
  double number(const char* f) const {
    const auto& v = rec_.at(f);
    if (!v.is_number()) fail(fmt::format("field \"{}\" must be a number", f));
    return v.get<double>();
  }
  bool boolean(const char* f) const {
    const auto& v = rec_.at(f);
    if (!v.is_boolean()) fail(fmt::format("field \"{}\" must be a boolean", f));
    return v.get<bool>();
  }
  const json& raw(const char* f) const { return rec_.at(f); }

  ModelInfo model() const {
    ModelInfo m{str("model_id"), str("family"), integer("param_count"), boolean("instruct")};
    if (m.param_count <= 0) fail("param_count must be positive");
    return m;
  }

 private:
  const json& rec_;
  std::string where_;
};

constexpr std::array<std::string_view, 6> kCommon = {"schema_version", "record_type", "model_id",
                                                    "family",         "param_count", "instruct"};
constexpr std::array<std::string_view, 8> kLabelFields = {"schema_version", "record_type", "model_id", "family",
                                                          "param_count",    "instruct",    "labels",   "evaluator"};
constexpr std::array<std::string_view, 11> kDistributionFields = {
    "schema_version", "record_type", "model_id",      "family",       "param_count", "instruct",
    "question_id",    "variant_id",  "prompt_sha256", "completeness", "entries"};
constexpr std::array<std::string_view, 13> kProbeFields = {
    "schema_version", "record_type",   "model_id",     "family",            "param_count", "instruct", "question_id",
    "variant_id",     "prompt_sha256", "chosen_label", "conditioned_label", "p_best",      "p_worst"};
constexpr std::array<std::string_view, 1> kDistributionOptional = {"k_reported"};

std::span<const std::string_view> fields_for(std::string_view type) {
  if (type == "label_tokens") return kLabelFields;
  if (type == "distribution") return kDistributionFields;
  return kProbeFields;
}

struct PendingQuestion {
  std::optional<TokenDistribution> base;
  std::map<int, TokenDistribution> variants;
  std::optional<SelfReportProbe> self_report;
  std::map<int, std::vector<SelfReportProbe>> population;
};

}  // namespace

void write_dump(std::ostream& out, const ModelRecords& records) {
  json header = model_fields(records.model, "label_tokens");
  header["labels"] = records.label_tokens;
  header["evaluator"] = {{"best", records.evaluator.best}, {"worst", records.evaluator.worst}};
  out << header.dump() << '\n';
  for (const auto& q : records.questions) {
    out << distribution_record(q.base, records.model).dump() << '\n';
    for (const auto& v : q.ensemble.variants) out << distribution_record(v, records.model).dump() << '\n';
    if (q.self_report) out << probe_record(*q.self_report, records.model).dump() << '\n';
    for (const auto& per_variant : q.population_probes) {
      for (const auto& p : per_variant) out << probe_record(p, records.model).dump() << '\n';
    }
  }
}

void write_dump_file(const std::filesystem::path& path, const ModelRecords& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write dump {}", path.string()));
  write_dump(out, records);
  if (!out) throw Error(fmt::format("write to dump {} failed", path.string()));
}

ModelRecords read_dump(std::istream& in, std::string_view source) {
  ModelRecords out;
  bool have_model = false;
  bool have_labels = false;
  std::vector<std::string> order;
  std::unordered_map<std::string, PendingQuestion> pending;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = fmt::format("{}:{}", source, line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(fmt::format("{}: invalid JSON: {}", where, e.what()));
    }
    if (!rec.is_object()) throw ValidationError(where + ": record must be an object");
    RecordReader r(rec, where);
    for (auto f : kCommon) {
      if (!rec.contains(f)) r.fail(fmt::format("missing field \"{}\"", f));
    }
    if (r.integer("schema_version") != kDumpSchemaVersion) {
      r.fail(fmt::format("unsupported schema_version {}", r.integer("schema_version")));
    }
    const std::string type = r.str("record_type");
    if (type != "label_tokens" && type != "distribution" && type != "probe") {
      r.fail(fmt::format("unknown record_type \"{}\"", type));
    }
    if (type == "distribution") {
      r.exact_fields(fields_for(type), kDistributionOptional);
    } else {
      r.exact_fields(fields_for(type));
    }

    const ModelInfo model = r.model();
    if (!have_model) {
      out.model = model;
      have_model = true;
    } else if (!(model == out.model)) {
      r.fail(fmt::format("model fields differ from earlier records (model_id \"{}\" vs \"{}\")", model.model_id,
                         out.model.model_id));
    }

    if (type == "label_tokens") {
      if (have_labels) r.fail("duplicate label_tokens record");
      const json& labels = r.raw("labels");
      if (!labels.is_object()) r.fail("labels must be an object");
      for (const auto& [label, id] : labels.items()) out.label_tokens[label] = r.integer_of(id, "labels");
      const json& ev = r.raw("evaluator");
      if (!ev.is_object() || !ev.contains("best") || !ev.contains("worst") || ev.size() != 2) {
        r.fail("evaluator must be {best, worst}");
      }
      out.evaluator = {r.integer_of(ev["best"], "evaluator.best"), r.integer_of(ev["worst"], "evaluator.worst")};
      have_labels = true;
      continue;
    }

    const std::string qid = r.str("question_id");
    const int variant_id = static_cast<int>(r.integer("variant_id"));
    if (variant_id < 0) r.fail("variant_id must be >= 0");
    if (!pending.contains(qid)) order.push_back(qid);
    PendingQuestion& pq = pending[qid];

    if (type == "distribution") {
      const std::string completeness = r.str("completeness");
      Completeness c;
      if (completeness == "FULL") {
        if (rec.contains("k_reported")) r.fail("k_reported is only valid for TOP_K");
        c = Completeness::full();
      } else if (completeness == "TOP_K") {
        if (!rec.contains("k_reported")) r.fail("TOP_K record needs k_reported");
        c = Completeness::top_k(r.integer("k_reported"));
      } else {
        r.fail(fmt::format("unknown completeness \"{}\"", completeness));
      }
      const json& entries = r.raw("entries");
      if (!entries.is_array()) r.fail("entries must be a list");
      std::vector<TokenEntry> parsed;
      parsed.reserve(entries.size());
      for (const auto& e : entries) {
        if (!e.is_object() || e.size() != 3 || !e.contains("token_id") || !e.contains("token_text") ||
            !e.contains("logprob")) {
          r.fail("entry must be {token_id, token_text, logprob}");
        }
        if (!e["token_text"].is_string()) r.fail("token_text must be a string");
        const auto& lp = e["logprob"];
        double logprob = -std::numeric_limits<double>::infinity();
        if (lp.is_number()) {
          logprob = lp.get<double>();
        } else if (!lp.is_null()) {
          r.fail("logprob must be a number or null");
        }
        if (logprob > 0.0) r.fail(fmt::format("logprob {} is positive", logprob));
        parsed.push_back(
            TokenEntry::from_logprob(r.integer_of(e["token_id"], "token_id"), e["token_text"].get<std::string>(), logprob));
      }
      DistributionMeta meta{model.model_id, qid, variant_id, r.str("prompt_sha256")};
      try {
        TokenDistribution d(std::move(parsed), c, std::move(meta));
        if (variant_id == 0) {
          if (pq.base) r.fail(fmt::format("duplicate base distribution for \"{}\"", qid));
          pq.base = std::move(d);
        } else if (!pq.variants.emplace(variant_id, std::move(d)).second) {
          r.fail(fmt::format("duplicate variant {} for \"{}\"", variant_id, qid));
        }
      } catch (const ValidationError& e) {
        if (std::string_view(e.what()).starts_with(where)) throw;
        r.fail(e.what());
      }
    } else {
      SelfReportProbe p{qid, r.str("chosen_label"), r.str("conditioned_label"), variant_id,
                        r.number("p_best"), r.number("p_worst"), r.str("prompt_sha256")};
      if (!(p.p_best >= 0.0 && p.p_best <= 1.0 && p.p_worst >= 0.0 && p.p_worst <= 1.0)) {
        r.fail("p_best and p_worst must lie in [0, 1]");
      }
      if (variant_id == 0) {
        if (pq.self_report) r.fail(fmt::format("duplicate self-report probe for \"{}\"", qid));
        pq.self_report = std::move(p);
      } else {
        pq.population[variant_id].push_back(std::move(p));
      }
    }
  }

  if (!have_model) throw ValidationError(fmt::format("{}: dump contains no records", source));
  if (!have_labels) throw ValidationError(fmt::format("{}: dump lacks a label_tokens record", source));

  for (const auto& qid : order) {
    PendingQuestion& pq = pending[qid];
    if (!pq.base) throw ValidationError(fmt::format("{}: question \"{}\" has no base distribution", source, qid));
    QuestionRecords qr;
    qr.question_id = qid;
    qr.base = std::move(*pq.base);
    qr.ensemble.model_id = out.model.model_id;
    qr.ensemble.question_id = qid;
    int expect = 1;
    for (auto& [vid, d] : pq.variants) {
      if (vid != expect++) throw ValidationError(fmt::format("{}: question \"{}\" variants are not 1..N", source, qid));
      qr.ensemble.variants.push_back(std::move(d));
    }
    qr.self_report = std::move(pq.self_report);
    expect = 1;
    for (auto& [vid, probes] : pq.population) {
      if (vid != expect++) {
        throw ValidationError(fmt::format("{}: question \"{}\" probe variants are not 1..N", source, qid));
      }
      qr.population_probes.push_back(std::move(probes));
    }
    out.questions.push_back(std::move(qr));
  }
  return out;
}

ModelRecords read_dump_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open dump {}", path.string()));
  return read_dump(in, path.string());
}

}  // namespace uqa
