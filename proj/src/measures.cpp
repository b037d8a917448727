#include "uqa/measures.hpp"

#include <fmt/format.h>

#include <cmath>
#include <unordered_map>

#include "uqa/error.hpp"

namespace uqa {

Arity arity(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::RF:
    case MeasureKind::PV:
    case MeasureKind::PS:
      return Arity::PerChoice;
    default:
      return Arity::PerQuestion;
  }
}

Orientation uncertainty_orientation(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::SR:
    case MeasureKind::RF:
    case MeasureKind::PS:
      return Orientation::Down;
    default:
      return Orientation::Up;
  }
}

std::string_view to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::SR: return "SR";
    case MeasureKind::RF: return "RF";
    case MeasureKind::NS: return "NS";
    case MeasureKind::VE: return "VE";
    case MeasureKind::CE: return "CE";
    case MeasureKind::KE: return "KE";
    case MeasureKind::PV: return "PV";
    case MeasureKind::PS: return "PS";
  }
  return "?";
}

std::string_view to_string(Orientation o) { return o == Orientation::Up ? "UP" : "DOWN"; }

MeasureKind measure_from_string(std::string_view name) {
  for (auto k : kAllMeasures) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError(fmt::format("unknown measure \"{}\"", name));
}

std::vector<double> measure_rf(const ChoiceProjection& proj) { return proj.probs(); }

std::int64_t measure_ns(const TokenDistribution& d, double threshold) { return nucleus_size(d, threshold); }

double measure_ve(const TokenDistribution& d) {
  if (!d.completeness().is_full()) {
    throw Unavailable(fmt::format("vocabulary entropy needs a FULL distribution, got TOP_K({})",
                                  d.completeness().k_reported));
  }
  return entropy(d, AllTokens{});
}

double measure_ke(const TokenDistribution& d, std::int64_t k) {
  if (d.empty()) throw ValidationError("top-k entropy of an empty distribution");
  return entropy(d, TopTokens{k});
}

double measure_ce(const ChoiceProjection& proj) {
  const auto probs = proj.probs();
  bool any = false;
  for (double p : probs) any = any || p > 0.0;
  if (!any) throw Unavailable(fmt::format("question \"{}\": every label probability is zero", proj.question_id));
  return shannon_entropy(probs);
}

double measure_ce(const TokenDistribution& d, const SurveyQuestion& q, const LabelTokens& label_tokens) {
  return measure_ce(project_choices(d, q, label_tokens));
}

double measure_sr(const SelfReportProbe& probe) {
  if (!(probe.p_best >= 0.0 && probe.p_best <= 1.0 && probe.p_worst >= 0.0 && probe.p_worst <= 1.0)) {
    throw ValidationError(fmt::format("probe for \"{}\" has evaluator probabilities outside [0, 1]", probe.question_id));
  }
  const double denom = probe.p_best + probe.p_worst;
  if (denom <= 0.0) throw Unavailable(fmt::format("probe for \"{}\": p_best + p_worst = 0", probe.question_id));
  return probe.p_best / denom;
}

std::vector<double> measure_pv(std::span<const ChoiceProjection> variants) {
  if (variants.size() < 2) {
    throw Unavailable(fmt::format("population variance needs >= 2 variants, got {}", variants.size()));
  }
  const std::size_t n_choices = variants.front().choices.size();
  const double n = static_cast<double>(variants.size());
  std::vector<double> out(n_choices);
  for (std::size_t c = 0; c < n_choices; ++c) {
    double mean = 0.0;
    for (const auto& v : variants) {
      if (v.choices.size() != n_choices) throw ValidationError("ensemble variants disagree on the choice count");
      mean += v.choices[c].prob;
    }
    mean /= n;
    double ss = 0.0;
    for (const auto& v : variants) {
      const double dev = v.choices[c].prob - mean;
      ss += dev * dev;
    }
    out[c] = std::sqrt(ss / n);
  }
  return out;
}

std::vector<double> measure_pv(const EnsembleRecord& ensemble, const SurveyQuestion& q, const LabelTokens& label_tokens) {
  std::vector<ChoiceProjection> projections;
  projections.reserve(ensemble.variants.size());
  for (const auto& v : ensemble.variants) projections.push_back(project_choices(v, q, label_tokens));
  return measure_pv(projections);
}

std::vector<double> measure_ps(const std::vector<std::vector<SelfReportProbe>>& per_variant, const SurveyQuestion& q) {
  if (per_variant.empty()) throw Unavailable(fmt::format("question \"{}\": empty ensemble", q.id));
  std::vector<double> out;
  out.reserve(q.choices.size());
  for (const auto& choice : q.choices) {
    double sum = 0.0;
    int used = 0;
    for (const auto& probes : per_variant) {
      const SelfReportProbe* match = nullptr;
      for (const auto& p : probes) {
        if (p.conditioned_label == choice.label) match = &p;
      }
      if (match == nullptr) {
        throw ValidationError(fmt::format("question \"{}\": a variant has no probe for choice \"{}\"", q.id, choice.label));
      }
      try {
        sum += measure_sr(*match);
        ++used;
      } catch (const Unavailable&) {
        // degenerate probe for this variant; the mean uses the rest
      }
    }
    if (used == 0) {
      throw Unavailable(fmt::format("question \"{}\": no usable probe for choice \"{}\"", q.id, choice.label));
    }
    out.push_back(sum / used);
  }
  return out;
}

namespace {

MeasureResult compute_one(MeasureKind kind, const ModelRecords& records, const QuestionRecords& qr,
                          const SurveyQuestion& q, const MeasureConfig& config) {
  MeasureResult r;
  r.model_id = records.model.model_id;
  r.measure = kind;
  r.question_id = q.id;
  if (arity(kind) == Arity::PerChoice) {
    for (const auto& c : q.choices) r.labels.push_back(c.label);
  }
  try {
    switch (kind) {
      case MeasureKind::SR:
        if (!qr.self_report) throw Unavailable("no self-report probe collected");
        r.values = {measure_sr(*qr.self_report)};
        break;
      case MeasureKind::RF:
        r.values = measure_rf(project_choices(qr.base, q, records.label_tokens));
        break;
      case MeasureKind::NS:
        r.values = {static_cast<double>(measure_ns(qr.base, config.nucleus_threshold))};
        break;
      case MeasureKind::VE:
        r.values = {measure_ve(qr.base)};
        break;
      case MeasureKind::CE:
        r.values = {measure_ce(qr.base, q, records.label_tokens)};
        break;
      case MeasureKind::KE:
        r.values = {measure_ke(qr.base, config.top_k)};
        break;
      case MeasureKind::PV:
        r.values = measure_pv(qr.ensemble, q, records.label_tokens);
        break;
      case MeasureKind::PS:
        r.values = measure_ps(qr.population_probes, q);
        break;
    }
    r.available = true;
  } catch (const Unavailable& e) {
    r.values.clear();
    r.available = false;
    r.reason = e.what();
  }
  return r;
}

}  // namespace

std::vector<MeasureResult> compute_measures(const ModelRecords& records, std::span<const SurveyQuestion> questions,
                                            const MeasureConfig& config) {
  std::unordered_map<std::string, const SurveyQuestion*> by_id;
  for (const auto& q : questions) by_id.emplace(q.id, &q);

  std::vector<MeasureResult> out;
  out.reserve(records.questions.size() * kAllMeasures.size());
  for (const auto& qr : records.questions) {
    auto it = by_id.find(qr.question_id);
    if (it == by_id.end()) {
      throw ValidationError(fmt::format("model \"{}\": records for unknown question \"{}\"",
                                        records.model.model_id, qr.question_id));
    }
    for (auto kind : kAllMeasures) out.push_back(compute_one(kind, records, qr, *it->second, config));
  }
  return out;
}

}  // namespace uqa
