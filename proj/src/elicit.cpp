#include "uqa/elicit.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <optional>
#include <thread>

#include "uqa/error.hpp"
#include "uqa/hash.hpp"

namespace uqa {

namespace {

constexpr std::string_view kQuestionPrefix = "Question: ";
constexpr std::string_view kAnswerLine = "Answer: ";

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (true) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

QuestionRecords collect_question(const Provider& provider, const SurveyQuestion& q, const LabelTokens& label_tokens,
                                 const EvaluatorTokens& evaluator, const CollectOptions& options) {
  const BaseQuery bq = render_base_query(q, label_tokens);
  const auto& model_id = provider.model_info().model_id;

  QuestionRecords qr;
  qr.question_id = q.id;
  qr.ensemble.model_id = model_id;
  qr.ensemble.question_id = q.id;

  auto fetch = [&](std::optional<Variant> variant) {
    auto d = provider.next_token_distribution(bq.rendered_text, variant);
    auto meta = d.meta();
    meta.model_id = model_id;
    meta.question_id = q.id;
    meta.variant_id = variant ? variant->id : 0;
    d.set_meta(std::move(meta));
    return d;
  };

  qr.base = fetch(std::nullopt);
  std::vector<Variant> variants;
  for (int v = 1; v <= options.ensemble_n; ++v) {
    variants.push_back({v, variant_seed(options.seed, q.id, v)});
    qr.ensemble.variants.push_back(fetch(variants.back()));
  }

  auto probe = [&](std::string_view chosen, std::string_view conditioned, std::optional<Variant> variant) {
    const std::string prompt = render_sr_probe(bq, conditioned, options.secondary_query);
    const auto probs = provider.evaluate_probe(prompt, variant, evaluator);
    return SelfReportProbe{q.id,          std::string(chosen), std::string(conditioned), variant ? variant->id : 0,
                           probs.p_best,  probs.p_worst,       sha256_hex(prompt)};
  };

  try {
    const auto base_choice = cloze_select(qr.base, bq);
    qr.self_report = probe(base_choice.chosen_label, base_choice.chosen_label, std::nullopt);
  } catch (const Unavailable&) {
    // no label mass at the answer slot: SR stays unavailable for this question
  }

  if (!variants.empty()) {
    std::vector<ClozeOutcome> outcomes;
    for (const auto& d : qr.ensemble.variants) {
      try {
        outcomes.push_back(cloze_select(d, bq));
      } catch (const Unavailable&) {
      }
    }
    const std::string majority = outcomes.empty() ? std::string() : ensemble_select(outcomes).label;
    for (const auto& v : variants) {
      std::vector<SelfReportProbe> per_choice;
      per_choice.reserve(q.choices.size());
      for (const auto& c : q.choices) per_choice.push_back(probe(majority, c.label, v));
      qr.population_probes.push_back(std::move(per_choice));
    }
  }
  return qr;
}

}  // namespace

BaseQuery render_base_query(const SurveyQuestion& q, LabelTokens label_tokens) {
  if (q.choices.size() > 26) {
    throw ValidationError(fmt::format("question \"{}\" has {} choices; labels run out after Z", q.id, q.choices.size()));
  }
  BaseQuery bq;
  bq.question_id = q.id;
  std::string text;
  text.append(kBaseInstruction).append("\n");
  text.append(kQuestionPrefix).append(q.text).append("\n");
  for (std::size_t i = 0; i < q.choices.size(); ++i) {
    const std::string label = choice_label(i);
    text.append(" ").append(label).append(". ").append(q.choices[i].text).append("\n");
    bq.labels.push_back(label);
  }
  text.append(kAnswerLine);
  bq.rendered_text = std::move(text);

  if (!label_tokens.empty()) {
    for (const auto& label : bq.labels) {
      if (!label_tokens.contains(label)) {
        throw ValidationError(fmt::format("question \"{}\": label \"{}\" has no token", q.id, label));
      }
    }
  }
  bq.label_tokens = std::move(label_tokens);
  return bq;
}

ParsedQuery parse_base_query(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.size() < 3 || lines.front() != kBaseInstruction || !lines[1].starts_with(kQuestionPrefix) ||
      lines.back() != kAnswerLine) {
    throw ValidationError("text does not follow the base query layout");
  }
  ParsedQuery parsed;
  parsed.question_text = std::string(lines[1].substr(kQuestionPrefix.size()));
  for (std::size_t i = 2; i + 1 < lines.size(); ++i) {
    const auto line = lines[i];
    const auto dot = line.find(". ");
    if (line.size() < 4 || line[0] != ' ' || dot == std::string_view::npos) {
      throw ValidationError(fmt::format("malformed choice line \"{}\"", line));
    }
    parsed.choices.emplace_back(std::string(line.substr(1, dot - 1)), std::string(line.substr(dot + 2)));
  }
  return parsed;
}

ClozeOutcome cloze_select(const TokenDistribution& d, const BaseQuery& bq) {
  if (bq.label_tokens.empty()) throw ValidationError("base query has no label tokens bound");
  ClozeOutcome out;
  out.question_id = bq.question_id;
  double best = -1.0;
  for (const auto& label : bq.labels) {
    const double p = d.prob_of(bq.label_tokens.at(label));
    out.label_probs.emplace_back(label, p);
    if (p > best) {
      best = p;
      out.chosen_label = label;
      out.tie = false;
    } else if (p == best) {
      out.tie = true;
    }
  }
  if (best <= 0.0) throw Unavailable(fmt::format("question \"{}\": every label probability is zero", bq.question_id));
  return out;
}

EnsembleChoice ensemble_select(std::span<const ClozeOutcome> outcomes) {
  if (outcomes.empty()) throw ValidationError("ensemble_select needs at least one outcome");
  EnsembleChoice choice;
  for (const auto& o : outcomes) ++choice.votes[o.chosen_label];
  int best = 0;
  // std::map iterates labels alphabetically, so the first maximum wins ties.
  for (const auto& [label, n] : choice.votes) {
    if (n > best) {
      best = n;
      choice.label = label;
      choice.tie = false;
    } else if (n == best) {
      choice.tie = true;
    }
  }
  return choice;
}

std::string render_sr_probe(const BaseQuery& bq, std::string_view answer_label, std::string_view secondary_query) {
  if (std::find(bq.labels.begin(), bq.labels.end(), answer_label) == bq.labels.end()) {
    throw ValidationError(fmt::format("question \"{}\" has no choice labelled \"{}\"", bq.question_id, answer_label));
  }
  std::string prompt = bq.rendered_text;
  prompt.append(answer_label).append("\n").append(secondary_query);
  return prompt;
}

std::uint64_t variant_seed(std::uint64_t seed, std::string_view question_id, int variant_id) {
  return mix_seed(mix_seed(seed, fnv1a64(question_id)), static_cast<std::uint64_t>(variant_id));
}

ModelRecords collect(const Provider& provider, std::span<const SurveyQuestion> questions, const CollectOptions& options) {
  if (options.ensemble_n < 0) throw ValidationError("ensemble_n must be >= 0");
  const auto caps = provider.capabilities();
  const auto& info = provider.model_info();
  if (!caps.token_resolution) {
    throw ProviderError(fmt::format("model \"{}\": provider cannot resolve label tokens", info.model_id));
  }
  if (options.ensemble_n > 0 && !caps.ensemble) {
    throw ProviderError(fmt::format("model \"{}\": ensemble_n = {} but the provider has no ENSEMBLE capability "
                                    "(PV and PS need dropout variants)",
                                    info.model_id, options.ensemble_n));
  }

  ModelRecords records;
  records.model = info;
  std::size_t max_choices = 0;
  for (const auto& q : questions) max_choices = std::max(max_choices, q.choices.size());
  try {
    for (std::size_t i = 0; i < max_choices; ++i) {
      const auto label = choice_label(i);
      records.label_tokens[label] = provider.resolve_label_token(label);
    }
    records.evaluator = {provider.resolve_label_token(kBestPhrase), provider.resolve_label_token(kWorstPhrase)};
  } catch (const ProviderError& e) {
    throw ProviderError(fmt::format("model \"{}\": {}", info.model_id, e.what()));
  }

  std::vector<std::optional<QuestionRecords>> results(questions.size());
  std::vector<std::exception_ptr> errors(questions.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < questions.size(); i = next++) {
      try {
        results[i] = collect_question(provider, questions[i], records.label_tokens, records.evaluator, options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_workers = std::clamp(options.workers, 1, static_cast<int>(std::max<std::size_t>(1, questions.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < questions.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const ProviderError& e) {
      throw ProviderError(fmt::format("model \"{}\", question \"{}\": {}", info.model_id, questions[i].id, e.what()));
    }
  }
  records.questions.reserve(questions.size());
  for (auto& r : results) records.questions.push_back(std::move(*r));
  return records;
}

}  // namespace uqa
