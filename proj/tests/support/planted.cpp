#include "planted.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "uqa/dump.hpp"
#include "uqa/elicit.hpp"
#include "uqa/hash.hpp"
#include "uqa/pipeline.hpp"

namespace testing {

namespace {

using Vec = std::vector<double>;

constexpr double kTopMass = 0.4;
constexpr double kTailMass = 0.6;
constexpr std::int64_t kTailStart = 10;
constexpr std::int64_t kBestToken = 1'000'000;
constexpr std::int64_t kWorstToken = 1'000'001;

double dot(const Vec& a, const Vec& b) { return std::inner_product(a.begin(), a.end(), b.begin(), 0.0); }

// Centre, remove the components along `basis`, rescale to unit population variance.
Vec orthonormalise(Vec v, const std::vector<Vec>& basis) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (auto& x : v) x -= mean;
  for (const auto& b : basis) {
    const double c = dot(v, b) / dot(b, b);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * b[i];
  }
  const double scale = std::sqrt(static_cast<double>(v.size()) / dot(v, v));
  for (auto& x : v) x *= scale;
  return v;
}

double top_entropy(double h) {
  const double s = (kTopMass - h) / 9.0;
  return -h * std::log(h) - 9.0 * s * std::log(s);
}

// top_entropy decreases on (M/10, M); bisect for the head probability.
double solve_head(double target) {
  double lo = kTopMass / 10.0, hi = kTopMass * (1.0 - 1e-12);
  if (!(target < top_entropy(lo) && target > top_entropy(hi))) {
    throw std::runtime_error(fmt::format("planted KE target {} out of reach", target));
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (top_entropy(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

uqa::TokenDistribution planted_distribution(double head, std::int64_t tail, uqa::DistributionMeta meta) {
  std::vector<uqa::TokenEntry> entries;
  const double s = (kTopMass - head) / 9.0;
  const double t = kTailMass / static_cast<double>(tail);
  if (!(t < s)) throw std::runtime_error("planted tail token outranks the top ten");
  entries.push_back(uqa::TokenEntry::from_logprob(0, "A", std::log(head)));
  for (std::int64_t i = 1; i < kTailStart; ++i) {
    entries.push_back(uqa::TokenEntry::from_logprob(i, std::string(1, static_cast<char>('A' + i)), std::log(s)));
  }
  for (std::int64_t i = 0; i < tail; ++i) {
    entries.push_back(uqa::TokenEntry::from_logprob(kTailStart + i, fmt::format("tail{}", i), std::log(t)));
  }
  return uqa::TokenDistribution(std::move(entries), uqa::Completeness::full(), std::move(meta));
}

}  // namespace

PlantedSuite build_planted_suite(std::uint64_t seed, int n_questions, int n_models, int ensemble_n) {
  PlantedSuite suite;
  suite.questions = uqa::generate_fixture(n_questions, {2, 5}, seed);
  const auto n = static_cast<std::size_t>(n_questions);

  Vec human(n);
  for (std::size_t i = 0; i < n; ++i) human[i] = uqa::human_uncertainty(suite.questions[i]);
  const Vec z = orthonormalise(human, {});

  uqa::Rng rng(uqa::mix_seed(seed, 0x91a7));
  const std::int64_t sizes[] = {1'000'000'000, 3'000'000'000, 7'000'000'000, 8'000'000'000};
  for (int m = 0; m < n_models; ++m) {
    Vec w(n), w2(n);
    for (auto& x : w) x = rng.normal();
    for (auto& x : w2) x = rng.normal();
    w = orthonormalise(w, {z});
    w2 = orthonormalise(w2, {z, w});

    uqa::ModelRecords rec;
    rec.model = {fmt::format("planted-{}", m + 1), "planted", sizes[m % 4] + m / 4, false};
    for (int c = 0; c < 26 && c < kTailStart; ++c) rec.label_tokens[uqa::choice_label(c)] = c;
    rec.evaluator = {kBestToken, kWorstToken};

    for (std::size_t i = 0; i < n; ++i) {
      const auto& q = suite.questions[i];
      const double k = kPlantedKe + 0.1 * (kPlantedKe * z[i] + std::sqrt(1.0 - kPlantedKe * kPlantedKe) * w[i]);
      const double v = 5.0 + 0.3 * w2[i];
      const double head = solve_head(k);
      const auto tail = static_cast<std::int64_t>(std::llround(std::exp((v - k) / kTailMass) * kTailMass));

      const uqa::BaseQuery bq = uqa::render_base_query(q, rec.label_tokens);
      const std::string sha = uqa::sha256_hex(bq.rendered_text);

      uqa::QuestionRecords qr;
      qr.question_id = q.id;
      qr.base = planted_distribution(head, tail, {rec.model.model_id, q.id, 0, sha});
      qr.ensemble.model_id = rec.model.model_id;
      qr.ensemble.question_id = q.id;
      std::vector<uqa::ClozeOutcome> outcomes;
      for (int vi = 1; vi <= ensemble_n; ++vi) {
        const double jittered = head * rng.uniform(0.97, 1.03);
        qr.ensemble.variants.push_back(planted_distribution(jittered, tail, {rec.model.model_id, q.id, vi, sha}));
        outcomes.push_back(uqa::cloze_select(qr.ensemble.variants.back(), bq));
      }

      // Probes are what elicit::collect would have recorded, so a replay of
      // the dump through the collector reproduces the records exactly.
      const auto base_choice = uqa::cloze_select(qr.base, bq);
      auto probe = [&](const std::string& chosen, const std::string& conditioned, int variant) {
        const std::string prompt = uqa::render_sr_probe(bq, conditioned, uqa::kSecondaryQuery);
        return uqa::SelfReportProbe{q.id, chosen, conditioned, variant, rng.uniform(0.05, 0.6),
                                    rng.uniform(0.05, 0.6), uqa::sha256_hex(prompt)};
      };
      qr.self_report = probe(base_choice.chosen_label, base_choice.chosen_label, 0);
      if (ensemble_n > 0) {
        const std::string majority = uqa::ensemble_select(outcomes).label;
        for (int vi = 1; vi <= ensemble_n; ++vi) {
          std::vector<uqa::SelfReportProbe> per_choice;
          for (const auto& c : q.choices) per_choice.push_back(probe(majority, c.label, vi));
          qr.population_probes.push_back(std::move(per_choice));
        }
      }
      rec.questions.push_back(std::move(qr));
    }
    suite.models.push_back(std::move(rec));
  }
  return suite;
}

uqa::AnalysisReport run_planted_pipeline(const PlantedSuite& suite, const std::filesystem::path& dir) {
  uqa::PipelineConfig config;
  config.output_dir = dir / "out";
  config.ensemble_n = suite.models.empty() || suite.models[0].questions.empty()
                          ? 0
                          : static_cast<int>(suite.models[0].questions[0].ensemble.variants.size());
  for (const auto& m : suite.models) {
    const auto path = dir / "input" / (m.model.model_id + ".ndjson");
    std::filesystem::create_directories(path.parent_path());
    uqa::write_dump_file(path, m);
    uqa::ProviderSpec spec;
    spec.kind = uqa::ProviderKind::Replay;
    spec.dump = path;
    config.providers.push_back(std::move(spec));
  }
  const auto collected = uqa::run_collect(config, suite.questions);
  if (!collected.failures.empty()) throw std::runtime_error(collected.failures[0].error);
  const auto measures = uqa::run_measure(config, collected.records, suite.questions);
  return uqa::run_analyze(config, measures, suite.questions);
}

}  // namespace testing
