#include "uqa/report.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <array>
#include <fstream>

#include "uqa/error.hpp"

namespace uqa {

namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

std::string csv_num(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json model_json(const ModelInfo& m) {
  return {{"model_id", m.model_id}, {"family", m.family}, {"param_count", m.param_count}, {"instruct", m.instruct}};
}

ModelInfo model_from(const json& j) {
  return {j.at("model_id").get<std::string>(), j.at("family").get<std::string>(),
          j.at("param_count").get<std::int64_t>(), j.at("instruct").get<bool>()};
}

std::string_view pooling_name(ChoicePooling p) { return p == ChoicePooling::Flat ? "flat" : "question_mean"; }

ChoicePooling pooling_from(std::string_view s) {
  if (s == "flat") return ChoicePooling::Flat;
  if (s == "question_mean") return ChoicePooling::QuestionMean;
  throw ValidationError(fmt::format("unknown pooling \"{}\"", s));
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr std::array<std::string_view, 8> kPalette = {"#1b6a4f", "#4e9a6f", "#8cc7a1", "#2f5d8a",
                                                      "#6c8ebf", "#b5a642", "#a35d3d", "#7d5ba6"};

}  // namespace

json measures_to_json(std::span<const ModelMeasures> models) {
  json doc = {{"schema_version", kReportSchemaVersion}, {"models", json::array()}};
  for (const auto& m : models) {
    json results = json::array();
    for (const auto& r : m.results) {
      json rec = {{"measure", to_string(r.measure)}, {"question_id", r.question_id}, {"available", r.available},
                  {"values", r.values}};
      if (!r.labels.empty()) rec["labels"] = r.labels;
      if (!r.reason.empty()) rec["reason"] = r.reason;
      results.push_back(std::move(rec));
    }
    doc["models"].push_back({{"model", model_json(m.model)}, {"results", std::move(results)}});
  }
  return doc;
}

std::vector<ModelMeasures> measures_from_json(const json& doc) {
  try {
    if (doc.at("schema_version").get<int>() != kReportSchemaVersion) {
      throw ValidationError("unsupported measures schema_version");
    }
    std::vector<ModelMeasures> out;
    for (const auto& jm : doc.at("models")) {
      ModelMeasures m;
      m.model = model_from(jm.at("model"));
      for (const auto& jr : jm.at("results")) {
        MeasureResult r;
        r.model_id = m.model.model_id;
        r.measure = measure_from_string(jr.at("measure").get<std::string>());
        r.question_id = jr.at("question_id").get<std::string>();
        r.available = jr.at("available").get<bool>();
        r.values = jr.at("values").get<std::vector<double>>();
        if (jr.contains("labels")) r.labels = jr["labels"].get<std::vector<std::string>>();
        if (jr.contains("reason")) r.reason = jr["reason"].get<std::string>();
        m.results.push_back(std::move(r));
      }
      out.push_back(std::move(m));
    }
    return out;
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed measures document: {}", e.what()));
  }
}

std::string measures_to_csv(std::span<const ModelMeasures> models) {
  std::string out = "model_id,measure,question_id,choice,value,available,reason\n";
  for (const auto& m : models) {
    for (const auto& r : m.results) {
      const auto prefix = fmt::format("{},{},{}", csv_field(m.model.model_id), to_string(r.measure),
                                      csv_field(r.question_id));
      if (!r.available) {
        out += fmt::format("{},,,0,{}\n", prefix, csv_field(r.reason));
        continue;
      }
      for (std::size_t i = 0; i < r.values.size(); ++i) {
        const std::string choice = i < r.labels.size() ? r.labels[i] : std::string();
        out += fmt::format("{},{},{},1,\n", prefix, choice, r.values[i]);
      }
    }
  }
  return out;
}

json report_to_json(const AnalysisReport& report) {
  json models = json::array();
  for (const auto& m : report.models) models.push_back(model_json(m));

  json order = json::array();
  for (const auto& s : report.phase1.order) {
    order.push_back({{"measure", to_string(s.measure)}, {"mean_r", opt(s.mean_r)},
                     {"orientation", to_string(s.orientation)}});
  }
  json cells = json::array();
  for (const auto& c : report.phase1.cells) {
    cells.push_back({{"model_id", c.model_id}, {"measure", to_string(c.measure)}, {"r", opt(c.r)}, {"n", c.n},
                     {"significant", c.significant}, {"reason", c.reason}});
  }
  json size = json::array();
  for (const auto& s : report.size) {
    size.push_back({{"measure", to_string(s.measure)}, {"r", opt(s.r)}, {"n_models", s.n_models}, {"reason", s.reason}});
  }
  json reg_order = json::array();
  for (const auto& s : report.regression_order) {
    reg_order.push_back({{"name", s.name}, {"mean_cv_r", opt(s.mean_cv_r)}, {"mean_full_fit_r", opt(s.mean_full_fit_r)}});
  }
  json regs = json::array();
  for (const auto& r : report.regressions) {
    json features = json::array();
    for (auto f : r.features) features.push_back(to_string(f));
    json folds = json::array();
    for (const auto& f : r.cv.fold_rs) folds.push_back(opt(f));
    regs.push_back({{"model_id", r.model_id},
                    {"name", r.name},
                    {"features", std::move(features)},
                    {"coefficients", r.coefficients},
                    {"intercept", r.intercept},
                    {"full_fit_r", opt(r.full_fit_r)},
                    {"cv_fold_rs", std::move(folds)},
                    {"cv_mean_r", opt(r.cv.mean_r)},
                    {"n", r.n},
                    {"reason", r.reason}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"options",
           {{"significance", report.options.phase1.significance},
            {"pooling", pooling_name(report.options.phase1.pooling)},
            {"folds", report.options.phase2.folds},
            {"seed", report.options.phase2.seed}}},
          {"models", std::move(models)},
          {"phase1", {{"order", std::move(order)}, {"cells", std::move(cells)}}},
          {"size_correlation", std::move(size)},
          {"phase2", {{"order", std::move(reg_order)}, {"models", std::move(regs)}}}};
}

AnalysisReport report_from_json(const json& doc) {
  try {
    if (doc.at("schema_version").get<int>() != kReportSchemaVersion) {
      throw ValidationError("unsupported report schema_version");
    }
    AnalysisReport rep;
    const auto& o = doc.at("options");
    rep.options.phase1.significance = o.at("significance").get<double>();
    rep.options.phase1.pooling = pooling_from(o.at("pooling").get<std::string>());
    rep.options.phase2.folds = o.at("folds").get<int>();
    rep.options.phase2.seed = o.at("seed").get<std::uint64_t>();
    for (const auto& m : doc.at("models")) rep.models.push_back(model_from(m));
    for (const auto& s : doc.at("phase1").at("order")) {
      const auto kind = measure_from_string(s.at("measure").get<std::string>());
      rep.phase1.order.push_back({kind, opt_from(s.at("mean_r")), uncertainty_orientation(kind)});
    }
    for (const auto& c : doc.at("phase1").at("cells")) {
      rep.phase1.cells.push_back({c.at("model_id").get<std::string>(), measure_from_string(c.at("measure").get<std::string>()),
                                  opt_from(c.at("r")), c.at("n").get<std::size_t>(), c.at("significant").get<bool>(),
                                  c.at("reason").get<std::string>()});
    }
    for (const auto& s : doc.at("size_correlation")) {
      rep.size.push_back({measure_from_string(s.at("measure").get<std::string>()), opt_from(s.at("r")),
                          s.at("n_models").get<std::size_t>(), s.at("reason").get<std::string>()});
    }
    for (const auto& s : doc.at("phase2").at("order")) {
      rep.regression_order.push_back(
          {s.at("name").get<std::string>(), opt_from(s.at("mean_cv_r")), opt_from(s.at("mean_full_fit_r"))});
    }
    for (const auto& r : doc.at("phase2").at("models")) {
      RegressionModel m;
      m.model_id = r.at("model_id").get<std::string>();
      m.name = r.at("name").get<std::string>();
      for (const auto& f : r.at("features")) m.features.push_back(measure_from_string(f.get<std::string>()));
      m.coefficients = r.at("coefficients").get<std::vector<double>>();
      m.intercept = r.at("intercept").get<double>();
      m.full_fit_r = opt_from(r.at("full_fit_r"));
      for (const auto& f : r.at("cv_fold_rs")) m.cv.fold_rs.push_back(opt_from(f));
      m.cv.mean_r = opt_from(r.at("cv_mean_r"));
      m.n = r.at("n").get<std::size_t>();
      m.reason = r.at("reason").get<std::string>();
      rep.regressions.push_back(std::move(m));
    }
    return rep;
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed report document: {}", e.what()));
  }
}

std::string phase1_csv(const AnalysisReport& report) {
  std::string out = "measure,orientation,mean_r,model_id,param_count,r,n,significant,reason\n";
  for (const auto& s : report.phase1.order) {
    for (const auto& m : report.models) {
      const auto* c = report.phase1.find(m.model_id, s.measure);
      if (!c) continue;
      out += fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(s.measure), to_string(s.orientation),
                         csv_num(s.mean_r), csv_field(m.model_id), m.param_count, csv_num(c->r), c->n,
                         c->significant ? 1 : 0, csv_field(c->reason));
    }
  }
  return out;
}

std::string size_correlation_csv(const AnalysisReport& report) {
  std::string out = "measure,r,n_models,reason\n";
  for (const auto& s : report.size) {
    out += fmt::format("{},{},{},{}\n", to_string(s.measure), csv_num(s.r), s.n_models, csv_field(s.reason));
  }
  return out;
}

std::string phase2_csv(const AnalysisReport& report) {
  std::string out = "name,model_id,features,n,full_fit_r,cv_fold_rs,cv_mean_r,intercept,coefficients,reason\n";
  for (const auto& s : report.regression_order) {
    for (const auto& r : report.regressions) {
      if (r.name != s.name) continue;
      std::vector<std::string> features, folds, coefs;
      for (auto f : r.features) features.emplace_back(to_string(f));
      for (const auto& f : r.cv.fold_rs) folds.push_back(csv_num(f));
      for (double c : r.coefficients) coefs.push_back(fmt::format("{}", c));
      out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.name, csv_field(r.model_id), fmt::join(features, ";"),
                         r.n, csv_num(r.full_fit_r), fmt::join(folds, ";"), csv_num(r.cv.mean_r),
                         r.full_fit_r ? fmt::format("{}", r.intercept) : std::string(), fmt::join(coefs, ";"),
                         csv_field(r.reason));
    }
  }
  return out;
}

std::string render_svg(std::span<const BarChart> panels) {
  constexpr double kLeft = 70, kRight = 170, kTop = 40, kPlotH = 240, kBottom = 50, kBarW = 14, kGroupGap = 22;
  std::size_t max_series = 1, max_groups = 1;
  for (const auto& p : panels) {
    max_series = std::max(max_series, p.series.size());
    max_groups = std::max(max_groups, p.groups.size());
  }
  const double group_w = kBarW * static_cast<double>(max_series) + kGroupGap;
  const double width = kLeft + group_w * static_cast<double>(max_groups) + kRight;
  const double panel_h = kTop + kPlotH + kBottom;
  const double height = panel_h * static_cast<double>(std::max<std::size_t>(1, panels.size()));

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      width, height, width, height);

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const BarChart& p = panels[pi];
    const double y0 = panel_h * static_cast<double>(pi) + kTop;
    const double span = p.y_max - p.y_min;
    auto ypos = [&](double v) { return y0 + kPlotH * (p.y_max - std::clamp(v, p.y_min, p.y_max)) / span; };

    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"14\" font-weight=\"bold\">{}</text>\n", kLeft,
                       y0 - 16, xml_escape(p.title));
    svg += fmt::format(
        "<text transform=\"translate({:.2f},{:.2f}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n", 20.0,
        y0 + kPlotH / 2, xml_escape(p.y_label));
    const double plot_right = kLeft + group_w * static_cast<double>(std::max<std::size_t>(1, p.groups.size()));
    for (int t = 0; t <= 4; ++t) {
      const double v = p.y_min + span * t / 4.0;
      svg += fmt::format(
          "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#dddddd\"/>\n"
          "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.2f}</text>\n",
          kLeft, ypos(v), plot_right, ypos(v), kLeft - 6, ypos(v) + 4, v);
    }
    for (double ref : p.reference_lines) {
      svg += fmt::format(
          "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n",
          kLeft, ypos(ref), plot_right, ypos(ref));
    }
    const double zero = ypos(std::clamp(0.0, p.y_min, p.y_max));
    svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", kLeft, zero,
                       plot_right, zero);

    for (std::size_t g = 0; g < p.groups.size(); ++g) {
      const BarGroup& group = p.groups[g];
      const double gx = kLeft + group_w * static_cast<double>(g) + kGroupGap / 2;
      const double inner_w = kBarW * static_cast<double>(std::max<std::size_t>(1, p.series.size()));
      if (group.background) {
        const double top = std::min(ypos(*group.background), zero);
        svg += fmt::format(
            "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#cfe8d8\"/>\n", gx - 4, top,
            inner_w + 8, std::abs(ypos(*group.background) - zero));
      }
      for (std::size_t s = 0; s < group.values.size(); ++s) {
        if (!group.values[s]) continue;
        const double y = ypos(*group.values[s]);
        svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                           gx + kBarW * static_cast<double>(s), std::min(y, zero), kBarW - 2, std::abs(y - zero),
                           kPalette[s % kPalette.size()]);
      }
      svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", gx + inner_w / 2,
                         y0 + kPlotH + 18, xml_escape(group.label));
    }
    for (std::size_t s = 0; s < p.series.size(); ++s) {
      const double ly = y0 + 14.0 * static_cast<double>(s);
      svg += fmt::format(
          "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n"
          "<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n",
          plot_right + 16, ly, kPalette[s % kPalette.size()], plot_right + 30, ly + 9, xml_escape(p.series[s]));
    }
  }
  svg += "</svg>\n";
  return svg;
}

BarChart phase1_chart(const AnalysisReport& report) {
  BarChart chart;
  chart.title = "Correlation with human uncertainty (ordered by mean r across models)";
  chart.y_label = "Pearson r";
  chart.reference_lines = {report.options.phase1.significance, -report.options.phase1.significance};
  for (const auto& m : report.models) chart.series.push_back(m.model_id);
  for (const auto& s : report.phase1.order) {
    BarGroup g;
    g.label = std::string(to_string(s.measure));
    for (const auto& m : report.models) {
      const auto* c = report.phase1.find(m.model_id, s.measure);
      g.values.push_back(c ? c->r : std::nullopt);
    }
    chart.groups.push_back(std::move(g));
  }
  return chart;
}

BarChart size_chart(const AnalysisReport& report) {
  BarChart chart;
  chart.title = "Correlation of human-similarity with model size";
  chart.y_label = "Pearson r";
  chart.series = {"r(similarity, parameters)"};
  for (const auto& s : report.size) chart.groups.push_back({std::string(to_string(s.measure)), {s.r}, std::nullopt});
  return chart;
}

std::vector<BarChart> phase2_charts(const AnalysisReport& report) {
  BarChart cv, full;
  cv.title = fmt::format("Regression, {}-fold cross validation (background: mean across models)",
                         report.options.phase2.folds);
  full.title = "Regression, trained and tested on all questions";
  cv.y_label = full.y_label = "Pearson r";
  for (const auto& m : report.models) {
    cv.series.push_back(m.model_id);
    full.series.push_back(m.model_id);
  }
  for (const auto& s : report.regression_order) {
    BarGroup gcv{s.name, {}, s.mean_cv_r};
    BarGroup gfull{s.name, {}, std::nullopt};
    for (const auto& m : report.models) {
      std::optional<double> rcv, rfull;
      for (const auto& r : report.regressions) {
        if (r.name == s.name && r.model_id == m.model_id) {
          rcv = r.cv.mean_r;
          rfull = r.full_fit_r;
        }
      }
      gcv.values.push_back(rcv);
      gfull.values.push_back(rfull);
    }
    cv.groups.push_back(std::move(gcv));
    full.groups.push_back(std::move(gfull));
  }
  return {cv, full};
}

std::vector<std::filesystem::path> write_plots(const AnalysisReport& report, const std::filesystem::path& dir) {
  if (report.empty()) return {};
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::filesystem::path, std::string>> files;
  const std::array<BarChart, 1> p1{phase1_chart(report)};
  const std::array<BarChart, 1> sz{size_chart(report)};
  const auto p2 = phase2_charts(report);
  files.emplace_back(dir / "phase1.svg", render_svg(p1));
  files.emplace_back(dir / "size_correlation.svg", render_svg(sz));
  files.emplace_back(dir / "phase2.svg", render_svg(p2));
  std::vector<std::filesystem::path> written;
  for (const auto& [path, body] : files) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    out << body;
    written.push_back(path);
  }
  return written;
}

}  // namespace uqa
