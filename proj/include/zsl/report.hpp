#pragma once
// Summary table (mean +- dispersion per method, best/second-best flags) and
// per-method SVG boxplots of final-stage true-label confidence, one box per
// task. SVG is emitted directly: fixed 800x400 viewBox, no plotting library.

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "zsl/eval.hpp"
#include "zsl/experiment.hpp"

namespace zsl {

// ---------------------------------------------------------------------------
// Summary statistics over runs
// ---------------------------------------------------------------------------

struct Dispersion {
  double mean = 0.0;
  std::optional<double> stddev;  // sample std; absent for a single run
  std::optional<double> stderr_mean;
  int count = 0;
};

inline Dispersion dispersion_of(const std::vector<double>& values) {
  Dispersion d;
  d.count = static_cast<int>(values.size());
  if (values.empty()) return d;
  double sum = 0.0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - d.mean) * (v - d.mean);
    const double var = ss / static_cast<double>(values.size() - 1);
    d.stddev = std::sqrt(var);
    d.stderr_mean = *d.stddev / std::sqrt(static_cast<double>(values.size()));
  }
  return d;
}

struct MethodSummary {
  std::string method;
  std::size_t buffer_capacity = 0;
  int runs = 0;
  Dispersion acc, masked_acc, macc, bwt, forgetting;
  bool bwt_present = false;
  bool forgetting_present = false;
};

namespace detail {

struct MetricColumn {
  const char* name;
  bool higher_better;
};

inline constexpr MetricColumn kMetricColumns[] = {
    {"acc", true},    {"masked_acc", true},      {"macc", true},
    {"bwt", true},    {"forgetting", false},
};

inline const Dispersion& metric_of(const MethodSummary& s, const std::string& name) {
  if (name == "acc") return s.acc;
  if (name == "masked_acc") return s.masked_acc;
  if (name == "macc") return s.macc;
  if (name == "bwt") return s.bwt;
  return s.forgetting;
}

inline std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return std::string(buf);
}

}  // namespace detail

// Per-(method, buffer) aggregation of a results CSV, preserving first
// appearance order.
inline std::vector<MethodSummary> summarize_results(const CsvTable& results) {
  if (results.rows.empty()) throw DataError("report: no completed runs in results CSV");
  const int c_method = results.column("method");
  const int c_buffer = results.column("buffer_capacity");
  const int c_acc = results.column("acc");
  const int c_masked = results.column("masked_acc");
  const int c_macc = results.column("macc");
  const int c_bwt = results.column("bwt");
  const int c_forget = results.column("forgetting");

  struct Bucket {
    std::vector<double> acc, masked, macc, bwt, forgetting;
  };
  std::vector<std::pair<std::pair<std::string, std::size_t>, Bucket>> buckets;
  for (const auto& row : results.rows) {
    const double acc = std::stod(row[c_acc]);
    const double masked = std::stod(row[c_masked]);
    if (masked < acc - 1e-12)
      throw DataError("report: run violates MASKED ACC >= ACC (method " + row[c_method] + ")");

    const std::pair<std::string, std::size_t> key{row[c_method],
                                                  std::stoul(row[c_buffer])};
    auto it = std::find_if(buckets.begin(), buckets.end(),
                           [&](const auto& b) { return b.first == key; });
    if (it == buckets.end()) {
      buckets.push_back({key, {}});
      it = buckets.end() - 1;
    }
    it->second.acc.push_back(acc);
    it->second.masked.push_back(masked);
    it->second.macc.push_back(std::stod(row[c_macc]));
    if (!row[c_bwt].empty()) it->second.bwt.push_back(std::stod(row[c_bwt]));
    if (!row[c_forget].empty()) it->second.forgetting.push_back(std::stod(row[c_forget]));
  }

  std::vector<MethodSummary> out;
  for (auto& [key, bucket] : buckets) {
    MethodSummary s;
    s.method = key.first;
    s.buffer_capacity = key.second;
    s.runs = static_cast<int>(bucket.acc.size());
    s.acc = dispersion_of(bucket.acc);
    s.masked_acc = dispersion_of(bucket.masked);
    s.macc = dispersion_of(bucket.macc);
    s.bwt = dispersion_of(bucket.bwt);
    s.forgetting = dispersion_of(bucket.forgetting);
    s.bwt_present = !bucket.bwt.empty();
    s.forgetting_present = !bucket.forgetting.empty();
    out.push_back(std::move(s));
  }
  return out;
}

// Text table with best (**) and second-best (*) flags per metric. Dispersion
// shows sample std and standard error, both labeled; a single run reports
// them as absent rather than zero.
inline std::string render_summary_table(const std::vector<MethodSummary>& summaries) {
  std::map<std::string, std::pair<int, int>> flags;  // metric -> (best idx, second idx)
  for (const auto& col : detail::kMetricColumns) {
    int best = -1, second = -1;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
      const Dispersion& d = detail::metric_of(summaries[i], col.name);
      if (d.count == 0) continue;
      auto better = [&](int a, int b) {
        const double va = detail::metric_of(summaries[static_cast<std::size_t>(a)], col.name).mean;
        const double vb = detail::metric_of(summaries[static_cast<std::size_t>(b)], col.name).mean;
        return col.higher_better ? va > vb : va < vb;
      };
      if (best < 0 || better(static_cast<int>(i), best)) {
        second = best;
        best = static_cast<int>(i);
      } else if (second < 0 || better(static_cast<int>(i), second)) {
        second = static_cast<int>(i);
      }
    }
    flags[col.name] = {best, second};
  }

  auto cell = [&](const MethodSummary& s, const char* name, int idx) {
    const Dispersion& d = detail::metric_of(s, name);
    if (d.count == 0) return std::string("n/a");
    std::string text = detail::fmt3(d.mean);
    text += d.stddev ? " sd" + detail::fmt3(*d.stddev) : " sd=n/a";
    text += d.stderr_mean ? " se" + detail::fmt3(*d.stderr_mean) : " se=n/a";
    const auto [best, second] = flags[name];
    if (idx == best) text += " **";
    else if (idx == second) text += " *";
    return text;
  };

  std::ostringstream out;
  out << "method      buffer  runs  ";
  for (const auto& col : detail::kMetricColumns) {
    out << col.name;
    for (std::size_t pad = std::string(col.name).size(); pad < 28; ++pad) out << ' ';
  }
  out << "\n";
  out << std::string(26 + 28 * 5, '-') << "\n";
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const MethodSummary& s = summaries[i];
    std::string row = s.method;
    row.resize(12, ' ');
    std::string buffer = std::to_string(s.buffer_capacity);
    buffer.resize(8, ' ');
    std::string runs = std::to_string(s.runs);
    runs.resize(6, ' ');
    out << row << buffer << runs;
    for (const auto& col : detail::kMetricColumns) {
      std::string c = cell(s, col.name, static_cast<int>(i));
      c.resize(std::max<std::size_t>(c.size(), 28), ' ');
      out << c;
    }
    out << "\n";
  }
  out << "\n** best, * second-best per metric (bwt higher is better, forgetting lower)\n";
  out << "buffer capacity counts total stored items (slides for derpp, regions for buro)\n";
  out << "synthetic-benchmark results; absolute values are not comparable to clinical runs\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// SVG boxplots
// ---------------------------------------------------------------------------

// Fixed 800x400 canvas; score axis spans [-1, 1] for cosine scores and
// [0, 1] for softmax probabilities.
struct BoxGeometry {
  double x_center = 0.0;
  double box_width = 0.0;
  double y_min = 0.0, y_q1 = 0.0, y_median = 0.0, y_q3 = 0.0, y_max = 0.0;
};

namespace svg {
inline constexpr double kWidth = 800.0, kHeight = 400.0;
inline constexpr double kLeft = 60.0, kRight = 20.0, kTop = 30.0, kBottom = 40.0;
inline constexpr double kPlotW = kWidth - kLeft - kRight;
inline constexpr double kPlotH = kHeight - kTop - kBottom;

inline double axis_lo(ScoreKind kind) { return kind == ScoreKind::SoftmaxProb ? 0.0 : -1.0; }
inline double axis_hi(ScoreKind) { return 1.0; }

inline double y_of(double value, ScoreKind kind) {
  const double lo = axis_lo(kind), hi = axis_hi(kind);
  return kTop + (1.0 - (value - lo) / (hi - lo)) * kPlotH;
}

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10f", v);
  return std::string(buf);
}
}  // namespace svg

inline BoxGeometry box_geometry(const SummaryStats& stats, int index, int count, ScoreKind kind) {
  if (count < 1 || index < 0 || index >= count) throw DomainError("box_geometry: bad box index");
  BoxGeometry g;
  const double slot = svg::kPlotW / static_cast<double>(count);
  g.x_center = svg::kLeft + (static_cast<double>(index) + 0.5) * slot;
  g.box_width = std::min(60.0, 0.6 * slot);
  g.y_min = svg::y_of(stats.min, kind);
  g.y_q1 = svg::y_of(stats.q1, kind);
  g.y_median = svg::y_of(stats.median, kind);
  g.y_q3 = svg::y_of(stats.q3, kind);
  g.y_max = svg::y_of(stats.max, kind);
  return g;
}

// One boxplot per task for one method's final-stage confidence records.
inline std::string render_boxplot_svg(const std::string& method,
                                      const std::vector<ConfidenceGroup>& groups) {
  if (groups.empty()) throw DataError("boxplot: no confidence groups");
  const ScoreKind kind = groups.front().kind;
  const int count = static_cast<int>(groups.size());

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 400\">\n";
  out << "  <desc>true-label confidence per task, method " << method << ", score kind "
      << to_string(kind) << "</desc>\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"800\" height=\"400\" fill=\"white\"/>\n";
  out << "  <text x=\"" << svg::num(svg::kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << method << " (" << to_string(kind) << ")</text>\n";

  // y axis with ticks at lo, midpoint, hi
  const double lo = svg::axis_lo(kind), hi = svg::axis_hi(kind);
  out << "  <line x1=\"" << svg::num(svg::kLeft) << "\" y1=\"" << svg::num(svg::kTop)
      << "\" x2=\"" << svg::num(svg::kLeft) << "\" y2=\"" << svg::num(svg::kTop + svg::kPlotH)
      << "\" stroke=\"black\"/>\n";
  for (double tick : {lo, (lo + hi) / 2.0, hi}) {
    const double y = svg::y_of(tick, kind);
    out << "  <line x1=\"" << svg::num(svg::kLeft - 4) << "\" y1=\"" << svg::num(y) << "\" x2=\""
        << svg::num(svg::kLeft) << "\" y2=\"" << svg::num(y) << "\" stroke=\"black\"/>\n";
    out << "  <text x=\"" << svg::num(svg::kLeft - 8) << "\" y=\"" << svg::num(y + 4)
        << "\" text-anchor=\"end\" font-size=\"11\">" << detail::fmt3(tick) << "</text>\n";
  }

  for (int i = 0; i < count; ++i) {
    const ConfidenceGroup& g = groups[static_cast<std::size_t>(i)];
    const BoxGeometry box = box_geometry(g.stats, i, count, kind);
    const double x0 = box.x_center - box.box_width / 2.0;
    const double x1 = box.x_center + box.box_width / 2.0;
    out << "  <g class=\"box\" data-task=\"" << g.eval_task << "\">\n";
    out << "    <line class=\"whisker\" x1=\"" << svg::num(box.x_center) << "\" y1=\""
        << svg::num(box.y_min) << "\" x2=\"" << svg::num(box.x_center) << "\" y2=\""
        << svg::num(box.y_q1) << "\" stroke=\"black\"/>\n";
    out << "    <line class=\"whisker\" x1=\"" << svg::num(box.x_center) << "\" y1=\""
        << svg::num(box.y_q3) << "\" x2=\"" << svg::num(box.x_center) << "\" y2=\""
        << svg::num(box.y_max) << "\" stroke=\"black\"/>\n";
    for (double cap_y : {box.y_min, box.y_max})
      out << "    <line class=\"cap\" x1=\"" << svg::num(box.x_center - box.box_width / 4)
          << "\" y1=\"" << svg::num(cap_y) << "\" x2=\""
          << svg::num(box.x_center + box.box_width / 4) << "\" y2=\"" << svg::num(cap_y)
          << "\" stroke=\"black\"/>\n";
    out << "    <rect class=\"iqr\" x=\"" << svg::num(x0) << "\" y=\"" << svg::num(box.y_q3)
        << "\" width=\"" << svg::num(box.box_width) << "\" height=\""
        << svg::num(box.y_q1 - box.y_q3) << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    out << "    <line class=\"median\" x1=\"" << svg::num(x0) << "\" y1=\""
        << svg::num(box.y_median) << "\" x2=\"" << svg::num(x1) << "\" y2=\""
        << svg::num(box.y_median) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    out << "    <text x=\"" << svg::num(box.x_center) << "\" y=\""
        << svg::num(svg::kTop + svg::kPlotH + 16) << "\" text-anchor=\"middle\" font-size=\"11\">"
        << "task " << g.eval_task << "</text>\n";
    out << "  </g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// emit_report
// ---------------------------------------------------------------------------

// Reads results.csv and confidence.csv from a results directory, writes
// report.txt plus one boxplot_<method>.svg per method, and returns the table
// text. Every number in the table is recomputed from the CSVs alone.
inline std::string emit_report(const std::string& results_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(results_dir);
  const CsvTable results = read_csv((dir / "results.csv").string());
  auto summaries = summarize_results(results);
  const std::string table = render_summary_table(summaries);
  detail::write_text_file(dir / "report.txt", table);

  const CsvTable confidence = read_csv((dir / "confidence.csv").string());
  if (!confidence.rows.empty()) {
    const int c_method = confidence.column("method");
    const int c_eval = confidence.column("eval_task");
    const int c_stage = confidence.column("train_stage");
    const int c_score = confidence.column("score");
    const int c_kind = confidence.column("score_kind");

    std::vector<std::string> method_order;
    std::map<std::string, int> final_stage;
    for (const auto& row : confidence.rows) {
      if (!final_stage.count(row[c_method])) method_order.push_back(row[c_method]);
      final_stage[row[c_method]] =
          std::max(final_stage[row[c_method]], std::stoi(row[c_stage]));
    }
    for (const std::string& method : method_order) {
      std::vector<ConfidenceRecord> records;
      for (const auto& row : confidence.rows) {
        if (row[c_method] != method) continue;
        if (std::stoi(row[c_stage]) != final_stage[method]) continue;
        ConfidenceRecord rec;
        rec.eval_task = std::stoi(row[c_eval]);
        rec.train_stage = final_stage[method];
        rec.score = std::stod(row[c_score]);
        rec.kind = row[c_kind] == "cosine"        ? ScoreKind::Cosine
                   : row[c_kind] == "dot"         ? ScoreKind::Dot
                                                   : ScoreKind::SoftmaxProb;
        records.push_back(std::move(rec));
      }
      if (records.empty()) continue;
      detail::write_text_file(dir / ("boxplot_" + method + ".svg"),
                              render_boxplot_svg(method, confidence_summary(records)));
    }
  }
  return table;
}

}  // namespace zsl
