#pragma once
// Accuracy matrices filled after each task, the five sequence metrics, and
// the true-label confidence study.
//
// a[k][i] is the accuracy on task i's test split evaluated after finishing
// task k (i <= k). Everything here is a pure function of run artifacts.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zsl/aggregator.hpp"
#include "zsl/core.hpp"
#include "zsl/datagen.hpp"

namespace zsl {

class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;

  // Rows arrive stage by stage; row k carries k+1 entries.
  void push_row(std::vector<double> row) {
    if (row.size() != rows_.size() + 1)
      throw DataError("AccuracyMatrix: row " + std::to_string(rows_.size()) + " needs " +
                      std::to_string(rows_.size() + 1) + " entries");
    for (double a : row)
      if (!(a >= 0.0 && a <= 1.0)) throw DataError("AccuracyMatrix: accuracy outside [0, 1]");
    rows_.push_back(std::move(row));
  }

  int n_tasks() const { return static_cast<int>(rows_.size()); }

  double at(int k, int i) const {
    if (k < 0 || k >= n_tasks() || i < 0 || i > k)
      throw DomainError("AccuracyMatrix: entry (" + std::to_string(k) + ", " + std::to_string(i) +
                        ") undefined");
    return rows_[k][i];
  }

  const std::vector<std::vector<double>>& rows() const { return rows_; }

  friend bool operator==(const AccuracyMatrix&, const AccuracyMatrix&) = default;

 private:
  std::vector<std::vector<double>> rows_;
};

struct MetricsReport {
  double acc = 0.0;         // final-row mean, CLASS-IL
  double masked_acc = 0.0;  // final-row mean, TASK-IL
  double macc = 0.0;        // running average of mean seen-task accuracies
  std::optional<double> bwt;         // undefined for single-task runs
  std::optional<double> forgetting;  // undefined for single-task runs
  std::vector<double> final_task_accuracies;
};

enum class ScoreKind : std::uint8_t { Cosine = 0, SoftmaxProb = 1, Dot = 2 };

inline const char* to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::Cosine: return "cosine";
    case ScoreKind::SoftmaxProb: return "softmax_prob";
    case ScoreKind::Dot: return "dot";
  }
  return "?";
}

// Score of the true class for one test slide at one evaluation stage.
struct ConfidenceRecord {
  int eval_task = 0;
  int train_stage = 0;
  std::string slide_id;
  GlobalLabel true_label;
  double score = 0.0;
  ScoreKind kind = ScoreKind::Cosine;
};

// ---------------------------------------------------------------------------
// Row evaluation
// ---------------------------------------------------------------------------

// A scorer maps a slide bag to confidence-scaled scores over every class
// accumulated so far, candidates in global-id order. Cosines for the
// prototype bank, softmax probabilities for trained heads; argmax order is
// unaffected either way.
template <typename S>
concept SlideScorer = requires(const S& s, const SlideBag& bag) {
  { s.score_all(bag) } -> std::same_as<ScoreVector>;
  { s.kind() } -> std::same_as<ScoreKind>;
};

struct RowResult {
  std::vector<double> ci_row;
  std::vector<double> ti_row;
  std::vector<ConfidenceRecord> records;
};

template <SlideScorer S>
RowResult evaluate_row(const S& scorer, std::span<const TaskDataset> tasks_seen, int stage_k) {
  if (stage_k < 0 || stage_k >= static_cast<int>(tasks_seen.size()))
    throw DataError("evaluate_row: stage " + std::to_string(stage_k) + " tasks unavailable");

  RowResult out;
  for (int i = 0; i <= stage_k; ++i) {
    const TaskDataset& task = tasks_seen[i];
    if (task.test.empty())
      throw DataError("evaluate_row: task " + std::to_string(i) + " has no test split");

    long ci_correct = 0, ti_correct = 0;
    for (const SlideBag& bag : task.test) {
      const ScoreVector sv = scorer.score_all(bag);
      int begin = -1, count = 0;
      for (std::size_t c = 0; c < sv.candidates.size(); ++c) {
        if (sv.candidates[c].task_index == i) {
          if (begin < 0) begin = static_cast<int>(c);
          ++count;
        }
      }
      if (begin < 0) throw StateError("evaluate_row: scorer does not cover task " + std::to_string(i));

      if (argmax_tiebreak(sv).global_id == bag.label.global_id) ++ci_correct;

      ScoreVector restricted;
      restricted.scores.assign(sv.scores.begin() + begin, sv.scores.begin() + begin + count);
      restricted.candidates.assign(sv.candidates.begin() + begin,
                                   sv.candidates.begin() + begin + count);
      if (argmax_tiebreak(restricted).global_id == bag.label.global_id) ++ti_correct;

      ConfidenceRecord rec;
      rec.eval_task = i;
      rec.train_stage = stage_k;
      rec.slide_id = bag.slide_id;
      rec.true_label = bag.label;
      rec.score = sv.scores[static_cast<std::size_t>(bag.label.global_id)];
      rec.kind = scorer.kind();
      out.records.push_back(std::move(rec));
    }
    const auto n = static_cast<double>(task.test.size());
    out.ci_row.push_back(static_cast<double>(ci_correct) / n);
    out.ti_row.push_back(static_cast<double>(ti_correct) / n);
  }
  return out;
}

// Trained-model scorer: softmax probabilities over all registered classes.
struct ModelScorer {
  const ModelState* model;

  ScoreVector score_all(const SlideBag& bag) const {
    return softmax(forward_logits(aggregate(bag, model->params), *model));
  }
  ScoreKind kind() const { return ScoreKind::SoftmaxProb; }
};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline MetricsReport compute_metrics(const AccuracyMatrix& ci, const AccuracyMatrix& ti) {
  const int n = ci.n_tasks();
  if (n < 1) throw DataError("compute_metrics: empty accuracy matrix");
  if (ti.n_tasks() != n) throw DataError("compute_metrics: CI/TI task count mismatch");

  MetricsReport rep;
  double acc = 0.0, masked = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += ci.at(n - 1, i);
    masked += ti.at(n - 1, i);
    rep.final_task_accuracies.push_back(ci.at(n - 1, i));
  }
  rep.acc = acc / n;
  rep.masked_acc = masked / n;

  double macc = 0.0;
  for (int k = 0; k < n; ++k) {
    double mean_k = 0.0;
    for (int i = 0; i <= k; ++i) mean_k += ci.at(k, i);
    macc += mean_k / (k + 1);
  }
  rep.macc = macc / n;

  if (n >= 2) {
    double bwt = 0.0, forgetting = 0.0;
    for (int i = 0; i < n - 1; ++i) {
      bwt += ci.at(n - 1, i) - ci.at(i, i);
      double best = 0.0;
      for (int k = i; k < n; ++k) best = std::max(best, ci.at(k, i));
      forgetting += best - ci.at(n - 1, i);
    }
    rep.bwt = bwt / (n - 1);
    rep.forgetting = forgetting / (n - 1);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Confidence summaries
// ---------------------------------------------------------------------------

struct SummaryStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
  std::size_t count = 0;
};

// Inclusive linear-interpolation quantile on sorted data: index p * (n - 1).
inline double quantile_inclusive(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile: empty data");
  if (p < 0.0 || p > 1.0) throw DomainError("quantile: p outside [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline SummaryStats summarize(std::vector<double> values) {
  if (values.empty()) throw DomainError("summarize: empty data");
  std::sort(values.begin(), values.end());
  SummaryStats s;
  s.count = values.size();
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile_inclusive(values, 0.25);
  s.median = quantile_inclusive(values, 0.5);
  s.q3 = quantile_inclusive(values, 0.75);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  return s;
}

struct ConfidenceGroup {
  int eval_task = 0;
  ScoreKind kind = ScoreKind::Cosine;
  SummaryStats stats;
};

// Order statistics of the true-label scores, grouped by (task, score kind),
// ordered by task.
inline std::vector<ConfidenceGroup> confidence_summary(
    const std::vector<ConfidenceRecord>& records) {
  if (records.empty()) throw DataError("confidence_summary: no records");
  std::vector<std::pair<std::pair<int, std::uint8_t>, std::vector<double>>> groups;
  for (const ConfidenceRecord& r : records) {
    const std::pair<int, std::uint8_t> key{r.eval_task, static_cast<std::uint8_t>(r.kind)};
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == key; });
    if (it == groups.end()) {
      groups.push_back({key, {}});
      it = groups.end() - 1;
    }
    it->second.push_back(r.score);
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ConfidenceGroup> out;
  out.reserve(groups.size());
  for (auto& [key, values] : groups)
    out.push_back({key.first, static_cast<ScoreKind>(key.second), summarize(std::move(values))});
  return out;
}

}  // namespace zsl
