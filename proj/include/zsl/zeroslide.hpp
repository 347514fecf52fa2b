#pragma once
// Training-free lifelong classification against a growing prototype bank.
// Per task arrival: extend the bank with the task's class prototypes, then
// score every seen task's test slides by cosine similarity in both the
// all-classes and the task-restricted scenario. No parameter is ever updated.

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zsl/aggregator.hpp"
#include "zsl/core.hpp"
#include "zsl/datagen.hpp"
#include "zsl/eval.hpp"

namespace zsl {

// Prototype scoring: cosine (slide embeddings normalized, the default) or
// the raw dot product against the unit-norm prototypes. Predictions agree
// for any one slide; only the emitted score scale differs.
enum class SimilarityKind : std::uint8_t { Cosine = 0, Dot = 1 };

// One task's class prototypes, unit-norm except degenerate zero vectors,
// local-class order.
struct TaskPrototypes {
  int task_index = 0;
  std::vector<EmbeddingVector> prototypes;

  friend bool operator==(const TaskPrototypes&, const TaskPrototypes&) = default;
};

// Variant-averaged prototypes for one task. Degenerate (cancelled) classes
// keep their zero vector and score 0 against everything.
inline TaskPrototypes make_task_prototypes(const TaskPrototypeSpec& spec) {
  TaskPrototypes tp;
  tp.task_index = spec.task_index;
  for (Normalized& n : average_variants(spec)) tp.prototypes.push_back(std::move(n.value));
  return tp;
}

// Append-only bank of per-class prototypes across the task sequence, with the
// global label mapping. Scoring never mutates the bank.
class PrototypeBank {
 public:
  void extend(TaskPrototypes tp) {
    if (tp.task_index != num_tasks())
      throw StateError("PrototypeBank: expected task " + std::to_string(num_tasks()) +
                       ", got task " + std::to_string(tp.task_index) +
                       (tp.task_index < num_tasks() ? " (already present)" : " (out of order)"));
    if (tp.prototypes.empty()) throw StateError("PrototypeBank: task with no prototypes");
    for (const EmbeddingVector& p : tp.prototypes) {
      if (dim_ < 0) dim_ = static_cast<int>(p.size());
      if (static_cast<int>(p.size()) != dim_)
        throw DimensionError("PrototypeBank: prototype dim mismatch");
      const double n = std::sqrt(squared_norm(p));
      if (n != 0.0 && std::fabs(n - 1.0) > 1e-9)
        throw StateError("PrototypeBank: prototype is neither unit norm nor degenerate");
    }
    labels_.append_task(static_cast<int>(tp.prototypes.size()));
    entries_.push_back(std::move(tp));
  }

  int num_tasks() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }

  std::size_t size() const {
    std::size_t n = 0;
    for (const TaskPrototypes& t : entries_) n += t.prototypes.size();
    return n;
  }

  const LabelSpace& labels() const { return labels_; }
  const TaskPrototypes& task(int i) const {
    if (i < 0 || i >= num_tasks()) throw StateError("PrototypeBank: unknown task " + std::to_string(i));
    return entries_[static_cast<std::size_t>(i)];
  }

  // Scores against every prototype accumulated so far, bank order.
  std::pair<GlobalLabel, ScoreVector> predict_class_il(
      const EmbeddingVector& s, SimilarityKind sim = SimilarityKind::Cosine) const {
    if (empty()) throw StateError("PrototypeBank: empty bank");
    ScoreVector sv;
    sv.candidates = labels_.all_labels();
    sv.scores.reserve(sv.candidates.size());
    for (const TaskPrototypes& t : entries_)
      for (const EmbeddingVector& p : t.prototypes) sv.scores.push_back(score(s, p, sim));
    return {argmax_tiebreak(sv), std::move(sv)};
  }

  // Scores restricted to one task's prototypes.
  std::pair<GlobalLabel, ScoreVector> predict_task_il(
      const EmbeddingVector& s, int task_index,
      SimilarityKind sim = SimilarityKind::Cosine) const {
    if (task_index < 0 || task_index >= num_tasks())
      throw StateError("PrototypeBank: unknown task " + std::to_string(task_index));
    const TaskPrototypes& t = entries_[static_cast<std::size_t>(task_index)];
    ScoreVector sv;
    sv.candidates = labels_.task_labels(task_index);
    sv.scores.reserve(t.prototypes.size());
    for (const EmbeddingVector& p : t.prototypes) sv.scores.push_back(score(s, p, sim));
    return {argmax_tiebreak(sv), std::move(sv)};
  }

 private:
  static double score(const EmbeddingVector& s, const EmbeddingVector& p, SimilarityKind sim) {
    return sim == SimilarityKind::Cosine ? cosine_similarity(s, p) : dot(s, p);
  }

  std::vector<TaskPrototypes> entries_;
  LabelSpace labels_;
  int dim_ = -1;
};

// Scorer facade over (frozen aggregator, bank) for evaluate_row.
struct BankScorer {
  const PrototypeBank* bank;
  const FrozenAggregator* frozen;
  SimilarityKind sim = SimilarityKind::Cosine;

  ScoreVector score_all(const SlideBag& bag) const {
    return bank->predict_class_il(aggregate(bag, *frozen), sim).second;
  }
  ScoreKind kind() const {
    return sim == SimilarityKind::Cosine ? ScoreKind::Cosine : ScoreKind::Dot;
  }
};

struct ZeroSlideResult {
  AccuracyMatrix ci;
  AccuracyMatrix ti;
  std::vector<ConfidenceRecord> records;
};

// The full loop: per arriving task, extend the bank and evaluate every seen
// task's test split under both scenarios.
inline ZeroSlideResult run_zeroslide(const std::vector<TaskDataset>& sequence,
                                     const std::vector<TaskPrototypeSpec>& prototype_specs,
                                     const FrozenAggregator& frozen,
                                     SimilarityKind sim = SimilarityKind::Cosine) {
  if (sequence.empty()) throw DataError("run_zeroslide: empty task sequence");
  if (prototype_specs.size() < sequence.size())
    throw DataError("run_zeroslide: prototype specs cover " +
                    std::to_string(prototype_specs.size()) + " of " +
                    std::to_string(sequence.size()) + " tasks");

  PrototypeBank bank;
  ZeroSlideResult out;
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    TaskPrototypes tp = make_task_prototypes(prototype_specs[i]);
    if (static_cast<int>(tp.prototypes.size()) != sequence[i].spec.class_count)
      throw DataError("run_zeroslide: task " + std::to_string(i) + " has " +
                      std::to_string(sequence[i].spec.class_count) + " classes but " +
                      std::to_string(tp.prototypes.size()) + " prototypes");
    bank.extend(std::move(tp));

    BankScorer scorer{&bank, &frozen, sim};
    RowResult row = evaluate_row(scorer, std::span(sequence.data(), i + 1), static_cast<int>(i));
    out.ci.push_row(std::move(row.ci_row));
    out.ti.push_row(std::move(row.ti_row));
    out.records.insert(out.records.end(), row.records.begin(), row.records.end());
  }
  return out;
}

}  // namespace zsl
