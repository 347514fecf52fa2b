#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_util.hpp"
#include "zsl/zeroslide.hpp"

using namespace zsl;

namespace {

EmbeddingVector basis(int dim, int axis) {
  EmbeddingVector e(static_cast<std::size_t>(dim), 0.0);
  e[static_cast<std::size_t>(axis)] = 1.0;
  return e;
}

TaskPrototypes basis_task(int task_index, int dim, std::vector<int> axes) {
  TaskPrototypes tp;
  tp.task_index = task_index;
  for (int a : axes) tp.prototypes.push_back(basis(dim, a));
  return tp;
}

}  // namespace

TEST_CASE("extend grows the bank append-only", "[zeroslide]") {
  PrototypeBank bank;
  REQUIRE(bank.empty());
  bank.extend(basis_task(0, 4, {0, 1}));
  REQUIRE(bank.size() == 2);

  const auto first = bank.task(0);
  bank.extend(basis_task(1, 4, {2, 3}));
  REQUIRE(bank.size() == 4);
  REQUIRE(bank.task(0) == first);  // earlier prototypes untouched

  REQUIRE_THROWS_AS(bank.extend(basis_task(1, 4, {0})), StateError);  // duplicate task
  REQUIRE_THROWS_AS(bank.extend(basis_task(5, 4, {0})), StateError);  // gap
}

TEST_CASE("six tasks of sizes 2,3,2,2,2,2 accumulate 13 prototypes", "[zeroslide]") {
  PrototypeBank bank;
  const std::vector<int> sizes{2, 3, 2, 2, 2, 2};
  int axis = 0;
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    std::vector<int> axes;
    for (int c = 0; c < sizes[t]; ++c) axes.push_back(axis++);
    bank.extend(basis_task(static_cast<int>(t), 13, axes));
  }
  REQUIRE(bank.size() == 13);
  REQUIRE(bank.labels().total_classes() == 13);
}

TEST_CASE("non-unit prototypes are rejected, zero vectors tolerated", "[zeroslide]") {
  PrototypeBank bank;
  TaskPrototypes bad;
  bad.task_index = 0;
  bad.prototypes = {{0.5, 0.5}};
  REQUIRE_THROWS_AS(bank.extend(bad), StateError);

  TaskPrototypes degenerate;
  degenerate.task_index = 0;
  degenerate.prototypes = {basis(2, 0), {0.0, 0.0}};
  bank.extend(degenerate);
  auto [label, sv] = bank.predict_class_il({0.0, 1.0});
  REQUIRE(sv.scores[1] == 0.0);  // degenerate prototype scores 0
}

TEST_CASE("a singleton bank always predicts its class", "[zeroslide]") {
  PrototypeBank bank;
  bank.extend(basis_task(0, 3, {1}));
  for (auto s : {EmbeddingVector{1, 0, 0}, EmbeddingVector{0, -1, 0}, EmbeddingVector{0.3, 0.2, -0.9}}) {
    auto [label, sv] = bank.predict_class_il(s);
    REQUIRE(label.global_id == 0);
    REQUIRE(sv.scores.size() == 1);
  }
}

TEST_CASE("an exact prototype match wins with score one", "[zeroslide]") {
  PrototypeBank bank;
  bank.extend(basis_task(0, 4, {0, 1}));
  bank.extend(basis_task(1, 4, {2, 3}));
  auto [label, sv] = bank.predict_class_il(basis(4, 2));
  REQUIRE(label.global_id == 2);
  REQUIRE(sv.scores[2] == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(sv.scores[0] == 0.0);
}

TEST_CASE("class-il and task-il disagree exactly as constructed", "[zeroslide]") {
  // prototypes e1..e4 across two tasks; s leans 0.9 toward e1, 0.1 toward e3
  PrototypeBank bank;
  bank.extend(basis_task(0, 4, {0, 1}));
  bank.extend(basis_task(1, 4, {2, 3}));

  EmbeddingVector s{0.9, 0.0, 0.1, 0.0};
  s = l2_normalize(s).value;

  auto [ci_label, ci_scores] = bank.predict_class_il(s);
  REQUIRE(ci_label.global_id == 0);
  REQUIRE(ci_scores.scores.size() == 4);
  REQUIRE(ci_scores.scores[0] == Catch::Approx(0.9 / std::sqrt(0.82)).epsilon(1e-12));

  auto [ti_label, ti_scores] = bank.predict_task_il(s, 1);
  REQUIRE(ti_label.global_id == 2);  // e3 wins within task 1
  REQUIRE(ti_scores.scores.size() == 2);
  REQUIRE(ti_scores.scores[0] == Catch::Approx(0.1 / std::sqrt(0.82)).epsilon(1e-12));

  // single-class task always returns its class
  bank.extend(basis_task(2, 4, {1}));  // reuse axis; still unit norm
  auto [only, _] = bank.predict_task_il({0.0, -1.0, 0.0, 0.0}, 2);
  REQUIRE(only.task_index == 2);
  REQUIRE(only.local_class == 0);
}

TEST_CASE("a class-il winner from task t also wins task t's restricted vote", "[zeroslide]") {
  std::mt19937_64 rng(51);
  PrototypeBank bank;
  int axis = 0;
  for (int t = 0; t < 3; ++t) {
    std::vector<int> axes{axis, axis + 1};
    axis += 2;
    bank.extend(basis_task(t, 8, axes));
  }
  for (int trial = 0; trial < 200; ++trial) {
    auto s = zsl_test::random_embedding(rng, 8);
    auto [ci, _] = bank.predict_class_il(s);
    auto [ti, __] = bank.predict_task_il(s, ci.task_index);
    REQUIRE(ti == ci);
  }
}

TEST_CASE("dot scoring keeps predictions and rescales scores by the slide norm",
          "[zeroslide]") {
  std::mt19937_64 rng(61);
  PrototypeBank bank;
  bank.extend(basis_task(0, 6, {0, 1}));
  bank.extend(basis_task(1, 6, {2, 3, 4}));
  for (int trial = 0; trial < 100; ++trial) {
    auto s = zsl_test::random_embedding(rng, 6, 2.0);
    auto [cos_label, cos_scores] = bank.predict_class_il(s, SimilarityKind::Cosine);
    auto [dot_label, dot_scores] = bank.predict_class_il(s, SimilarityKind::Dot);
    REQUIRE(dot_label == cos_label);
    const double norm = std::sqrt(squared_norm(s));
    for (std::size_t i = 0; i < cos_scores.scores.size(); ++i)
      REQUIRE(dot_scores.scores[i] ==
              Catch::Approx(norm * cos_scores.scores[i]).margin(1e-9));
  }
}

TEST_CASE("errors on empty bank and unknown task", "[zeroslide]") {
  PrototypeBank bank;
  REQUIRE_THROWS_AS(bank.predict_class_il({1.0}), StateError);
  bank.extend(basis_task(0, 2, {0}));
  REQUIRE_THROWS_AS(bank.predict_task_il({1.0, 0.0}, 1), StateError);
}

TEST_CASE("run_zeroslide: task-restricted columns are constant and nothing trains",
          "[zeroslide]") {
  SyntheticConfig cfg;
  cfg.dim = 16;
  cfg.tasks.clear();
  for (int t = 0; t < 3; ++t) {
    TaskSpec spec;
    spec.task_index = t;
    spec.class_count = 2;
    spec.slides_per_class = 8;
    cfg.tasks.push_back(spec);
  }
  cfg.regions_per_slide = 3;
  cfg.patches_per_region = 4;
  cfg.class_separation = 0.4;
  cfg.patch_noise_sigma = 0.3;      // noisy enough that accuracy moves
  cfg.prototype_noise_sigma = 0.1;
  cfg.seed = 77;

  auto seq = generate_task_sequence(cfg);
  auto protos = synthesize_prototypes(seq, cfg);
  FrozenAggregator frozen;
  const FrozenAggregator before = frozen;

  auto result = run_zeroslide(seq.tasks, protos, frozen);
  REQUIRE(frozen == before);  // training-free

  const int n = result.ti.n_tasks();
  REQUIRE(n == 3);
  for (int i = 0; i < n; ++i)
    for (int k = i; k < n; ++k) REQUIRE(result.ti.at(k, i) == result.ti.at(i, i));

  // TASK-IL forgetting of the zero-shot path is exactly 0
  auto rep = compute_metrics(result.ti, result.ti);
  REQUIRE(rep.forgetting.value() == 0.0);

  // per-entry dominance
  for (int k = 0; k < n; ++k)
    for (int i = 0; i <= k; ++i) REQUIRE(result.ti.at(k, i) >= result.ci.at(k, i));

  // one confidence record per test slide per evaluation, cosine-kind
  std::size_t expected = 0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i <= k; ++i) expected += seq.tasks[i].test.size();
  REQUIRE(result.records.size() == expected);
  for (const auto& rec : result.records) {
    REQUIRE(rec.kind == ScoreKind::Cosine);
    REQUIRE(rec.score >= -1.0);
    REQUIRE(rec.score <= 1.0);
  }

  // no positive transfer is possible, so Forgetting == -BWT
  auto ci_rep = compute_metrics(result.ci, result.ti);
  bool non_increasing = true;
  for (int i = 0; i < n; ++i)
    for (int k = i; k < n; ++k)
      if (result.ci.at(k, i) > result.ci.at(i, i)) non_increasing = false;
  if (non_increasing)
    REQUIRE(ci_rep.forgetting.value() == Catch::Approx(-ci_rep.bwt.value()).margin(1e-12));
}

TEST_CASE("run_zeroslide on clean prototypes solves separated data", "[zeroslide]") {
  SyntheticConfig cfg;
  cfg.dim = 16;
  cfg.tasks.clear();
  for (int t = 0; t < 2; ++t) {
    TaskSpec spec;
    spec.task_index = t;
    spec.class_count = 2;
    spec.slides_per_class = 10;
    cfg.tasks.push_back(spec);
  }
  cfg.regions_per_slide = 4;
  cfg.patches_per_region = 8;
  cfg.class_separation = 0.5;
  cfg.patch_noise_sigma = 0.05;
  cfg.prototype_noise_sigma = 0.0;
  cfg.seed = 99;

  auto seq = generate_task_sequence(cfg);
  auto protos = synthesize_prototypes(seq, cfg);
  auto result = run_zeroslide(seq.tasks, protos, FrozenAggregator{});
  const int n = result.ci.n_tasks();
  for (int i = 0; i < n; ++i) REQUIRE(result.ci.at(n - 1, i) >= 0.99);
}

TEST_CASE("run_zeroslide validates prototype coverage", "[zeroslide]") {
  SyntheticConfig cfg;
  cfg.dim = 8;
  cfg.tasks.clear();
  TaskSpec spec;
  spec.class_count = 2;
  spec.slides_per_class = 4;
  cfg.tasks.push_back(spec);
  auto seq = generate_task_sequence(cfg);
  REQUIRE_THROWS_AS(run_zeroslide(seq.tasks, {}, FrozenAggregator{}), DataError);
}
