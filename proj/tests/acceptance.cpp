// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code 0 only when all pass.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "zsl/experiment.hpp"
#include "zsl/report.hpp"

using namespace zsl;
namespace fs = std::filesystem;

namespace {

struct CheckResult {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return std::string(buf);
}

fs::path workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "zsl_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// ---------------------------------------------------------------------------
// Shared runs
// ---------------------------------------------------------------------------

// Interference run: 3 tasks whose class means are barely separated, all five
// methods, 20 seeds. Feeds criteria 1, 6 and 9.
RunPlan interference_plan() {
  RunPlan plan;
  plan.methods = {
      MethodConfig{.method = Method::Finetune},
      MethodConfig{.method = Method::Ewc, .lambda = 100.0},
      MethodConfig{.method = Method::Derpp, .buffer_capacity = 30},
      MethodConfig{.method = Method::Buro, .buffer_capacity = 30},
      MethodConfig{.method = Method::Zeroslide},
  };
  plan.seeds.clear();
  for (std::uint64_t s = 1; s <= 20; ++s) plan.seeds.push_back(s);
  plan.epochs = 10;
  plan.lr = 0.05;
  plan.workers = 4;
  plan.out_dir = (workdir() / "interference").string();

  SyntheticConfig& cfg = plan.synth;
  cfg.dim = 16;
  cfg.tasks.clear();
  for (int t = 0; t < 3; ++t) {
    TaskSpec spec;
    spec.task_index = t;
    spec.class_count = 2;
    spec.slides_per_class = 18;
    cfg.tasks.push_back(spec);
  }
  cfg.regions_per_slide = 4;
  cfg.patches_per_region = 4;
  cfg.class_separation = 0.1;  // relaxed on purpose: classes collide across tasks
  cfg.patch_noise_sigma = 0.2;
  cfg.prototype_noise_sigma = 0.8;  // prototype mismatch keeps raw cosines modest
  cfg.prototype_variants = 4;
  cfg.seed = 20240901;
  return plan;
}

const CsvTable& interference_results() {
  static const CsvTable table = [] {
    RunPlan plan = interference_plan();
    const RunStats stats = run_experiment(plan);
    if (stats.failed != 0) throw Error("interference run had failed triples");
    return read_csv((fs::path(plan.out_dir) / "results.csv").string());
  }();
  return table;
}

const CsvTable& interference_confidence() {
  interference_results();  // ensure the run happened
  static const CsvTable table =
      read_csv((fs::path(interference_plan().out_dir) / "confidence.csv").string());
  return table;
}

// Default-shape zero-shot run (six tasks, 2-3 classes each). Feeds criteria
// 1 and 2.
struct ZeroSlideRun {
  ZeroSlideResult result;
  MetricsReport metrics;
};

const ZeroSlideRun& default_zeroslide_run() {
  static const ZeroSlideRun run = [] {
    SyntheticConfig cfg;  // desk-scale defaults: 6 tasks, dim 64, 40 slides/class
    cfg.tasks = default_task_shape();
    cfg.patch_noise_sigma = 0.5;       // noisy enough that accuracy actually drifts
    cfg.prototype_noise_sigma = 1.0;
    cfg.seed = 424242;
    auto seq = generate_task_sequence(cfg);
    auto protos = synthesize_prototypes(seq, cfg);
    ZeroSlideRun r{run_zeroslide(seq.tasks, protos, FrozenAggregator{}), {}};
    r.metrics = compute_metrics(r.result.ci, r.result.ti);
    return r;
  }();
  return run;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

// 1: MASKED ACC >= ACC, exactly, on every run of every method.
CheckResult criterion_dominance() {
  long checked = 0, violations = 0;
  const CsvTable& results = interference_results();
  const int c_acc = results.column("acc");
  const int c_masked = results.column("masked_acc");
  for (const auto& row : results.rows) {
    ++checked;
    if (std::stod(row[c_masked]) < std::stod(row[c_acc])) ++violations;
  }

  const auto& zs = default_zeroslide_run();
  ++checked;
  if (zs.metrics.masked_acc < zs.metrics.acc) ++violations;

  return {violations == 0, "MASKED ACC >= ACC held exactly on " + std::to_string(checked) +
                               "/" + std::to_string(checked) + " runs (" +
                               std::to_string(violations) + " violations)"};
}

// 2: zero-shot stability: constant TASK-IL columns (exact), TASK-IL
// forgetting 0, and Forgetting == -BWT to 1e-12 under the no-positive-
// transfer condition (which the growing bank forces).
CheckResult criterion_zeroslide_stability() {
  auto check = [](const ZeroSlideResult& result, std::string& why) {
    const int n = result.ti.n_tasks();
    for (int i = 0; i < n; ++i)
      for (int k = i; k < n; ++k)
        if (result.ti.at(k, i) != result.ti.at(i, i)) {
          why = "TASK-IL column " + std::to_string(i) + " not constant";
          return false;
        }
    const MetricsReport ti_rep = compute_metrics(result.ti, result.ti);
    if (ti_rep.forgetting.value_or(0.0) != 0.0) {
      why = "TASK-IL forgetting nonzero";
      return false;
    }
    bool non_increasing = true;
    for (int i = 0; i < n; ++i)
      for (int k = i; k < n; ++k)
        if (result.ci.at(k, i) > result.ci.at(i, i)) non_increasing = false;
    if (!non_increasing) {
      why = "CLASS-IL accuracy increased after a task was learned";
      return false;
    }
    const MetricsReport rep = compute_metrics(result.ci, result.ti);
    if (std::fabs(rep.forgetting.value() + rep.bwt.value()) > 1e-12) {
      why = "Forgetting != -BWT (gap " + fmt(rep.forgetting.value() + rep.bwt.value(), 15) + ")";
      return false;
    }
    return true;
  };

  std::string why;
  const auto& zs = default_zeroslide_run();
  if (!check(zs.result, why)) return {false, why};
  const MetricsReport rep = zs.metrics;

  // the same identity must show up in the interference run's emitted rows
  const CsvTable& results = interference_results();
  const int c_method = results.column("method");
  const int c_bwt = results.column("bwt");
  const int c_forget = results.column("forgetting");
  for (const auto& row : results.rows) {
    if (row[c_method] != "zeroslide") continue;
    if (std::fabs(std::stod(row[c_forget]) + std::stod(row[c_bwt])) > 1e-12)
      return {false, "emitted zeroslide row violates Forgetting == -BWT"};
  }
  return {true, "TI columns constant, TI forgetting 0, Forgetting == -BWT (" +
                    fmt(rep.forgetting.value(), 6) + " vs " + fmt(-rep.bwt.value(), 6) +
                    ") on the six-task default sequence and all emitted rows"};
}

// 3: metrics oracle on the hand matrix, against an independent brute force.
CheckResult criterion_metrics_oracle() {
  AccuracyMatrix ci, ti;
  for (auto row : {std::vector<double>{0.9}, std::vector<double>{0.8, 0.85},
                   std::vector<double>{0.7, 0.8, 0.9}}) {
    ci.push_row(row);
    ti.push_row(row);
  }
  const MetricsReport rep = compute_metrics(ci, ti);

  // brute force straight from the metric definitions
  const std::vector<std::vector<double>> a{{0.9}, {0.8, 0.85}, {0.7, 0.8, 0.9}};
  const int n = 3;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[n - 1][i] / n;
  double macc = 0.0;
  for (int k = 0; k < n; ++k) {
    double m = 0.0;
    for (int i = 0; i <= k; ++i) m += a[k][i] / (k + 1);
    macc += m / n;
  }
  double bwt = 0.0, forgetting = 0.0;
  for (int i = 0; i < n - 1; ++i) {
    bwt += (a[n - 1][i] - a[i][i]) / (n - 1);
    double best = 0.0;
    for (int k = i; k < n; ++k) best = std::max(best, a[k][i]);
    forgetting += (best - a[n - 1][i]) / (n - 1);
  }

  const bool pass = std::fabs(rep.acc - 0.8) <= 1e-9 && std::fabs(rep.macc - macc) <= 1e-9 &&
                    std::fabs(macc - 0.841666666666667) <= 1e-9 &&
                    std::fabs(rep.bwt.value() - (-0.125)) <= 1e-9 &&
                    std::fabs(rep.forgetting.value() - 0.125) <= 1e-9 &&
                    std::fabs(rep.acc - acc) <= 1e-12 &&
                    std::fabs(rep.bwt.value() - bwt) <= 1e-12 &&
                    std::fabs(rep.forgetting.value() - forgetting) <= 1e-12;
  return {pass, "ACC " + fmt(rep.acc) + ", mACC " + fmt(rep.macc, 6) + ", BWT " +
                    fmt(rep.bwt.value()) + ", Forgetting " + fmt(rep.forgetting.value()) +
                    " vs brute force of the definitions"};
}

// 4: analytic gradients of the fine-tune, EWC-penalized and DER++ composite
// losses vs central differences (h = 1e-5) on 100 random small instances.
CheckResult criterion_gradient_fidelity() {
  std::mt19937_64 rng(777);
  std::normal_distribution<double> gauss(0.0, 0.5);
  double worst = 0.0;
  int instances = 0;

  auto fd_gradients = [](const AggregatorParams& params, auto&& loss) {
    AggregatorParams work = params;
    Gradients g = zero_gradients(params);
    auto arrays = param_arrays(work);
    auto grads = grad_arrays(g);
    const double h = 1e-5;
    for (std::size_t a = 0; a < arrays.size(); ++a)
      for (std::size_t i = 0; i < arrays[a]->size(); ++i) {
        const double saved = (*arrays[a])[i];
        (*arrays[a])[i] = saved + h;
        const double up = loss(work);
        (*arrays[a])[i] = saved - h;
        const double down = loss(work);
        (*arrays[a])[i] = saved;
        (*grads[a])[i] = (up - down) / (2.0 * h);
      }
    return g;
  };
  auto rel_err = [](const Gradients& x, const Gradients& y) {
    auto xs = grad_arrays(x), ys = grad_arrays(y);
    double worst = 0.0;
    for (std::size_t a = 0; a < xs.size(); ++a)
      for (std::size_t i = 0; i < xs[a]->size(); ++i) {
        const double denom = std::max({std::fabs((*xs[a])[i]), std::fabs((*ys[a])[i]), 1e-4});
        worst = std::max(worst, std::fabs((*xs[a])[i] - (*ys[a])[i]) / denom);
      }
    return worst;
  };
  auto random_bag = [&](int dim, int regions, GlobalLabel label) {
    SlideBag bag;
    bag.slide_id = "acc" + std::to_string(instances);
    bag.label = label;
    bag.regions.resize(static_cast<std::size_t>(regions));
    for (Region& r : bag.regions) {
      r.region_embedding.resize(static_cast<std::size_t>(dim));
      for (double& x : r.region_embedding) x = 2.0 * gauss(rng);
      r.patches = {r.region_embedding};
    }
    return bag;
  };

  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 2 + trial % 7;       // <= 8
    const int regions = 1 + trial % 4;   // <= 4
    const int classes = 2 + trial % 2;
    const auto kind = trial % 2 ? AggregatorKind::GatedAttention : AggregatorKind::Mean;

    ModelState model;
    model.params = make_params(kind, dim);
    model.labels.append_task(classes);
    grow_head(model.params, classes);
    for (auto* arr : param_arrays(model.params))
      for (double& x : *arr) x = gauss(rng);
    const GlobalLabel y = model.labels.label(0, trial % classes);
    const SlideBag bag = random_bag(dim, regions, y);
    ++instances;

    // fine-tune loss
    {
      const Gradients analytic = backward(bag, y, model);
      const Gradients fd = fd_gradients(model.params, [&](const AggregatorParams& p) {
        ModelState probe{p, model.labels};
        return cross_entropy(forward_logits(aggregate(bag, p), probe), y);
      });
      worst = std::max(worst, rel_err(analytic, fd));
    }

    // EWC-penalized composite
    {
      EwcState state;
      state.anchor = model.params;
      for (auto* arr : param_arrays(state.anchor))
        for (double& x : *arr) x += 0.3 * gauss(rng);
      state.fisher = zero_gradients(model.params);
      for (auto* arr : grad_arrays(state.fisher))
        for (double& x : *arr) x = std::fabs(gauss(rng));
      state.lambda = 3.0;
      state.has_anchor = true;

      Gradients analytic = backward(bag, y, model);
      add_scaled(analytic, ewc_penalty_gradient(model.params, state), 1.0);
      const Gradients fd = fd_gradients(model.params, [&](const AggregatorParams& p) {
        ModelState probe{p, model.labels};
        return cross_entropy(forward_logits(aggregate(bag, p), probe), y) +
               ewc_penalty(p, state);
      });
      worst = std::max(worst, rel_err(analytic, fd));
    }

    // DER++ composite
    {
      ReservoirBuffer<ReplayItemDer> buffer;
      buffer.capacity = 2;
      std::mt19937_64 brng(900 + trial);
      for (int i = 0; i < 2; ++i) {
        const GlobalLabel lab = model.labels.label(0, i % classes);
        SlideBag stored = random_bag(dim, regions, lab);
        std::vector<double> logits(static_cast<std::size_t>(classes));
        for (double& z : logits) z = gauss(rng);
        reservoir_insert(buffer, ReplayItemDer{std::move(stored), lab, logits}, brng);
      }
      std::mt19937_64 srng(1234 + trial);
      const DerppLossResult analytic = derpp_loss(model, bag, buffer, 0.6, 0.8, srng);
      const Gradients fd = fd_gradients(model.params, [&](const AggregatorParams& p) {
        ModelState probe{p, model.labels};
        std::mt19937_64 replayed(1234 + trial);  // identical samples per evaluation
        return derpp_loss(probe, bag, buffer, 0.6, 0.8, replayed).loss;
      });
      worst = std::max(worst, rel_err(analytic.grads, fd));
    }
  }
  return {worst <= 1e-4, "worst relative gradient error " + fmt(worst, 8) +
                             " over 100 instances x 3 losses (tolerance 1e-4)"};
}

// 5: anchored-parameter drift non-increasing across lambda in
// {0, 1, 10, 100, 1000} at a fixed seed.
CheckResult criterion_ewc_monotone_drift() {
  SyntheticConfig cfg;
  cfg.dim = 8;
  cfg.tasks.clear();
  for (int t = 0; t < 2; ++t) {
    TaskSpec spec;
    spec.task_index = t;
    spec.class_count = 2;
    spec.slides_per_class = 10;
    cfg.tasks.push_back(spec);
  }
  cfg.regions_per_slide = 3;
  cfg.patches_per_region = 4;
  cfg.class_separation = 0.4;
  cfg.patch_noise_sigma = 0.2;
  cfg.seed = 1001;
  auto seq = generate_task_sequence(cfg);

  std::vector<double> drifts;
  for (double lambda : {0.0, 1.0, 10.0, 100.0, 1000.0}) {
    ModelState model;
    model.params = make_params(AggregatorKind::GatedAttention, cfg.dim);
    register_task(model, 2);
    EwcState state;
    state.lambda = lambda;
    state = train_ewc(model, seq.tasks[0].train, state, {.epochs = 10, .lr = 0.01, .seed = 43});
    const AggregatorParams anchor = state.anchor;
    register_task(model, 2);
    train_ewc(model, seq.tasks[1].train, state, {.epochs = 10, .lr = 0.01, .seed = 44});

    double d2 = 0.0;
    auto cur = param_arrays(model.params);
    auto anc = param_arrays(anchor);
    for (std::size_t a = 0; a < cur.size(); ++a)
      for (std::size_t i = 0; i < anc[a]->size(); ++i) {
        const double d = (*cur[a])[i] - (*anc[a])[i];
        d2 += d * d;
      }
    drifts.push_back(std::sqrt(d2));
  }

  bool monotone = true;
  std::string series;
  for (std::size_t i = 0; i < drifts.size(); ++i) {
    if (i && drifts[i] > drifts[i - 1] + 1e-12) monotone = false;
    series += (i ? ", " : "") + fmt(drifts[i], 5);
  }
  return {monotone, "drift over lambda {0,1,10,100,1000}: " + series};
}

// 6: replay beats no-rehearsal on forgetting, paired over 20 seeds.
CheckResult criterion_replay_reduces_forgetting() {
  const CsvTable& results = interference_results();
  const int c_method = results.column("method");
  const int c_seed = results.column("seed");
  const int c_forget = results.column("forgetting");

  std::map<std::string, std::map<std::string, double>> forgetting;  // method -> seed -> value
  for (const auto& row : results.rows)
    forgetting[row[c_method]][row[c_seed]] = std::stod(row[c_forget]);

  auto compare = [&](const std::string& method, double& mean_diff, int& wins, int& total) {
    mean_diff = 0.0;
    wins = 0;
    total = 0;
    for (const auto& [seed, ft_value] : forgetting["finetune"]) {
      const double rv = forgetting[method].at(seed);
      mean_diff += ft_value - rv;
      if (ft_value - rv > 0.0) ++wins;
      ++total;
    }
    mean_diff /= total;
  };

  double derpp_gain = 0.0, buro_gain = 0.0;
  int derpp_wins = 0, buro_wins = 0, total = 0;
  compare("derpp", derpp_gain, derpp_wins, total);
  compare("buro", buro_gain, buro_wins, total);

  const bool pass = total == 20 && derpp_gain > 0.0 && buro_gain > 0.0 &&
                    derpp_wins >= 16 && buro_wins >= 16;  // >= 80% of paired seeds
  return {pass, "mean forgetting reduction derpp " + fmt(derpp_gain) + " (" +
                    std::to_string(derpp_wins) + "/20 seeds), buro " + fmt(buro_gain) + " (" +
                    std::to_string(buro_wins) + "/20 seeds)"};
}

// 7: training-free soundness on clean prototypes, with the nearest-class-mean
// oracle bound computed on the same data.
CheckResult criterion_zero_shot_soundness() {
  SyntheticConfig cfg;
  cfg.dim = 16;
  cfg.tasks = default_task_shape();
  cfg.class_separation = 0.5;
  cfg.patch_noise_sigma = 0.05;
  cfg.prototype_noise_sigma = 0.0;
  cfg.seed = 31415;
  auto seq = generate_task_sequence(cfg);
  auto protos = synthesize_prototypes(seq, cfg);
  const auto result = run_zeroslide(seq.tasks, protos, FrozenAggregator{});

  // oracle: cosine to the true class means
  long oracle_correct = 0, oracle_total = 0;
  for (const TaskDataset& task : seq.tasks)
    for (const SlideBag& bag : task.test) {
      const EmbeddingVector s = aggregate(bag, FrozenAggregator{});
      double best = -2.0;
      int best_gid = -1, gid = 0;
      for (const auto& task_means : seq.class_means)
        for (const EmbeddingVector& mean : task_means) {
          const double c = cosine_similarity(s, mean);
          if (c > best) {
            best = c;
            best_gid = gid;
          }
          ++gid;
        }
      ++oracle_total;
      if (best_gid == bag.label.global_id) ++oracle_correct;
    }
  const double oracle_acc = static_cast<double>(oracle_correct) / oracle_total;

  const int n = result.ci.n_tasks();
  double min_final = 1.0;
  for (int i = 0; i < n; ++i) min_final = std::min(min_final, result.ci.at(n - 1, i));
  const bool pass = min_final >= 0.99 && oracle_acc >= 0.99;
  return {pass, "final CLASS-IL accuracy >= " + fmt(min_final) +
                    " on all six tasks (nearest-class-mean oracle " + fmt(oracle_acc) + ")"};
}

// 8: reservoir retention uniformity, chi-square at significance 0.001, and
// the capacity invariant across all trials.
CheckResult criterion_buffer_statistics() {
  const int stream = 1000, cap = 10, trials = 5000;
  std::vector<long> retained(stream, 0);
  std::mt19937_64 rng(20250801);
  bool capacity_ok = true;
  for (int t = 0; t < trials; ++t) {
    ReservoirBuffer<int> buf;
    buf.capacity = cap;
    for (int i = 0; i < stream; ++i) {
      reservoir_insert(buf, i, rng);
      if (buf.items.size() > static_cast<std::size_t>(cap)) capacity_ok = false;
    }
    for (int kept : buf.items) retained[static_cast<std::size_t>(kept)]++;
  }

  const double expected = static_cast<double>(trials) * cap / stream;  // 50 per position
  double chi2 = 0.0;
  for (long r : retained) {
    const double diff = static_cast<double>(r) - expected;
    chi2 += diff * diff / expected;
  }
  // Wilson-Hilferty critical value for df=999 at the 0.001 significance level
  const double df = stream - 1;
  const double z = 3.090232306167814;  // standard normal quantile at 0.999
  const double wh = 1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df));
  const double critical = df * wh * wh * wh;

  const bool pass = capacity_ok && chi2 < critical;
  return {pass, "chi-square " + fmt(chi2, 1) + " < critical " + fmt(critical, 1) +
                    " (df 999, alpha 0.001), capacity invariant " +
                    (capacity_ok ? "held" : "VIOLATED")};
}

// 9: confidence-study structure: the zero-shot path's median true-label
// cosine sits below every trained method's median softmax probability on the
// just-trained task, with score kinds labeled.
CheckResult criterion_confidence_structure() {
  const CsvTable& confidence = interference_confidence();
  const int c_method = confidence.column("method");
  const int c_eval = confidence.column("eval_task");
  const int c_stage = confidence.column("train_stage");
  const int c_score = confidence.column("score");
  const int c_kind = confidence.column("score_kind");

  const int final_stage = 2, final_task = 2;
  std::map<std::string, std::vector<double>> scores;
  std::map<std::string, std::string> kinds;
  for (const auto& row : confidence.rows) {
    if (std::stoi(row[c_stage]) != final_stage || std::stoi(row[c_eval]) != final_task) continue;
    scores[row[c_method]].push_back(std::stod(row[c_score]));
    kinds[row[c_method]] = row[c_kind];
  }

  if (kinds["zeroslide"] != "cosine") return {false, "zeroslide scores not labeled cosine"};
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return quantile_inclusive(v, 0.5);
  };
  const double zs_median = median(scores["zeroslide"]);

  bool pass = true;
  std::string detail = "zeroslide median cosine " + fmt(zs_median) + " vs softmax medians";
  for (const std::string method : {"finetune", "ewc", "derpp", "buro"}) {
    if (kinds[method] != "softmax_prob") return {false, method + " scores not labeled softmax"};
    const double m = median(scores[method]);
    detail += " " + method + " " + fmt(m);
    if (!(zs_median < m)) pass = false;
  }
  return {pass, detail};
}

// 10: determinism and resume idempotence.
CheckResult criterion_determinism() {
  auto make_plan = [&](const std::string& out) {
    RunPlan plan;
    plan.methods = {MethodConfig{.method = Method::Finetune},
                    MethodConfig{.method = Method::Derpp, .buffer_capacity = 8},
                    MethodConfig{.method = Method::Zeroslide}};
    plan.seeds = {11, 12};
    plan.epochs = 3;
    plan.workers = 2;
    plan.out_dir = (workdir() / out).string();
    SyntheticConfig& cfg = plan.synth;
    cfg.dim = 8;
    cfg.tasks.clear();
    for (int t = 0; t < 3; ++t) {
      TaskSpec spec;
      spec.task_index = t;
      spec.class_count = 2;
      spec.slides_per_class = 6;
      cfg.tasks.push_back(spec);
    }
    cfg.regions_per_slide = 2;
    cfg.patches_per_region = 2;
    cfg.class_separation = 0.3;
    cfg.patch_noise_sigma = 0.15;
    cfg.seed = 5150;
    return plan;
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };

  RunPlan a = make_plan("det_a");
  RunPlan b = make_plan("det_b");
  if (run_experiment(a).failed || run_experiment(b).failed)
    return {false, "runs reported failed triples"};
  const std::string results_a = slurp(fs::path(a.out_dir) / "results.csv");
  if (results_a != slurp(fs::path(b.out_dir) / "results.csv"))
    return {false, "identical plans produced different results.csv bytes"};
  if (slurp(fs::path(a.out_dir) / "confidence.csv") !=
      slurp(fs::path(b.out_dir) / "confidence.csv"))
    return {false, "identical plans produced different confidence.csv bytes"};

  const std::string manifest_before = slurp(fs::path(a.out_dir) / "manifest.json");
  const RunStats resumed = run_experiment(a, /*resume=*/true);
  if (resumed.executed != 0)
    return {false, "--resume recomputed " + std::to_string(resumed.executed) + " triples"};
  if (slurp(fs::path(a.out_dir) / "manifest.json") != manifest_before)
    return {false, "--resume changed the manifest"};
  if (slurp(fs::path(a.out_dir) / "results.csv") != results_a)
    return {false, "--resume changed results.csv"};
  return {true, "byte-identical CSVs across runs; --resume executed 0 of 6 triples and changed "
                "no bytes"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    CheckResult (*run)();
  };
  const Criterion criteria[] = {
      {1, "dominance identity", criterion_dominance},
      {2, "zero-shot stability identity", criterion_zeroslide_stability},
      {3, "metrics oracle", criterion_metrics_oracle},
      {4, "gradient fidelity", criterion_gradient_fidelity},
      {5, "ewc monotone drift", criterion_ewc_monotone_drift},
      {6, "replay reduces forgetting", criterion_replay_reduces_forgetting},
      {7, "zero-shot soundness", criterion_zero_shot_soundness},
      {8, "buffer statistics", criterion_buffer_statistics},
      {9, "confidence-study structure", criterion_confidence_structure},
      {10, "determinism and idempotence", criterion_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    CheckResult r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    if (!r.pass) ++failures;
    std::printf("%s  criterion %2d (%s): %s\n", r.pass ? "PASS" : "FAIL", c.id, c.name,
                r.detail.c_str());
    std::fflush(stdout);
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
