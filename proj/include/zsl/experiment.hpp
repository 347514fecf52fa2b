#pragma once
// Experiment orchestration: (method, fold, seed) triples over a task
// sequence, per-triple artifact fragments, deterministic aggregation into
// results/confidence CSVs, and a manifest that makes completed triples
// skippable on resume.
//
// Triples execute concurrently up to the configured worker count; each owns
// its model, buffers and RNG streams. Aggregation is single-threaded and
// ordered, so identical plans produce byte-identical CSVs.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "zsl/config.hpp"
#include "zsl/core.hpp"
#include "zsl/datagen.hpp"
#include "zsl/eval.hpp"
#include "zsl/trainers.hpp"
#include "zsl/zeroslide.hpp"

namespace zsl {

struct RunStats {
  int executed = 0;
  int skipped = 0;
  int failed = 0;
};

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw DataError("CSV has no column \"" + name + "\"");
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV: " + path);
  CsvTable table;
  std::string line;
  if (std::getline(in, line)) table.header = split_csv_line(line);
  while (std::getline(in, line))
    if (!line.empty()) table.rows.push_back(split_csv_line(line));
  return table;
}

inline std::string results_csv_header(int n_tasks) {
  std::string h = "method,buffer_capacity,seed,fold,acc,masked_acc,macc,bwt,forgetting";
  for (const char* prefix : {"a_ci", "a_ti"})
    for (int k = 0; k < n_tasks; ++k)
      for (int i = 0; i <= k; ++i)
        h += "," + std::string(prefix) + "_" + std::to_string(k) + "_" + std::to_string(i);
  return h;
}

inline constexpr const char* kConfidenceCsvHeader =
    "method,fold,seed,eval_task,train_stage,slide_id,true_global_class,score,score_kind";

// ---------------------------------------------------------------------------
// Triple execution
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t kSaltTask = 0x5441534bull;  // "TASK"

inline std::string triple_key(const MethodConfig& mc, int fold, std::uint64_t seed) {
  return std::string(to_string(mc.method)) + "_f" + std::to_string(fold) + "_s" +
         std::to_string(seed);
}

struct TripleProduct {
  AccuracyMatrix ci, ti;
  std::vector<ConfidenceRecord> records;
  bool has_model = false;
  AggregatorParams model;
  bool has_der_buffer = false;
  ReservoirBuffer<ReplayItemDer> der_buffer;
  bool has_region_buffer = false;
  ReservoirBuffer<RegionBufferItem> region_buffer;
};

inline int sequence_dim(const std::vector<TaskDataset>& tasks) {
  for (const TaskDataset& t : tasks)
    for (const auto* split : {&t.train, &t.val, &t.test})
      for (const SlideBag& s : *split)
        if (!s.regions.empty()) return static_cast<int>(s.regions.front().region_embedding.size());
  throw DataError("task sequence has no slides");
}

inline TripleProduct execute_triple(const RunPlan& plan, const MethodConfig& mc,
                                    const std::vector<TaskDataset>& tasks,
                                    const std::vector<TaskPrototypeSpec>& protos,
                                    std::uint64_t seed) {
  TripleProduct out;
  if (mc.method == Method::Zeroslide) {
    ZeroSlideResult zs = run_zeroslide(tasks, protos, FrozenAggregator{}, plan.similarity);
    out.ci = std::move(zs.ci);
    out.ti = std::move(zs.ti);
    out.records = std::move(zs.records);
    return out;
  }

  const int dim = sequence_dim(tasks);
  ModelState model;
  model.params = make_params(plan.aggregator, dim);

  EwcState ewc_state;
  ewc_state.lambda = mc.lambda;
  ReservoirBuffer<ReplayItemDer> der_buffer;
  der_buffer.capacity = mc.buffer_capacity;
  ReservoirBuffer<RegionBufferItem> region_buffer;
  region_buffer.capacity = mc.buffer_capacity;
  BuroOptions buro_opts;
  buro_opts.replay_weight = mc.replay_weight;
  if (!tasks[0].train.empty())
    buro_opts.regions_per_bag = static_cast<int>(tasks[0].train.front().regions.size());

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    register_task(model, tasks[i].spec.class_count);
    TrainOptions opts{plan.epochs, plan.lr, mix_seed(seed, kSaltTask + i)};
    switch (mc.method) {
      case Method::Finetune:
        train_finetune(model, tasks[i].train, opts);
        break;
      case Method::Ewc:
        ewc_state = train_ewc(model, tasks[i].train, ewc_state, opts);
        break;
      case Method::Derpp:
        train_derpp(model, tasks[i].train, der_buffer,
                    DerppOptions{mc.alpha, mc.beta, mc.replay_samples}, opts);
        break;
      case Method::Buro:
        train_buro(model, tasks[i].train, region_buffer, buro_opts, opts);
        break;
      case Method::Zeroslide:
        break;
    }
    ModelScorer scorer{&model};
    RowResult row = evaluate_row(scorer, std::span(tasks.data(), i + 1), static_cast<int>(i));
    out.ci.push_row(std::move(row.ci_row));
    out.ti.push_row(std::move(row.ti_row));
    out.records.insert(out.records.end(), row.records.begin(), row.records.end());
  }

  out.has_model = true;
  out.model = std::move(model.params);
  if (mc.method == Method::Derpp) {
    out.has_der_buffer = true;
    out.der_buffer = std::move(der_buffer);
  }
  if (mc.method == Method::Buro) {
    out.has_region_buffer = true;
    out.region_buffer = std::move(region_buffer);
  }
  return out;
}

inline std::string results_row(const MethodConfig& mc, int fold, std::uint64_t seed,
                               const TripleProduct& product) {
  const MetricsReport rep = compute_metrics(product.ci, product.ti);
  std::string row = std::string(to_string(mc.method)) + "," +
                    std::to_string(mc.uses_buffer() ? mc.buffer_capacity : 0) + "," +
                    std::to_string(seed) + "," + std::to_string(fold) + "," + fmt_g17(rep.acc) +
                    "," + fmt_g17(rep.masked_acc) + "," + fmt_g17(rep.macc) + "," +
                    (rep.bwt ? fmt_g17(*rep.bwt) : "") + "," +
                    (rep.forgetting ? fmt_g17(*rep.forgetting) : "");
  for (const AccuracyMatrix* m : {&product.ci, &product.ti})
    for (int k = 0; k < m->n_tasks(); ++k)
      for (int i = 0; i <= k; ++i) row += "," + fmt_g17(m->at(k, i));
  return row;
}

inline std::string confidence_rows(const MethodConfig& mc, int fold, std::uint64_t seed,
                                   const TripleProduct& product) {
  std::string out;
  const std::string prefix = std::string(to_string(mc.method)) + "," + std::to_string(fold) +
                             "," + std::to_string(seed) + ",";
  for (const ConfidenceRecord& r : product.records)
    out += prefix + std::to_string(r.eval_task) + "," + std::to_string(r.train_stage) + "," +
           r.slide_id + "," + std::to_string(r.true_label.global_id) + "," + fmt_g17(r.score) +
           "," + to_string(r.kind) + "\n";
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

inline RunStats run_experiment(const RunPlan& plan, bool resume = false) {
  namespace fs = std::filesystem;
  const fs::path out(plan.out_dir);
  fs::create_directories(out / "triples");

  // Source data, shared read-only by every triple.
  std::vector<TaskDataset> base_tasks;
  std::vector<TaskPrototypeSpec> protos;
  if (plan.data_source == "synthetic") {
    SyntheticSequence seq = generate_task_sequence(plan.synth);
    if (plan.has_method(Method::Zeroslide) && plan.prototype_source == "synthetic")
      protos = synthesize_prototypes(seq, plan.synth);
    base_tasks = std::move(seq.tasks);
  } else {
    base_tasks = load_embedding_file(plan.embedding_file);
  }
  if (plan.has_method(Method::Zeroslide) && plan.prototype_source == "file")
    protos = load_prototype_file(plan.prototype_file);

  const int n_tasks = static_cast<int>(base_tasks.size());

  std::vector<std::vector<TaskDataset>> folds;
  if (plan.n_folds == 1) {
    folds.push_back(base_tasks);
  } else {
    folds.resize(static_cast<std::size_t>(plan.n_folds));
    for (const TaskDataset& task : base_tasks) {
      auto task_folds = split_folds(task, plan.n_folds, plan.synth.seed);
      for (int f = 0; f < plan.n_folds; ++f)
        folds[static_cast<std::size_t>(f)].push_back(std::move(task_folds[static_cast<std::size_t>(f)]));
    }
  }

  struct Triple {
    const MethodConfig* mc;
    int fold;
    std::uint64_t seed;
    std::string key;
  };
  std::vector<Triple> triples;
  for (const MethodConfig& mc : plan.methods)
    for (int f = 0; f < plan.n_folds; ++f)
      for (std::uint64_t seed : plan.seeds)
        triples.push_back({&mc, f, seed, detail::triple_key(mc, f, seed)});

  const std::string config_text = normalized_config(plan);

  // Resume bookkeeping: a triple is complete when the old manifest says ok,
  // covers the same config, and every fragment still matches its hash.
  std::map<std::string, std::map<std::string, std::string>> reusable;
  if (resume && fs::exists(out / "manifest.json")) {
    try {
      std::ifstream in(out / "manifest.json");
      nlohmann::json manifest = nlohmann::json::parse(in);
      if (manifest.value("config", "") == config_text && manifest.contains("triples")) {
        for (auto& [key, entry] : manifest["triples"].items()) {
          if (entry.value("status", "") != "ok" || !entry.contains("files")) continue;
          std::map<std::string, std::string> files;
          bool intact = true;
          for (auto& [rel, hash] : entry["files"].items()) {
            const fs::path p = out / rel;
            if (!fs::exists(p) || hash_file_hex(p.string()) != hash.get<std::string>()) {
              intact = false;
              break;
            }
            files[rel] = hash.get<std::string>();
          }
          if (intact) reusable[key] = std::move(files);
        }
      }
    } catch (const std::exception&) {
      // unreadable manifest: recompute everything
      reusable.clear();
    }
  }

  struct Outcome {
    bool ok = false;
    bool skipped = false;
    std::string error;
    std::map<std::string, std::string> files;  // relative path -> content hash
  };
  std::vector<Outcome> outcomes(triples.size());

  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = cursor.fetch_add(1);
      if (idx >= triples.size()) return;
      const Triple& t = triples[idx];
      Outcome& o = outcomes[idx];
      if (auto it = reusable.find(t.key); it != reusable.end()) {
        o.ok = true;
        o.skipped = true;
        o.files = it->second;
        continue;
      }
      try {
        const auto& tasks = folds[static_cast<std::size_t>(t.fold)];
        detail::TripleProduct product =
            detail::execute_triple(plan, *t.mc, tasks, protos, t.seed);

        const std::string base = "triples/" + t.key;
        detail::write_text_file(out / (base + ".metrics.csv"),
                                detail::results_row(*t.mc, t.fold, t.seed, product) + "\n");
        detail::write_text_file(out / (base + ".confidence.csv"),
                                detail::confidence_rows(*t.mc, t.fold, t.seed, product));
        o.files[base + ".metrics.csv"] = hash_file_hex((out / (base + ".metrics.csv")).string());
        o.files[base + ".confidence.csv"] =
            hash_file_hex((out / (base + ".confidence.csv")).string());
        if (product.has_model) {
          save_checkpoint(product.model, (out / (base + ".model.zslm")).string());
          o.files[base + ".model.zslm"] = hash_file_hex((out / (base + ".model.zslm")).string());
        }
        if (product.has_der_buffer) {
          save_buffer_snapshot(product.der_buffer, (out / (base + ".buffer.zslr")).string());
          o.files[base + ".buffer.zslr"] = hash_file_hex((out / (base + ".buffer.zslr")).string());
        }
        if (product.has_region_buffer) {
          save_buffer_snapshot(product.region_buffer, (out / (base + ".buffer.zslr")).string());
          o.files[base + ".buffer.zslr"] = hash_file_hex((out / (base + ".buffer.zslr")).string());
        }
        o.ok = true;
      } catch (const std::exception& e) {
        o.ok = false;
        o.error = e.what();
      }
    }
  };

  const int worker_count =
      std::max(1, std::min<int>(plan.workers, static_cast<int>(triples.size())));
  if (worker_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(worker_count));
    for (int w = 0; w < worker_count; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  // Deterministic aggregation from fragments, in triple order.
  std::string results = results_csv_header(n_tasks) + "\n";
  std::string confidence = std::string(kConfidenceCsvHeader) + "\n";
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (!outcomes[i].ok) continue;
    const std::string base = "triples/" + triples[i].key;
    std::ifstream metrics(out / (base + ".metrics.csv"));
    std::ifstream conf(out / (base + ".confidence.csv"));
    if (!metrics || !conf) throw DataError("missing fragment for triple " + triples[i].key);
    std::stringstream m, c;
    m << metrics.rdbuf();
    c << conf.rdbuf();
    results += m.str();
    confidence += c.str();
  }
  detail::write_text_file(out / "results.csv", results);
  detail::write_text_file(out / "confidence.csv", confidence);
  detail::write_text_file(out / "plan.ini", config_text);

  nlohmann::json manifest;
  manifest["config"] = config_text;
  manifest["task_count"] = n_tasks;
  manifest["format_versions"] = {{"zslb", kEmbeddingFormatVersion},
                                 {"zslp", kPrototypeFormatVersion},
                                 {"zslm", kCheckpointFormatVersion},
                                 {"zslr", kBufferFormatVersion},
                                 {"results_csv", 1}};
  RunStats stats;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    nlohmann::json entry;
    if (outcomes[i].ok) {
      entry["status"] = "ok";
      nlohmann::json files;
      for (const auto& [rel, hash] : outcomes[i].files) files[rel] = hash;
      entry["files"] = files;
      if (outcomes[i].skipped)
        ++stats.skipped;
      else
        ++stats.executed;
    } else {
      entry["status"] = "failed";
      entry["error"] = outcomes[i].error;
      ++stats.failed;
    }
    manifest["triples"][triples[i].key] = entry;
  }
  manifest["files"] = {{"results.csv", hash_file_hex((out / "results.csv").string())},
                       {"confidence.csv", hash_file_hex((out / "confidence.csv").string())},
                       {"plan.ini", hash_file_hex((out / "plan.ini").string())}};
  detail::write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
  return stats;
}

}  // namespace zsl
