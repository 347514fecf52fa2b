#pragma once
// Synthetic multi-task bag datasets: class means on the unit sphere with a
// pairwise-cosine cap, patch clouds around them, fold splitting, and the
// ZSLB/ZSLP binary formats.
//
// Everything generated is quantized to f32 at creation time, so the f32 file
// formats round-trip bit-exactly. Generation is single-threaded; the RNG
// draw order is part of the determinism contract.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "zsl/binio.hpp"
#include "zsl/core.hpp"

namespace zsl {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct TaskSpec {
  int task_index = 0;
  int class_count = 2;
  int slides_per_class = 40;
  std::vector<std::string> class_names;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct Region {
  EmbeddingVector region_embedding;
  std::vector<EmbeddingVector> patches;

  friend bool operator==(const Region&, const Region&) = default;
};

struct SlideBag {
  std::string slide_id;
  GlobalLabel label;
  std::vector<Region> regions;

  friend bool operator==(const SlideBag&, const SlideBag&) = default;
};

struct TaskDataset {
  TaskSpec spec;
  std::vector<SlideBag> train;
  std::vector<SlideBag> val;
  std::vector<SlideBag> test;

  friend bool operator==(const TaskDataset&, const TaskDataset&) = default;
};

// Per-class variant embeddings standing in for encoded prompt phrasings.
struct TaskPrototypeSpec {
  int task_index = 0;
  std::vector<std::vector<EmbeddingVector>> variants;  // [local_class][variant]

  friend bool operator==(const TaskPrototypeSpec&, const TaskPrototypeSpec&) = default;
};

struct SyntheticConfig {
  int dim = 64;
  std::vector<TaskSpec> tasks;  // defaults to the six-task desk-scale shape
  int regions_per_slide = 8;
  int patches_per_region = 16;
  double class_separation = 0.5;  // pairwise cosine of class means capped at 1 - this
  double patch_noise_sigma = 0.05;
  double prototype_noise_sigma = 0.05;
  int prototype_variants = 4;
  std::uint64_t seed = 42;

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

struct SyntheticSequence {
  std::vector<TaskDataset> tasks;
  std::vector<std::vector<EmbeddingVector>> class_means;  // [task][local_class]
};

inline std::string canonical_class_name(int task, int local) {
  return "t" + std::to_string(task) + "_c" + std::to_string(local);
}

// Six tasks of 2-3 classes each; full sweep runs in minutes on one core.
inline std::vector<TaskSpec> default_task_shape(int slides_per_class = 40) {
  const std::vector<int> counts{2, 3, 2, 2, 2, 2};
  std::vector<TaskSpec> tasks;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    TaskSpec t;
    t.task_index = static_cast<int>(i);
    t.class_count = counts[i];
    t.slides_per_class = slides_per_class;
    for (int c = 0; c < t.class_count; ++c)
      t.class_names.push_back(canonical_class_name(t.task_index, c));
    tasks.push_back(std::move(t));
  }
  return tasks;
}

namespace detail {

inline constexpr std::uint64_t kSaltData = 0x5a534c4244415441ull;    // "ZSLBDATA"
inline constexpr std::uint64_t kSaltProto = 0x5a534c5050524f54ull;   // "ZSLPPROT"
inline constexpr std::uint64_t kSaltFolds = 0x5a534c46464f4c44ull;   // "ZSLFFOLD"
inline constexpr int kMeanPlacementAttempts = 50000;

inline void validate_config(const SyntheticConfig& cfg) {
  if (cfg.dim < 2) throw DomainError("synthetic config: dim must be >= 2");
  if (cfg.tasks.empty()) throw DomainError("synthetic config: no tasks");
  for (const TaskSpec& t : cfg.tasks) {
    if (t.class_count < 2) throw DomainError("synthetic config: class_count must be >= 2");
    if (t.slides_per_class < 4)
      throw DomainError("synthetic config: slides_per_class must be >= 4");
  }
  if (cfg.regions_per_slide < 1)
    throw DomainError("synthetic config: regions_per_slide must be >= 1");
  if (cfg.patches_per_region < 1)
    throw DomainError("synthetic config: patches_per_region must be >= 1");
  if (cfg.class_separation < 0.0 || cfg.class_separation > 2.0)
    throw DomainError("synthetic config: class_separation must be in [0, 2]");
  if (cfg.patch_noise_sigma < 0.0 || cfg.prototype_noise_sigma < 0.0)
    throw DomainError("synthetic config: noise sigmas must be >= 0");
  if (cfg.prototype_variants < 1)
    throw DomainError("synthetic config: prototype_variants must be >= 1");
}

// Unit-sphere mean placement, rejection-resampled until the pairwise cosine
// cap holds against every previously placed mean of every task.
inline std::vector<std::vector<EmbeddingVector>> place_class_means(const SyntheticConfig& cfg,
                                                                   std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double cap = 1.0 - cfg.class_separation;
  std::vector<std::vector<EmbeddingVector>> means(cfg.tasks.size());
  std::vector<const EmbeddingVector*> placed;
  for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
    means[t].reserve(cfg.tasks[t].class_count);
    for (int c = 0; c < cfg.tasks[t].class_count; ++c) {
      bool accepted = false;
      for (int attempt = 0; attempt < kMeanPlacementAttempts && !accepted; ++attempt) {
        EmbeddingVector v(cfg.dim);
        for (double& x : v) x = gauss(rng);
        Normalized n = l2_normalize(v);
        if (n.degenerate) continue;
        quantize_f32(n.value);
        accepted = true;
        for (const EmbeddingVector* m : placed) {
          if (cosine_similarity(n.value, *m) > cap) {
            accepted = false;
            break;
          }
        }
        if (accepted) means[t].push_back(std::move(n.value));
      }
      if (!accepted)
        throw InfeasibilityError("class separation " + std::to_string(cfg.class_separation) +
                                 " infeasible for the requested class count in dim " +
                                 std::to_string(cfg.dim));
      placed.push_back(&means[t].back());
    }
  }
  return means;
}

struct SplitSizes {
  int train, val, test;
};

inline SplitSizes split_sizes(int slides_per_class) {
  // 60/20/20 with at least one slide per split.
  const int test = std::max(1, static_cast<int>(std::lround(0.2 * slides_per_class)));
  const int val = std::max(1, static_cast<int>(std::lround(0.2 * slides_per_class)));
  return {slides_per_class - val - test, val, test};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

inline SyntheticSequence generate_task_sequence(const SyntheticConfig& cfg) {
  detail::validate_config(cfg);
  std::mt19937_64 rng(mix_seed(cfg.seed, detail::kSaltData));
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticSequence seq;
  seq.class_means = detail::place_class_means(cfg, rng);

  LabelSpace labels;
  for (const TaskSpec& t : cfg.tasks) labels.append_task(t.class_count);

  for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
    TaskDataset ds;
    ds.spec = cfg.tasks[t];
    ds.spec.task_index = static_cast<int>(t);
    if (ds.spec.class_names.empty())
      for (int c = 0; c < ds.spec.class_count; ++c)
        ds.spec.class_names.push_back(canonical_class_name(static_cast<int>(t), c));

    const auto sizes = detail::split_sizes(ds.spec.slides_per_class);
    for (int c = 0; c < ds.spec.class_count; ++c) {
      const EmbeddingVector& mean = seq.class_means[t][c];
      for (int s = 0; s < ds.spec.slides_per_class; ++s) {
        SlideBag bag;
        bag.slide_id = "t" + std::to_string(t) + "_c" + std::to_string(c) + "_s" +
                       std::to_string(s);
        bag.label = labels.label(static_cast<int>(t), c);
        bag.regions.resize(cfg.regions_per_slide);
        for (Region& region : bag.regions) {
          region.patches.resize(cfg.patches_per_region);
          EmbeddingVector sum(cfg.dim, 0.0);
          for (EmbeddingVector& patch : region.patches) {
            patch.resize(cfg.dim);
            for (int d = 0; d < cfg.dim; ++d) {
              patch[d] = quantize_f32(mean[d] + cfg.patch_noise_sigma * gauss(rng));
              sum[d] += patch[d];
            }
          }
          region.region_embedding.resize(cfg.dim);
          for (int d = 0; d < cfg.dim; ++d)
            region.region_embedding[d] = quantize_f32(sum[d] / cfg.patches_per_region);
        }
        if (s < sizes.train)
          ds.train.push_back(std::move(bag));
        else if (s < sizes.train + sizes.val)
          ds.val.push_back(std::move(bag));
        else
          ds.test.push_back(std::move(bag));
      }
    }
    seq.tasks.push_back(std::move(ds));
  }
  return seq;
}

// Class-stratified n-fold resplit of one task's full slide set. Fold f uses
// chunk f as test, chunk f+1 as val (when n_folds >= 3) and the rest as train;
// the test chunks partition the slide set.
inline std::vector<TaskDataset> split_folds(const TaskDataset& task, int n_folds,
                                            std::uint64_t seed) {
  if (n_folds < 2) throw DomainError("split_folds: n_folds must be >= 2");

  std::vector<const SlideBag*> all;
  for (const auto* split : {&task.train, &task.val, &task.test})
    for (const SlideBag& s : *split) all.push_back(&s);

  std::vector<std::vector<std::size_t>> by_class(task.spec.class_count);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int c = all[i]->label.local_class;
    if (c < 0 || c >= task.spec.class_count)
      throw DataError("split_folds: slide with out-of-range class");
    by_class[c].push_back(i);
  }

  std::mt19937_64 rng(mix_seed(mix_seed(seed, detail::kSaltFolds),
                               static_cast<std::uint64_t>(task.spec.task_index)));
  for (int c = 0; c < task.spec.class_count; ++c) {
    if (static_cast<int>(by_class[c].size()) < n_folds)
      throw DataError("split_folds: class " + std::to_string(c) + " has " +
                      std::to_string(by_class[c].size()) + " slides, fewer than " +
                      std::to_string(n_folds) + " folds");
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
  }

  std::vector<TaskDataset> folds(n_folds);
  for (int f = 0; f < n_folds; ++f) {
    folds[f].spec = task.spec;
    const int val_chunk = n_folds >= 3 ? (f + 1) % n_folds : -1;
    for (int c = 0; c < task.spec.class_count; ++c) {
      for (std::size_t j = 0; j < by_class[c].size(); ++j) {
        const int chunk = static_cast<int>(j % n_folds);
        const SlideBag& bag = *all[by_class[c][j]];
        if (chunk == f)
          folds[f].test.push_back(bag);
        else if (chunk == val_chunk)
          folds[f].val.push_back(bag);
        else
          folds[f].train.push_back(bag);
      }
    }
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Prototype synthesis (stand-in for a text encoder)
// ---------------------------------------------------------------------------

inline std::vector<TaskPrototypeSpec> synthesize_prototypes(const SyntheticSequence& seq,
                                                            const SyntheticConfig& cfg) {
  detail::validate_config(cfg);
  std::mt19937_64 rng(mix_seed(cfg.seed, detail::kSaltProto));
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<TaskPrototypeSpec> specs;
  specs.reserve(seq.class_means.size());
  for (std::size_t t = 0; t < seq.class_means.size(); ++t) {
    TaskPrototypeSpec spec;
    spec.task_index = static_cast<int>(t);
    spec.variants.resize(seq.class_means[t].size());
    for (std::size_t c = 0; c < seq.class_means[t].size(); ++c) {
      const EmbeddingVector& mean = seq.class_means[t][c];
      for (int v = 0; v < cfg.prototype_variants; ++v) {
        EmbeddingVector var(cfg.dim);
        for (int d = 0; d < cfg.dim; ++d)
          var[d] = mean[d] + cfg.prototype_noise_sigma * gauss(rng);
        Normalized n = l2_normalize(var);
        quantize_f32(n.value);
        spec.variants[c].push_back(std::move(n.value));
      }
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

// Per-class arithmetic mean across variants, then L2-normalized. A cancelled
// (zero) mean keeps the degenerate flag so callers can decide.
inline std::vector<Normalized> average_variants(const TaskPrototypeSpec& spec) {
  std::vector<Normalized> out;
  out.reserve(spec.variants.size());
  for (const auto& variants : spec.variants) {
    if (variants.empty()) throw DomainError("average_variants: class with no variants");
    EmbeddingVector mean(variants.front().size(), 0.0);
    for (const EmbeddingVector& v : variants) {
      if (v.size() != mean.size()) throw DimensionError("average_variants: variant dim mismatch");
      for (std::size_t d = 0; d < v.size(); ++d) mean[d] += v[d];
    }
    for (double& x : mean) x /= static_cast<double>(variants.size());
    out.push_back(l2_normalize(mean));
  }
  return out;
}

// ---------------------------------------------------------------------------
// ZSLB embedding file
// ---------------------------------------------------------------------------

namespace detail {

inline int dataset_dim(const std::vector<TaskDataset>& tasks) {
  for (const TaskDataset& t : tasks)
    for (const auto* split : {&t.train, &t.val, &t.test})
      for (const SlideBag& s : *split)
        if (!s.regions.empty()) return static_cast<int>(s.regions.front().region_embedding.size());
  throw DomainError("embedding file: dataset has no slides");
}

inline void write_slide_record(ByteWriter& w, const SlideBag& bag, int dim) {
  if (bag.regions.empty()) throw DomainError("slide " + bag.slide_id + " has no regions");
  const std::size_t ppr = bag.regions.front().patches.size();
  for (const Region& r : bag.regions) {
    if (static_cast<int>(r.region_embedding.size()) != dim)
      throw DimensionError("dim mismatch across records in slide " + bag.slide_id);
    if (r.patches.size() != ppr)
      throw DataError("inconsistent patch count within slide " + bag.slide_id);
    for (const EmbeddingVector& p : r.patches)
      if (static_cast<int>(p.size()) != dim)
        throw DimensionError("dim mismatch across records in slide " + bag.slide_id);
  }
  w.str(bag.slide_id);
  w.u32(static_cast<std::uint32_t>(bag.label.local_class));
  w.u32(static_cast<std::uint32_t>(bag.regions.size()));
  w.u32(static_cast<std::uint32_t>(ppr));
  for (const Region& r : bag.regions) {
    w.f32_vec(r.region_embedding);
    for (const EmbeddingVector& p : r.patches) w.f32_vec(p);
  }
}

inline SlideBag read_slide_record(ByteReader& r, int dim, int task_index, int class_count,
                                  int global_offset) {
  SlideBag bag;
  bag.slide_id = r.str();
  const auto local = static_cast<int>(r.u32());
  if (local < 0 || local >= class_count)
    throw FormatError("slide class out of range", r.offset(), r.slide_index());
  bag.label = {task_index, local, global_offset + local};
  const auto region_count = r.u32();
  if (region_count == 0) throw FormatError("slide with zero regions", r.offset(), r.slide_index());
  const auto ppr = r.u32();
  bag.regions.resize(region_count);
  for (Region& region : bag.regions) {
    region.region_embedding = r.f32_vec(static_cast<std::size_t>(dim));
    region.patches.resize(ppr);
    for (EmbeddingVector& p : region.patches) p = r.f32_vec(static_cast<std::size_t>(dim));
  }
  return bag;
}

}  // namespace detail

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
inline constexpr std::uint32_t kPrototypeFormatVersion = 1;

inline void write_embedding_file(const std::vector<TaskDataset>& tasks, const std::string& path) {
  const int dim = detail::dataset_dim(tasks);
  ByteWriter w(path);
  w.magic("ZSLB");
  w.u32(kEmbeddingFormatVersion);
  w.u32(static_cast<std::uint32_t>(dim));
  w.u32(static_cast<std::uint32_t>(tasks.size()));
  for (const TaskDataset& task : tasks) {
    w.u32(static_cast<std::uint32_t>(task.spec.class_count));
    for (const auto* split : {&task.train, &task.val, &task.test}) {
      w.u32(static_cast<std::uint32_t>(split->size()));
      for (const SlideBag& bag : *split) detail::write_slide_record(w, bag, dim);
    }
  }
}

inline std::vector<TaskDataset> load_embedding_file(const std::string& path) {
  ByteReader r(path);
  r.expect_magic("ZSLB");
  const std::size_t version_at = r.offset();
  const auto version = r.u32();
  if (version != kEmbeddingFormatVersion)
    throw FormatError("unsupported ZSLB version " + std::to_string(version), version_at);
  const std::size_t dim_at = r.offset();
  const auto dim = static_cast<int>(r.u32());
  if (dim <= 0) throw FormatError("dim must be positive", dim_at);
  const auto task_count = r.u32();

  std::vector<TaskDataset> tasks;
  tasks.reserve(task_count);
  long slide_index = 0;
  int global_offset = 0;
  for (std::uint32_t t = 0; t < task_count; ++t) {
    TaskDataset ds;
    const auto class_count = static_cast<int>(r.u32());
    if (class_count < 1) throw FormatError("task with zero classes", r.offset());
    ds.spec.task_index = static_cast<int>(t);
    ds.spec.class_count = class_count;
    for (int c = 0; c < class_count; ++c)
      ds.spec.class_names.push_back(canonical_class_name(static_cast<int>(t), c));

    for (auto* split : {&ds.train, &ds.val, &ds.test}) {
      const auto count = r.u32();
      split->reserve(count);
      for (std::uint32_t s = 0; s < count; ++s) {
        r.set_slide_index(slide_index++);
        split->push_back(
            detail::read_slide_record(r, dim, static_cast<int>(t), class_count, global_offset));
      }
      r.set_slide_index(-1);
    }

    // slides_per_class is not stored; recover it as the smallest per-class total.
    std::vector<int> per_class(class_count, 0);
    for (const auto* split : {&ds.train, &ds.val, &ds.test})
      for (const SlideBag& bag : *split) per_class[bag.label.local_class]++;
    ds.spec.slides_per_class = *std::min_element(per_class.begin(), per_class.end());

    global_offset += class_count;
    tasks.push_back(std::move(ds));
  }
  if (!r.at_eof()) throw FormatError("trailing bytes after final task", r.offset());
  return tasks;
}

// ---------------------------------------------------------------------------
// ZSLP prototype file
// ---------------------------------------------------------------------------

inline void write_prototype_file(const std::vector<TaskPrototypeSpec>& specs,
                                 const std::string& path) {
  int dim = -1;
  for (const TaskPrototypeSpec& spec : specs)
    for (const auto& variants : spec.variants)
      for (const EmbeddingVector& v : variants) {
        if (dim < 0) dim = static_cast<int>(v.size());
        if (static_cast<int>(v.size()) != dim)
          throw DimensionError("prototype file: variant dim mismatch");
      }
  if (dim < 0) throw DomainError("prototype file: no variants to write");

  ByteWriter w(path);
  w.magic("ZSLP");
  w.u32(kPrototypeFormatVersion);
  w.u32(static_cast<std::uint32_t>(dim));
  w.u32(static_cast<std::uint32_t>(specs.size()));
  for (const TaskPrototypeSpec& spec : specs) {
    w.u32(static_cast<std::uint32_t>(spec.variants.size()));
    for (const auto& variants : spec.variants) {
      if (variants.empty()) throw DomainError("prototype file: class with no variants");
      w.u32(static_cast<std::uint32_t>(variants.size()));
      for (const EmbeddingVector& v : variants) w.f32_vec(v);
    }
  }
}

inline std::vector<TaskPrototypeSpec> load_prototype_file(const std::string& path) {
  ByteReader r(path);
  r.expect_magic("ZSLP");
  const std::size_t version_at = r.offset();
  const auto version = r.u32();
  if (version != kPrototypeFormatVersion)
    throw FormatError("unsupported ZSLP version " + std::to_string(version), version_at);
  const std::size_t dim_at = r.offset();
  const auto dim = static_cast<int>(r.u32());
  if (dim <= 0) throw FormatError("dim must be positive", dim_at);
  const auto task_count = r.u32();

  std::vector<TaskPrototypeSpec> specs;
  specs.reserve(task_count);
  for (std::uint32_t t = 0; t < task_count; ++t) {
    TaskPrototypeSpec spec;
    spec.task_index = static_cast<int>(t);
    const auto class_count = r.u32();
    if (class_count == 0) throw FormatError("task with zero classes", r.offset());
    spec.variants.resize(class_count);
    for (auto& variants : spec.variants) {
      const auto variant_count = r.u32();
      if (variant_count == 0) throw FormatError("class with zero variants", r.offset());
      variants.reserve(variant_count);
      for (std::uint32_t v = 0; v < variant_count; ++v)
        variants.push_back(r.f32_vec(static_cast<std::size_t>(dim)));
    }
    specs.push_back(std::move(spec));
  }
  if (!r.at_eof()) throw FormatError("trailing bytes after final task", r.offset());
  return specs;
}

}  // namespace zsl
