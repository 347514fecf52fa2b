#pragma once
// The training-based lifelong strategies: naive fine-tuning, EWC with a
// diagonal-Fisher quadratic penalty, DER++ logit distillation over a
// reservoir buffer, and region-recombining rehearsal (BuRo-style).
//
// Every trainer sees only the train split of a task. Two RNG streams per run:
// one for epoch shuffles, one for buffer sampling/insertion, both derived
// from the trainer seed, so buffer-free configurations stay bitwise equal to
// plain fine-tuning.

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "zsl/aggregator.hpp"
#include "zsl/binio.hpp"
#include "zsl/core.hpp"
#include "zsl/datagen.hpp"

namespace zsl {

struct TrainOptions {
  int epochs = 10;
  double lr = 0.05;
  std::uint64_t seed = 0;
};

namespace detail {

inline constexpr std::uint64_t kSaltShuffle = 0x5348554646ull;  // "SHUFF"
inline constexpr std::uint64_t kSaltReplay = 0x5245504cull;     // "REPL"

// Shared SGD scaffold: identical shuffle stream for every trainer, one
// gradient callback per slide.
template <typename StepFn>
void sgd_epochs(std::span<const SlideBag> train, const TrainOptions& opts, StepFn&& step) {
  if (train.empty()) throw DataError("training: empty train split");
  if (opts.epochs < 0) throw DomainError("training: negative epoch count");
  std::mt19937_64 shuffle_rng(mix_seed(opts.seed, kSaltShuffle));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t idx : order) step(train[idx]);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fine-tuning baseline
// ---------------------------------------------------------------------------

inline void train_finetune(ModelState& model, std::span<const SlideBag> train,
                           const TrainOptions& opts) {
  detail::sgd_epochs(train, opts, [&](const SlideBag& bag) {
    sgd_step(model.params, backward(bag, bag.label, model), opts.lr);
  });
}

// ---------------------------------------------------------------------------
// EWC
// ---------------------------------------------------------------------------

// Empirical diagonal Fisher: mean over train slides of the squared gradient
// of the true-label log-likelihood. Entries are squares, hence >= 0.
inline Gradients estimate_fisher_diag(const ModelState& model, std::span<const SlideBag> train) {
  if (train.empty()) throw DomainError("estimate_fisher_diag: empty train set");
  Gradients fisher = zero_gradients(model.params);
  auto acc = grad_arrays(fisher);
  for (const SlideBag& bag : train) {
    const Gradients g = backward(bag, bag.label, model);
    auto src = grad_arrays(g);
    for (std::size_t a = 0; a < acc.size(); ++a)
      for (std::size_t i = 0; i < acc[a]->size(); ++i)
        (*acc[a])[i] += (*src[a])[i] * (*src[a])[i];
  }
  const auto n = static_cast<double>(train.size());
  for (auto* arr : acc)
    for (double& x : *arr) x /= n;
  return fisher;
}

// Anchor parameters and importance weights from the previous task. Head rows
// created after the snapshot carry no Fisher mass and are excluded.
struct EwcState {
  AggregatorParams anchor;
  Gradients fisher;
  double lambda = 100.0;
  bool has_anchor = false;
};

namespace detail {

inline void check_anchor_shapes(const AggregatorParams& p, const EwcState& state) {
  if (state.anchor.dim != p.dim || state.anchor.kind != p.kind)
    throw StateError("ewc: anchor incompatible with current parameters");
  if (state.anchor.num_classes() > p.num_classes())
    throw StateError("ewc: anchor has more head rows than the current model");
  if (state.fisher.head_bias.size() != state.anchor.head_bias.size() ||
      state.fisher.attention_v.size() != state.anchor.attention_v.size())
    throw StateError("ewc: fisher diagonal incongruent with anchor");
}

}  // namespace detail

// (lambda / 2) * sum_i F_i (theta_i - theta*_i)^2 over anchored parameters.
inline double ewc_penalty(const AggregatorParams& p, const EwcState& state) {
  if (!state.has_anchor || state.lambda == 0.0) return 0.0;
  detail::check_anchor_shapes(p, state);
  double penalty = 0.0;
  auto cur = param_arrays(p);
  auto anc = param_arrays(state.anchor);
  auto fis = grad_arrays(state.fisher);
  for (std::size_t a = 0; a < cur.size(); ++a)
    for (std::size_t i = 0; i < anc[a]->size(); ++i) {
      const double drift = (*cur[a])[i] - (*anc[a])[i];
      penalty += (*fis[a])[i] * drift * drift;
    }
  return 0.5 * state.lambda * penalty;
}

// lambda * F_i (theta_i - theta*_i) on anchored coordinates, 0 elsewhere.
inline Gradients ewc_penalty_gradient(const AggregatorParams& p, const EwcState& state) {
  Gradients g = zero_gradients(p);
  if (!state.has_anchor || state.lambda == 0.0) return g;
  detail::check_anchor_shapes(p, state);
  auto out = grad_arrays(g);
  auto cur = param_arrays(p);
  auto anc = param_arrays(state.anchor);
  auto fis = grad_arrays(state.fisher);
  for (std::size_t a = 0; a < out.size(); ++a)
    for (std::size_t i = 0; i < anc[a]->size(); ++i)
      (*out[a])[i] = state.lambda * (*fis[a])[i] * ((*cur[a])[i] - (*anc[a])[i]);
  return g;
}

// SGD on cross-entropy + EWC penalty, then snapshot the anchor and recompute
// the Fisher diagonal on this task. With no anchor the step is exactly the
// fine-tuning step, so task 1 matches train_finetune bit for bit.
inline EwcState train_ewc(ModelState& model, std::span<const SlideBag> train,
                          const EwcState& state, const TrainOptions& opts) {
  const bool penalized = state.has_anchor && state.lambda != 0.0;
  detail::sgd_epochs(train, opts, [&](const SlideBag& bag) {
    Gradients g = backward(bag, bag.label, model);
    if (penalized) add_scaled(g, ewc_penalty_gradient(model.params, state), 1.0);
    sgd_step(model.params, g, opts.lr);
  });

  EwcState next;
  next.anchor = model.params;
  next.fisher = estimate_fisher_diag(model, train);
  next.lambda = state.lambda;
  next.has_anchor = true;
  return next;
}

// ---------------------------------------------------------------------------
// Reservoir buffer
// ---------------------------------------------------------------------------

template <typename T>
struct ReservoirBuffer {
  std::size_t capacity = 0;
  std::vector<T> items;
  std::uint64_t seen_count = 0;

  friend bool operator==(const ReservoirBuffer&, const ReservoirBuffer&) = default;
};

// Streaming uniform retention: fill to capacity, then replace a uniformly
// random slot with probability capacity / seen_count. Capacity 0 discards
// everything without touching the RNG.
template <typename T>
void reservoir_insert(ReservoirBuffer<T>& buf, T item, std::mt19937_64& rng) {
  ++buf.seen_count;
  if (buf.items.size() < buf.capacity) {
    buf.items.push_back(std::move(item));
    return;
  }
  if (buf.capacity == 0) return;
  std::uniform_int_distribution<std::uint64_t> slot(0, buf.seen_count - 1);
  const std::uint64_t j = slot(rng);
  if (j < buf.capacity) buf.items[j] = std::move(item);
}

// ---------------------------------------------------------------------------
// DER++
// ---------------------------------------------------------------------------

// A replayed slide with the logits it had when it entered the buffer. The
// stored length never exceeds the class count at storage time.
struct ReplayItemDer {
  SlideBag bag;
  GlobalLabel label;
  std::vector<double> stored_logits;

  friend bool operator==(const ReplayItemDer&, const ReplayItemDer&) = default;
};

struct DerppOptions {
  double alpha = 0.5;        // logit-distillation weight
  double beta = 0.5;         // replayed-label cross-entropy weight
  int replay_samples = 1;    // buffer items drawn per term per step
};

struct DerppLossResult {
  double loss = 0.0;
  Gradients grads;
};

// Composite loss: CE(current) + alpha * MSE(current logits, stored logits)
// on sampled buffer items (over the stored length only) + beta * CE on
// sampled buffer items' true labels. An empty buffer contributes nothing;
// that is documented behavior, not an error.
inline DerppLossResult derpp_loss(const ModelState& model, const SlideBag& current,
                                  const ReservoirBuffer<ReplayItemDer>& buffer, double alpha,
                                  double beta, std::mt19937_64& rng, int replay_samples = 1) {
  if (alpha < 0.0 || beta < 0.0) throw DomainError("derpp_loss: alpha and beta must be >= 0");
  if (replay_samples < 1) throw DomainError("derpp_loss: replay_samples must be >= 1");

  DerppLossResult out;
  const ScoreVector logits = forward_logits(aggregate(current, model.params), model);
  out.loss = cross_entropy(logits, current.label);
  out.grads = backward(current, current.label, model);

  if (buffer.items.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick(0, buffer.items.size() - 1);
  const double share = 1.0 / static_cast<double>(replay_samples);

  if (alpha > 0.0) {
    for (int k = 0; k < replay_samples; ++k) {
      const ReplayItemDer& item = buffer.items[pick(rng)];
      const ScoreVector z = forward_logits(aggregate(item.bag, model.params), model);
      const std::size_t len = item.stored_logits.size();
      if (len > z.scores.size())
        throw StateError("derpp_loss: stored logits longer than the current head");
      double mse = 0.0;
      std::vector<double> dz(z.scores.size(), 0.0);
      for (std::size_t c = 0; c < len; ++c) {
        const double diff = z.scores[c] - item.stored_logits[c];
        mse += diff * diff;
        dz[c] = 2.0 * diff / static_cast<double>(len);
      }
      mse /= static_cast<double>(len);
      out.loss += alpha * share * mse;
      add_scaled(out.grads, backward_from_logit_grad(item.bag, dz, model.params), alpha * share);
    }
  }

  if (beta > 0.0) {
    for (int k = 0; k < replay_samples; ++k) {
      const ReplayItemDer& item = buffer.items[pick(rng)];
      const ScoreVector z = forward_logits(aggregate(item.bag, model.params), model);
      out.loss += beta * share * cross_entropy(z, item.label);
      add_scaled(out.grads, backward(item.bag, item.label, model), beta * share);
    }
  }
  return out;
}

// Per step: composite loss, SGD step, then insert the current slide with the
// logits of the model as it now stands.
inline void train_derpp(ModelState& model, std::span<const SlideBag> train,
                        ReservoirBuffer<ReplayItemDer>& buffer, const DerppOptions& derpp,
                        const TrainOptions& opts) {
  std::mt19937_64 replay_rng(mix_seed(opts.seed, detail::kSaltReplay));
  detail::sgd_epochs(train, opts, [&](const SlideBag& bag) {
    DerppLossResult step = derpp_loss(model, bag, buffer, derpp.alpha, derpp.beta, replay_rng,
                                      derpp.replay_samples);
    sgd_step(model.params, step.grads, opts.lr);
    ReplayItemDer item;
    item.bag = bag;
    item.label = bag.label;
    item.stored_logits = forward_logits(aggregate(bag, model.params), model).scores;
    reservoir_insert(buffer, std::move(item), replay_rng);
  });
}

// ---------------------------------------------------------------------------
// Region-recombining rehearsal (BuRo)
// ---------------------------------------------------------------------------

struct RegionBufferItem {
  Region region;
  GlobalLabel label;
  std::string slide_id;  // source slide

  friend bool operator==(const RegionBufferItem&, const RegionBufferItem&) = default;
};

struct BuroOptions {
  double replay_weight = 1.0;
  int regions_per_bag = 8;
};

// Stores each region of a finished slide as an independent buffer item.
inline void buro_store(ReservoirBuffer<RegionBufferItem>& buffer, const SlideBag& bag,
                       std::mt19937_64& rng) {
  for (const Region& region : bag.regions)
    reservoir_insert(buffer, RegionBufferItem{region, bag.label, bag.slide_id}, rng);
}

// Recombination: pick a class uniformly among classes present, then sample
// regions of that class with replacement into a synthetic replay slide.
inline SlideBag buro_sample(const ReservoirBuffer<RegionBufferItem>& buffer, int regions_per_bag,
                            std::mt19937_64& rng) {
  if (buffer.items.empty()) throw DomainError("buro_sample: empty buffer");
  if (regions_per_bag < 1) throw DomainError("buro_sample: regions_per_bag must be >= 1");

  std::map<int, std::vector<const RegionBufferItem*>> by_class;
  for (const RegionBufferItem& item : buffer.items) by_class[item.label.global_id].push_back(&item);

  std::uniform_int_distribution<std::size_t> pick_class(0, by_class.size() - 1);
  auto it = by_class.begin();
  std::advance(it, static_cast<long>(pick_class(rng)));
  const auto& pool = it->second;

  SlideBag bag;
  bag.slide_id = "replay_c" + std::to_string(it->first);
  bag.label = pool.front()->label;
  std::uniform_int_distribution<std::size_t> pick_region(0, pool.size() - 1);
  bag.regions.reserve(static_cast<std::size_t>(regions_per_bag));
  for (int r = 0; r < regions_per_bag; ++r) bag.regions.push_back(pool[pick_region(rng)]->region);
  return bag;
}

// Per step: CE on the current slide plus weighted CE on one recombined replay
// slide; after the task every train slide's regions enter the buffer.
inline void train_buro(ModelState& model, std::span<const SlideBag> train,
                       ReservoirBuffer<RegionBufferItem>& buffer, const BuroOptions& buro,
                       const TrainOptions& opts) {
  std::mt19937_64 replay_rng(mix_seed(opts.seed, detail::kSaltReplay));
  detail::sgd_epochs(train, opts, [&](const SlideBag& bag) {
    Gradients g = backward(bag, bag.label, model);
    if (buro.replay_weight > 0.0 && !buffer.items.empty()) {
      const SlideBag replay = buro_sample(buffer, buro.regions_per_bag, replay_rng);
      add_scaled(g, backward(replay, replay.label, model), buro.replay_weight);
    }
    sgd_step(model.params, g, opts.lr);
  });
  for (const SlideBag& bag : train) buro_store(buffer, bag, replay_rng);
}

// ---------------------------------------------------------------------------
// ZSLR buffer snapshots
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kBufferFormatVersion = 1;
inline constexpr std::uint8_t kBufferKindDer = 1;
inline constexpr std::uint8_t kBufferKindRegion = 2;

namespace detail {

inline int buffer_dim(const ReservoirBuffer<ReplayItemDer>& buf) {
  for (const auto& item : buf.items)
    for (const Region& r : item.bag.regions) return static_cast<int>(r.region_embedding.size());
  return 0;
}

inline int buffer_dim(const ReservoirBuffer<RegionBufferItem>& buf) {
  return buf.items.empty() ? 0
                           : static_cast<int>(buf.items.front().region.region_embedding.size());
}

inline void write_buffer_header(ByteWriter& w, std::uint8_t kind, int dim, std::size_t capacity,
                                std::uint64_t seen_count) {
  w.magic("ZSLR");
  w.u32(kBufferFormatVersion);
  w.u8(kind);
  w.u32(static_cast<std::uint32_t>(dim));
  w.u32(static_cast<std::uint32_t>(capacity));
  w.u64(seen_count);
}

inline std::pair<std::size_t, std::uint64_t> read_buffer_header(ByteReader& r,
                                                                std::uint8_t expected_kind,
                                                                int& dim) {
  r.expect_magic("ZSLR");
  const std::size_t version_at = r.offset();
  const auto version = r.u32();
  if (version != kBufferFormatVersion)
    throw FormatError("unsupported ZSLR version " + std::to_string(version), version_at);
  const std::size_t kind_at = r.offset();
  const auto kind = r.u8();
  if (kind != expected_kind)
    throw FormatError("buffer kind " + std::to_string(kind) + ", expected " +
                          std::to_string(expected_kind),
                      kind_at);
  dim = static_cast<int>(r.u32());
  const auto capacity = static_cast<std::size_t>(r.u32());
  const auto seen = r.u64();
  return {capacity, seen};
}

}  // namespace detail

inline void save_buffer_snapshot(const ReservoirBuffer<ReplayItemDer>& buf,
                                 const std::string& path) {
  const int dim = detail::buffer_dim(buf);
  ByteWriter w(path);
  detail::write_buffer_header(w, kBufferKindDer, dim, buf.capacity, buf.seen_count);
  for (const ReplayItemDer& item : buf.items) {
    w.u32(static_cast<std::uint32_t>(item.label.task_index));
    w.u32(static_cast<std::uint32_t>(item.label.global_id));
    detail::write_slide_record(w, item.bag, dim);
    w.u32(static_cast<std::uint32_t>(item.stored_logits.size()));
    w.f64_vec(item.stored_logits);
  }
}

inline ReservoirBuffer<ReplayItemDer> load_der_buffer_snapshot(const std::string& path) {
  ByteReader r(path);
  int dim = 0;
  auto [capacity, seen] = detail::read_buffer_header(r, kBufferKindDer, dim);
  ReservoirBuffer<ReplayItemDer> buf;
  buf.capacity = capacity;
  buf.seen_count = seen;
  long index = 0;
  while (!r.at_eof()) {
    r.set_slide_index(index++);
    ReplayItemDer item;
    const auto task = static_cast<int>(r.u32());
    const auto global = static_cast<int>(r.u32());
    // local_class comes from the slide record itself; the stored global id
    // replaces the offset-derived one.
    item.bag = detail::read_slide_record(r, dim, task, global + 1, 0);
    item.bag.label.task_index = task;
    item.bag.label.global_id = global;
    item.label = item.bag.label;
    item.stored_logits = r.f64_vec(r.u32());
    buf.items.push_back(std::move(item));
    r.set_slide_index(-1);
  }
  if (buf.items.size() > buf.capacity)
    throw FormatError("buffer holds more items than its capacity", r.offset());
  return buf;
}

inline void save_buffer_snapshot(const ReservoirBuffer<RegionBufferItem>& buf,
                                 const std::string& path) {
  const int dim = detail::buffer_dim(buf);
  ByteWriter w(path);
  detail::write_buffer_header(w, kBufferKindRegion, dim, buf.capacity, buf.seen_count);
  for (const RegionBufferItem& item : buf.items) {
    w.u32(static_cast<std::uint32_t>(item.label.task_index));
    w.u32(static_cast<std::uint32_t>(item.label.global_id));
    SlideBag carrier;
    carrier.slide_id = item.slide_id;
    carrier.label = item.label;
    carrier.regions = {item.region};
    detail::write_slide_record(w, carrier, dim);
  }
}

inline ReservoirBuffer<RegionBufferItem> load_region_buffer_snapshot(const std::string& path) {
  ByteReader r(path);
  int dim = 0;
  auto [capacity, seen] = detail::read_buffer_header(r, kBufferKindRegion, dim);
  ReservoirBuffer<RegionBufferItem> buf;
  buf.capacity = capacity;
  buf.seen_count = seen;
  long index = 0;
  while (!r.at_eof()) {
    r.set_slide_index(index++);
    const auto task = static_cast<int>(r.u32());
    const auto global = static_cast<int>(r.u32());
    SlideBag carrier = detail::read_slide_record(r, dim, task, global + 1, 0);
    carrier.label.task_index = task;
    carrier.label.global_id = global;
    if (carrier.regions.size() != 1)
      throw FormatError("region item must hold exactly one region", r.offset(),
                        r.slide_index());
    buf.items.push_back(
        RegionBufferItem{std::move(carrier.regions[0]), carrier.label, carrier.slide_id});
    r.set_slide_index(-1);
  }
  if (buf.items.size() > buf.capacity)
    throw FormatError("buffer holds more items than its capacity", r.offset());
  return buf;
}

}  // namespace zsl
