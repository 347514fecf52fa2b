#pragma once
// Trainable slide-level aggregation over region embeddings plus a linear
// classification head whose output dimension grows as tasks arrive.
//
// Two aggregation kinds: plain mean pooling and gated attention
//   a_r = softmax_r( tanh(r.v) * sigmoid(r.u) ),  s = sum_r a_r * r.
// Gradients are exact and hand-derived; no autodiff framework involved.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "zsl/binio.hpp"
#include "zsl/core.hpp"
#include "zsl/datagen.hpp"

namespace zsl {

enum class AggregatorKind : std::uint8_t { Mean = 0, GatedAttention = 1 };

struct AggregatorParams {
  AggregatorKind kind = AggregatorKind::GatedAttention;
  int dim = 0;
  std::vector<double> attention_v;   // dim
  std::vector<double> attention_u;   // dim
  std::vector<double> head_weights;  // num_classes x dim, row-major
  std::vector<double> head_bias;     // num_classes

  int num_classes() const { return static_cast<int>(head_bias.size()); }

  friend bool operator==(const AggregatorParams&, const AggregatorParams&) = default;
};

// Tangent values, shape-congruent with AggregatorParams.
struct Gradients {
  std::vector<double> attention_v;
  std::vector<double> attention_u;
  std::vector<double> head_weights;
  std::vector<double> head_bias;

  friend bool operator==(const Gradients&, const Gradients&) = default;
};

// Aggregator plus the label space its head rows correspond to.
struct ModelState {
  AggregatorParams params;
  LabelSpace labels;
};

// Parameter-free aggregator for the zero-shot path.
struct FrozenAggregator {
  enum class Kind : std::uint8_t { MeanOfRegions = 0 };
  Kind kind = Kind::MeanOfRegions;

  friend bool operator==(const FrozenAggregator&, const FrozenAggregator&) = default;
};

inline AggregatorParams make_params(AggregatorKind kind, int dim) {
  if (dim < 1) throw DomainError("make_params: dim must be >= 1");
  AggregatorParams p;
  p.kind = kind;
  p.dim = dim;
  p.attention_v.assign(static_cast<std::size_t>(dim), 0.0);
  p.attention_u.assign(static_cast<std::size_t>(dim), 0.0);
  return p;
}

inline Gradients zero_gradients(const AggregatorParams& p) {
  Gradients g;
  g.attention_v.assign(p.attention_v.size(), 0.0);
  g.attention_u.assign(p.attention_u.size(), 0.0);
  g.head_weights.assign(p.head_weights.size(), 0.0);
  g.head_bias.assign(p.head_bias.size(), 0.0);
  return g;
}

// Trainable arrays in checkpoint order; shared by SGD, EWC and drift norms.
inline std::vector<std::vector<double>*> param_arrays(AggregatorParams& p) {
  return {&p.attention_v, &p.attention_u, &p.head_weights, &p.head_bias};
}
inline std::vector<const std::vector<double>*> param_arrays(const AggregatorParams& p) {
  return {&p.attention_v, &p.attention_u, &p.head_weights, &p.head_bias};
}
inline std::vector<std::vector<double>*> grad_arrays(Gradients& g) {
  return {&g.attention_v, &g.attention_u, &g.head_weights, &g.head_bias};
}
inline std::vector<const std::vector<double>*> grad_arrays(const Gradients& g) {
  return {&g.attention_v, &g.attention_u, &g.head_weights, &g.head_bias};
}

inline void add_scaled(Gradients& acc, const Gradients& g, double scale) {
  auto dst = grad_arrays(acc);
  auto src = grad_arrays(g);
  for (std::size_t a = 0; a < dst.size(); ++a) {
    if (dst[a]->size() != src[a]->size())
      throw DimensionError("add_scaled: gradient shape mismatch");
    for (std::size_t i = 0; i < dst[a]->size(); ++i) (*dst[a])[i] += scale * (*src[a])[i];
  }
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void check_bag(const SlideBag& bag, int dim) {
  if (bag.regions.empty()) throw DomainError("aggregate: empty bag " + bag.slide_id);
  for (const Region& r : bag.regions)
    if (static_cast<int>(r.region_embedding.size()) != dim)
      throw DimensionError("aggregate: region dim mismatch in " + bag.slide_id);
}

}  // namespace detail

// Gated-attention weights over the bag's regions; nonnegative, sum to 1.
inline std::vector<double> attention_weights(const SlideBag& bag, const AggregatorParams& p) {
  detail::check_bag(bag, p.dim);
  const std::size_t n = bag.regions.size();
  if (p.kind == AggregatorKind::Mean)
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
  std::vector<double> scores(n);
  for (std::size_t r = 0; r < n; ++r) {
    const EmbeddingVector& region = bag.regions[r].region_embedding;
    scores[r] = std::tanh(dot(region, p.attention_v)) * detail::sigmoid(dot(region, p.attention_u));
  }
  return softmax(scores);
}

inline EmbeddingVector aggregate(const SlideBag& bag, const AggregatorParams& p) {
  const auto weights = attention_weights(bag, p);
  EmbeddingVector s(static_cast<std::size_t>(p.dim), 0.0);
  for (std::size_t r = 0; r < bag.regions.size(); ++r)
    for (int d = 0; d < p.dim; ++d) s[d] += weights[r] * bag.regions[r].region_embedding[d];
  return s;
}

// Frozen path: unweighted mean over region embeddings, no parameters.
inline EmbeddingVector aggregate(const SlideBag& bag, const FrozenAggregator&) {
  if (bag.regions.empty()) throw DomainError("aggregate: empty bag " + bag.slide_id);
  const std::size_t dim = bag.regions.front().region_embedding.size();
  EmbeddingVector s(dim, 0.0);
  for (const Region& r : bag.regions) {
    if (r.region_embedding.size() != dim)
      throw DimensionError("aggregate: region dim mismatch in " + bag.slide_id);
    for (std::size_t d = 0; d < dim; ++d) s[d] += r.region_embedding[d];
  }
  for (double& x : s) x /= static_cast<double>(bag.regions.size());
  return s;
}

// Logits over every global class registered so far.
inline ScoreVector forward_logits(const EmbeddingVector& s, const ModelState& model) {
  const AggregatorParams& p = model.params;
  if (p.num_classes() == 0) throw StateError("forward_logits: head has no classes");
  if (static_cast<int>(s.size()) != p.dim)
    throw DimensionError("forward_logits: embedding dim mismatch");
  if (model.labels.total_classes() != p.num_classes())
    throw StateError("forward_logits: head rows out of sync with label space");
  ScoreVector out;
  out.scores.resize(static_cast<std::size_t>(p.num_classes()));
  for (int c = 0; c < p.num_classes(); ++c) {
    double z = p.head_bias[c];
    const double* row = &p.head_weights[static_cast<std::size_t>(c) * p.dim];
    for (int d = 0; d < p.dim; ++d) z += row[d] * s[d];
    out.scores[c] = z;
  }
  out.candidates = model.labels.all_labels();
  return out;
}

// -log softmax(logits)[y], log-sum-exp stabilized.
inline double cross_entropy(const ScoreVector& logits, const GlobalLabel& y) {
  long idx = -1;
  for (std::size_t i = 0; i < logits.candidates.size(); ++i)
    if (logits.candidates[i].global_id == y.global_id) {
      idx = static_cast<long>(i);
      break;
    }
  if (idx < 0) throw DomainError("cross_entropy: label not in candidate set");
  return log_sum_exp(logits.scores) - logits.scores[static_cast<std::size_t>(idx)];
}

// Backprop from an arbitrary dL/dlogits vector through the head and, for the
// gated kind, through the attention weights. This is the shared backbone for
// cross-entropy and distillation losses.
inline Gradients backward_from_logit_grad(const SlideBag& bag, const std::vector<double>& dz,
                                          const AggregatorParams& p) {
  if (static_cast<int>(dz.size()) != p.num_classes())
    throw DimensionError("backward: logit gradient length mismatch");
  detail::check_bag(bag, p.dim);

  Gradients g = zero_gradients(p);
  const auto weights = attention_weights(bag, p);
  EmbeddingVector s(static_cast<std::size_t>(p.dim), 0.0);
  for (std::size_t r = 0; r < bag.regions.size(); ++r)
    for (int d = 0; d < p.dim; ++d) s[d] += weights[r] * bag.regions[r].region_embedding[d];

  // Head: dW[c][j] = dz[c] * s[j], db[c] = dz[c]; also accumulate dL/ds.
  EmbeddingVector ds(static_cast<std::size_t>(p.dim), 0.0);
  for (int c = 0; c < p.num_classes(); ++c) {
    g.head_bias[c] = dz[c];
    double* grow = &g.head_weights[static_cast<std::size_t>(c) * p.dim];
    const double* row = &p.head_weights[static_cast<std::size_t>(c) * p.dim];
    for (int d = 0; d < p.dim; ++d) {
      grow[d] = dz[c] * s[d];
      ds[d] += dz[c] * row[d];
    }
  }

  if (p.kind == AggregatorKind::GatedAttention) {
    const std::size_t n = bag.regions.size();
    std::vector<double> dLda(n);
    double weighted = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      dLda[r] = dot(ds, bag.regions[r].region_embedding);
      weighted += weights[r] * dLda[r];
    }
    for (std::size_t r = 0; r < n; ++r) {
      const EmbeddingVector& region = bag.regions[r].region_embedding;
      const double de = weights[r] * (dLda[r] - weighted);  // softmax backward
      const double h = std::tanh(dot(region, p.attention_v));
      const double q = detail::sigmoid(dot(region, p.attention_u));
      const double dv = de * (1.0 - h * h) * q;
      const double du = de * h * q * (1.0 - q);
      for (int d = 0; d < p.dim; ++d) {
        g.attention_v[d] += dv * region[d];
        g.attention_u[d] += du * region[d];
      }
    }
  }
  return g;
}

// Exact gradient of cross_entropy(forward_logits(aggregate(bag)), y).
inline Gradients backward(const SlideBag& bag, const GlobalLabel& y, const ModelState& model) {
  const EmbeddingVector s = aggregate(bag, model.params);
  const ScoreVector logits = forward_logits(s, model);
  long idx = -1;
  for (std::size_t i = 0; i < logits.candidates.size(); ++i)
    if (logits.candidates[i].global_id == y.global_id) {
      idx = static_cast<long>(i);
      break;
    }
  if (idx < 0) throw DomainError("backward: label not in candidate set");
  std::vector<double> dz = softmax(logits.scores);
  dz[static_cast<std::size_t>(idx)] -= 1.0;
  return backward_from_logit_grad(bag, dz, model.params);
}

inline void sgd_step(AggregatorParams& p, const Gradients& g, double learning_rate) {
  if (!(learning_rate > 0.0)) throw DomainError("sgd_step: learning rate must be > 0");
  auto params = param_arrays(p);
  auto grads = grad_arrays(g);
  for (std::size_t a = 0; a < params.size(); ++a) {
    if (params[a]->size() != grads[a]->size())
      throw DimensionError("sgd_step: gradient shape mismatch");
    for (double x : *grads[a])
      if (std::isnan(x)) throw DivergenceError("sgd_step: NaN gradient, run diverged");
  }
  for (std::size_t a = 0; a < params.size(); ++a)
    for (std::size_t i = 0; i < params[a]->size(); ++i)
      (*params[a])[i] -= learning_rate * (*grads[a])[i];
}

// Appends zero-initialized head rows; existing rows stay bit-identical, so
// pre-existing logits never change and new-class logits start at exactly 0.
inline void grow_head(AggregatorParams& p, int new_class_count) {
  if (new_class_count < 0) throw DomainError("grow_head: negative class count");
  p.head_weights.resize(p.head_weights.size() + static_cast<std::size_t>(new_class_count) * p.dim,
                        0.0);
  p.head_bias.resize(p.head_bias.size() + static_cast<std::size_t>(new_class_count), 0.0);
}

// Registers a task's classes on both the head and the label space.
inline void register_task(ModelState& model, int class_count) {
  model.labels.append_task(class_count);
  grow_head(model.params, class_count);
}

// ---------------------------------------------------------------------------
// ZSLM checkpoint
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

inline void save_checkpoint(const AggregatorParams& p, const std::string& path) {
  ByteWriter w(path);
  w.magic("ZSLM");
  w.u32(kCheckpointFormatVersion);
  w.u8(static_cast<std::uint8_t>(p.kind));
  w.u32(static_cast<std::uint32_t>(p.dim));
  w.u32(static_cast<std::uint32_t>(p.num_classes()));
  for (const auto* arr : param_arrays(p)) w.f64_vec(*arr);
}

inline AggregatorParams load_checkpoint(const std::string& path) {
  ByteReader r(path);
  r.expect_magic("ZSLM");
  const std::size_t version_at = r.offset();
  const auto version = r.u32();
  if (version != kCheckpointFormatVersion)
    throw FormatError("unsupported ZSLM version " + std::to_string(version), version_at);
  const std::size_t kind_at = r.offset();
  const auto kind = r.u8();
  if (kind > 1) throw FormatError("unknown aggregator kind " + std::to_string(kind), kind_at);
  const std::size_t dim_at = r.offset();
  const auto dim = static_cast<int>(r.u32());
  if (dim <= 0) throw FormatError("dim must be positive", dim_at);
  const auto classes = r.u32();

  AggregatorParams p = make_params(static_cast<AggregatorKind>(kind), dim);
  p.attention_v = r.f64_vec(static_cast<std::size_t>(dim));
  p.attention_u = r.f64_vec(static_cast<std::size_t>(dim));
  p.head_weights = r.f64_vec(static_cast<std::size_t>(classes) * dim);
  p.head_bias = r.f64_vec(classes);
  if (!r.at_eof()) throw FormatError("trailing bytes after parameters", r.offset());
  return p;
}

}  // namespace zsl
