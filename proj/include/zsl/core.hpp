#pragma once
// Deterministic vector math and prediction primitives shared by every module.
//
// All accumulation happens in double precision regardless of how values are
// stored on disk. Ties in argmax break toward the smallest global class id
// so repeated runs are reproducible.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace zsl {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Bad or empty input values (empty score vector, nonpositive temperature, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class InvalidScoreError : public Error {
 public:
  using Error::Error;
};

// Illegal object state for the requested operation (uninitialized head,
// duplicate task in a prototype bank, shape mismatch against an anchor, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

// Missing or inconsistent run data (absent test split, empty train set, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Requested class layout cannot be placed at the requested separation.
class InfeasibilityError : public Error {
 public:
  using Error::Error;
};

// Malformed binary file. Carries the byte offset of the failure and, when the
// failure happens inside a slide record, the running slide index.
class FormatError : public Error {
 public:
  FormatError(const std::string& msg, std::size_t byte_offset, long slide_index = -1)
      : Error(msg + " (byte offset " + std::to_string(byte_offset) +
              (slide_index >= 0 ? ", slide index " + std::to_string(slide_index) : "") + ")"),
        byte_offset_(byte_offset),
        slide_index_(slide_index) {}

  std::size_t byte_offset() const { return byte_offset_; }
  long slide_index() const { return slide_index_; }

 private:
  std::size_t byte_offset_;
  long slide_index_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg, int line = -1)
      : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

using EmbeddingVector = std::vector<double>;

struct GlobalLabel {
  int task_index = 0;
  int local_class = 0;
  int global_id = 0;

  friend bool operator==(const GlobalLabel&, const GlobalLabel&) = default;
};

// Bijective mapping between (task, local class) pairs and global class ids.
// global_id = classes in all prior tasks + local_class.
class LabelSpace {
 public:
  LabelSpace() = default;

  explicit LabelSpace(const std::vector<int>& class_counts) {
    for (int m : class_counts) append_task(m);
  }

  void append_task(int class_count) {
    if (class_count < 1) throw DomainError("LabelSpace: task needs at least one class");
    offsets_.push_back(total_);
    counts_.push_back(class_count);
    total_ += class_count;
  }

  int num_tasks() const { return static_cast<int>(counts_.size()); }
  int total_classes() const { return total_; }

  int class_count(int task) const {
    check_task(task);
    return counts_[task];
  }

  int task_offset(int task) const {
    check_task(task);
    return offsets_[task];
  }

  GlobalLabel label(int task, int local) const {
    check_task(task);
    if (local < 0 || local >= counts_[task])
      throw DomainError("LabelSpace: local class " + std::to_string(local) +
                        " out of range for task " + std::to_string(task));
    return {task, local, offsets_[task] + local};
  }

  GlobalLabel from_global(int global_id) const {
    if (global_id < 0 || global_id >= total_)
      throw DomainError("LabelSpace: global id " + std::to_string(global_id) + " out of range");
    int task = 0;
    while (task + 1 < num_tasks() && offsets_[task + 1] <= global_id) ++task;
    return {task, global_id - offsets_[task], global_id};
  }

  // All labels of one task, in local-class order.
  std::vector<GlobalLabel> task_labels(int task) const {
    check_task(task);
    std::vector<GlobalLabel> out;
    out.reserve(counts_[task]);
    for (int c = 0; c < counts_[task]; ++c) out.push_back(label(task, c));
    return out;
  }

  // All labels accumulated so far, in global-id order.
  std::vector<GlobalLabel> all_labels() const {
    std::vector<GlobalLabel> out;
    out.reserve(total_);
    for (int t = 0; t < num_tasks(); ++t)
      for (int c = 0; c < counts_[t]; ++c) out.push_back(label(t, c));
    return out;
  }

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

 private:
  void check_task(int task) const {
    if (task < 0 || task >= num_tasks())
      throw DomainError("LabelSpace: task " + std::to_string(task) + " out of range");
  }

  std::vector<int> counts_;
  std::vector<int> offsets_;
  int total_ = 0;
};

struct ScoreVector {
  std::vector<double> scores;
  std::vector<GlobalLabel> candidates;
};

// l2_normalize result. A zero vector passes through unchanged with the
// degenerate flag set; the caller decides what to do with it.
struct Normalized {
  EmbeddingVector value;
  bool degenerate = false;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double squared_norm(const EmbeddingVector& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

inline Normalized l2_normalize(const EmbeddingVector& v) {
  const double n2 = squared_norm(v);
  if (n2 == 0.0) return {v, true};
  const double inv = 1.0 / std::sqrt(n2);
  EmbeddingVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return {std::move(out), false};
}

// Cosine of the angle between a and b, clamped to [-1, 1]. Zero vectors are
// degenerate and score 0 rather than erroring, so a sweep over synthetic data
// never aborts on them.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(d / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// Max-shifted softmax; safe for logits as large as +-1e6.
inline std::vector<double> softmax(const std::vector<double>& logits, double temperature = 1.0) {
  if (logits.empty()) throw DomainError("softmax: empty input");
  if (!(temperature > 0.0)) throw DomainError("softmax: temperature must be > 0");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - m) / temperature);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

inline ScoreVector softmax(const ScoreVector& s, double temperature = 1.0) {
  return {softmax(s.scores, temperature), s.candidates};
}

// log(sum(exp(z))) computed max-shifted.
inline double log_sum_exp(const std::vector<double>& z) {
  if (z.empty()) throw DomainError("log_sum_exp: empty input");
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - m);
  return m + std::log(sum);
}

inline GlobalLabel argmax_tiebreak(const ScoreVector& s) {
  if (s.scores.empty()) throw DomainError("argmax_tiebreak: empty scores");
  if (s.scores.size() != s.candidates.size())
    throw DimensionError("argmax_tiebreak: scores/candidates length mismatch");
  std::size_t best = 0;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    if (std::isnan(s.scores[i])) throw InvalidScoreError("argmax_tiebreak: NaN score");
    if (i == 0) continue;
    const bool wins = s.scores[i] > s.scores[best] ||
                      (s.scores[i] == s.scores[best] &&
                       s.candidates[i].global_id < s.candidates[best].global_id);
    if (wins) best = i;
  }
  return s.candidates[best];
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

// Round-trips a double through IEEE binary32. Synthetic data is quantized
// this way at generation time so the f32 file formats are lossless.
inline double quantize_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

inline void quantize_f32(EmbeddingVector& v) {
  for (double& x : v) x = quantize_f32(x);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a salt.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

}  // namespace zsl
