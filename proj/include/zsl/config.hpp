#pragma once
// Run plans and the strict key = value config grammar.
//
// Sections: [data], [run], and one optional [method.<name>] per method.
// Unknown sections and unknown keys are rejected, not ignored; a silent typo
// in a hyperparameter would invalidate every comparison downstream.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "zsl/aggregator.hpp"
#include "zsl/core.hpp"
#include "zsl/datagen.hpp"
#include "zsl/zeroslide.hpp"

namespace zsl {

enum class Method : std::uint8_t { Finetune = 0, Ewc, Derpp, Buro, Zeroslide };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Finetune: return "finetune";
    case Method::Ewc: return "ewc";
    case Method::Derpp: return "derpp";
    case Method::Buro: return "buro";
    case Method::Zeroslide: return "zeroslide";
  }
  return "?";
}

inline Method method_from_string(const std::string& s, int line = -1) {
  for (Method m : {Method::Finetune, Method::Ewc, Method::Derpp, Method::Buro, Method::Zeroslide})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown method \"" + s + "\"", line);
}

struct MethodConfig {
  Method method = Method::Finetune;
  double lambda = 100.0;             // ewc
  double alpha = 0.5;                // derpp: logit distillation weight
  double beta = 0.5;                 // derpp: replay label weight
  int replay_samples = 1;            // derpp: buffer items per term per step
  double replay_weight = 1.0;        // buro
  std::size_t buffer_capacity = 30;  // derpp, buro

  bool uses_buffer() const { return method == Method::Derpp || method == Method::Buro; }

  friend bool operator==(const MethodConfig&, const MethodConfig&) = default;
};

struct RunPlan {
  std::string data_source = "synthetic";       // synthetic | file
  std::string embedding_file;                  // when data_source == file
  std::string prototype_source = "synthetic";  // synthetic | file
  std::string prototype_file;                  // when prototype_source == file
  SyntheticConfig synth;

  std::vector<MethodConfig> methods;
  int n_folds = 1;  // 1 = the data's native splits, >= 2 = stratified refolds
  std::vector<std::uint64_t> seeds{1};
  int epochs = 10;
  double lr = 0.05;
  int workers = 1;
  std::string out_dir = "results";
  AggregatorKind aggregator = AggregatorKind::GatedAttention;
  SimilarityKind similarity = SimilarityKind::Cosine;  // prototype-bank scoring

  bool has_method(Method m) const {
    return std::any_of(methods.begin(), methods.end(),
                       [&](const MethodConfig& mc) { return mc.method == m; });
  }

  friend bool operator==(const RunPlan&, const RunPlan&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t prev = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t ins = row[j - 1] + 1, del = row[j] + 1;
      const std::size_t sub = prev + (a[i - 1] == b[j - 1] ? 0 : 1);
      prev = row[j];
      row[j] = std::min({ins, del, sub});
    }
  }
  return row[b.size()];
}

inline std::size_t common_prefix(const std::string& a, const std::string& b) {
  std::size_t n = 0;
  while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
  return n;
}

// Closest known key, when close enough to be a plausible typo.
inline std::string suggest_key(const std::string& key, const std::vector<std::string>& known) {
  std::string best;
  double best_score = 0.0;
  for (const std::string& k : known) {
    const std::size_t lev = levenshtein(key, k);
    const std::size_t prefix = common_prefix(key, k);
    double score = 0.0;
    if (lev <= 2) score = 10.0 - static_cast<double>(lev);
    if (prefix >= 4) score = std::max(score, static_cast<double>(prefix));
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

struct ConfigEntry {
  std::string value;
  int line = -1;
  bool consumed = false;
};

using Section = std::map<std::string, ConfigEntry>;

inline long to_long(const std::string& key, const ConfigEntry& e) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("key \"" + key + "\": expected an integer, got \"" + e.value + "\"", e.line);
  }
}

inline double to_double(const std::string& key, const ConfigEntry& e) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("key \"" + key + "\": expected a number, got \"" + e.value + "\"", e.line);
  }
}

class SectionReader {
 public:
  SectionReader(const std::string& name, Section& section) : name_(name), section_(&section) {}

  bool has(const std::string& key) const { return section_->count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    auto it = section_->find(key);
    known_.push_back(key);
    if (it == section_->end()) return fallback;
    it->second.consumed = true;
    return it->second.value;
  }

  long integer(const std::string& key, long fallback) {
    auto it = section_->find(key);
    known_.push_back(key);
    if (it == section_->end()) return fallback;
    it->second.consumed = true;
    return to_long(key, it->second);
  }

  double real(const std::string& key, double fallback) {
    auto it = section_->find(key);
    known_.push_back(key);
    if (it == section_->end()) return fallback;
    it->second.consumed = true;
    return to_double(key, it->second);
  }

  std::vector<std::string> list(const std::string& key, const std::string& fallback) {
    return split_list(str(key, fallback));
  }

  // Every key must have been consumed; anything left is unknown.
  void finish() {
    for (auto& [key, entry] : *section_) {
      if (entry.consumed) continue;
      std::string msg = "unknown key \"" + key + "\" in section [" + name_ + "]";
      const std::string hint = suggest_key(key, known_);
      if (!hint.empty() && hint != key) msg += ", did you mean \"" + hint + "\"?";
      throw ConfigError(msg, entry.line);
    }
  }

  void declare(const std::string& key) { known_.push_back(key); }

 private:
  std::string name_;
  Section* section_;
  std::vector<std::string> known_;
};

inline std::map<std::string, Section> parse_sections(const std::string& text) {
  std::map<std::string, Section> sections;
  std::string current;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty()) throw ConfigError("empty section name", line_no);
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
    if (current.empty()) throw ConfigError("key outside any section", line_no);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("empty key", line_no);
    if (sections[current].count(key))
      throw ConfigError("duplicate key \"" + key + "\" in section [" + current + "]", line_no);
    sections[current][key] = {trim(line.substr(eq + 1)), line_no, false};
  }
  return sections;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

inline RunPlan parse_config_text(const std::string& text) {
  auto sections = detail::parse_sections(text);
  for (const auto& [name, _] : sections) {
    if (name == "data" || name == "run") continue;
    if (name.rfind("method.", 0) == 0) {
      method_from_string(name.substr(7));  // throws on unknown method names
      continue;
    }
    throw ConfigError("unknown section [" + name + "]");
  }

  RunPlan plan;

  {
    detail::SectionReader data("data", sections["data"]);
    plan.data_source = data.str("source", "synthetic");
    if (plan.data_source != "synthetic" && plan.data_source != "file")
      throw ConfigError("data source must be \"synthetic\" or \"file\"");
    plan.embedding_file = data.str("embedding_file", "");
    plan.prototype_source = data.str("prototype_source", "synthetic");
    if (plan.prototype_source != "synthetic" && plan.prototype_source != "file")
      throw ConfigError("prototype_source must be \"synthetic\" or \"file\"");
    plan.prototype_file = data.str("prototype_file", "");

    SyntheticConfig& s = plan.synth;
    s.dim = static_cast<int>(data.integer("dim", 64));
    const int spc = static_cast<int>(data.integer("slides_per_class", 40));
    auto classes = data.list("task_classes", "2,3,2,2,2,2");
    s.tasks.clear();
    for (std::size_t t = 0; t < classes.size(); ++t) {
      TaskSpec spec;
      spec.task_index = static_cast<int>(t);
      spec.class_count = static_cast<int>(detail::to_long("task_classes", {classes[t], -1, false}));
      spec.slides_per_class = spc;
      s.tasks.push_back(std::move(spec));
    }
    s.regions_per_slide = static_cast<int>(data.integer("regions_per_slide", 8));
    s.patches_per_region = static_cast<int>(data.integer("patches_per_region", 16));
    s.class_separation = data.real("class_separation", 0.5);
    s.patch_noise_sigma = data.real("patch_noise_sigma", 0.05);
    s.prototype_noise_sigma = data.real("prototype_noise_sigma", 0.05);
    s.prototype_variants = static_cast<int>(data.integer("prototype_variants", 4));
    s.seed = static_cast<std::uint64_t>(data.integer("seed", 42));
    data.finish();
  }

  {
    detail::SectionReader run("run", sections["run"]);
    run.declare("methods");
    auto method_names = run.list("methods", "");
    if (method_names.empty())
      throw ConfigError("section [run] must list at least one method in \"methods\"");
    plan.n_folds = static_cast<int>(run.integer("folds", 1));
    if (plan.n_folds < 1) throw ConfigError("folds must be >= 1");
    auto seed_items = run.list("seeds", "1");
    plan.seeds.clear();
    for (const std::string& s : seed_items)
      plan.seeds.push_back(
          static_cast<std::uint64_t>(detail::to_long("seeds", {s, -1, false})));
    if (plan.seeds.empty()) throw ConfigError("at least one seed is required");
    plan.epochs = static_cast<int>(run.integer("epochs", 10));
    if (plan.epochs < 0) throw ConfigError("epochs must be >= 0");
    plan.lr = run.real("lr", 0.05);
    if (!(plan.lr > 0.0)) throw ConfigError("lr must be > 0");
    plan.workers = static_cast<int>(run.integer("workers", 1));
    if (plan.workers < 1) throw ConfigError("workers must be >= 1");
    plan.out_dir = run.str("out", "results");
    const std::string agg = run.str("aggregator", "gated_attention");
    if (agg == "mean")
      plan.aggregator = AggregatorKind::Mean;
    else if (agg == "gated_attention")
      plan.aggregator = AggregatorKind::GatedAttention;
    else
      throw ConfigError("aggregator must be \"mean\" or \"gated_attention\"");
    const std::string sim = run.str("similarity", "cosine");
    if (sim == "cosine")
      plan.similarity = SimilarityKind::Cosine;
    else if (sim == "dot")
      plan.similarity = SimilarityKind::Dot;
    else
      throw ConfigError("similarity must be \"cosine\" or \"dot\"");
    run.finish();

    for (const std::string& name : method_names) {
      MethodConfig mc;
      mc.method = method_from_string(name);
      if (std::any_of(plan.methods.begin(), plan.methods.end(),
                      [&](const MethodConfig& other) { return other.method == mc.method; }))
        throw ConfigError("method \"" + name + "\" listed twice");
      plan.methods.push_back(mc);
    }
  }

  for (auto& [name, section] : sections) {
    if (name.rfind("method.", 0) != 0) continue;
    const Method m = method_from_string(name.substr(7));
    auto it = std::find_if(plan.methods.begin(), plan.methods.end(),
                           [&](const MethodConfig& mc) { return mc.method == m; });
    if (it == plan.methods.end())
      throw ConfigError("section [" + name + "] configures a method not listed in [run] methods");
    detail::SectionReader reader(name, section);
    switch (m) {
      case Method::Ewc:
        it->lambda = reader.real("lambda", it->lambda);
        if (it->lambda < 0.0) throw ConfigError("lambda must be >= 0");
        break;
      case Method::Derpp:
        it->alpha = reader.real("alpha", it->alpha);
        it->beta = reader.real("beta", it->beta);
        it->replay_samples = static_cast<int>(reader.integer("replay_samples", it->replay_samples));
        reader.declare("buffer_capacity");
        it->buffer_capacity =
            static_cast<std::size_t>(reader.integer("buffer_capacity", static_cast<long>(it->buffer_capacity)));
        if (it->alpha < 0.0 || it->beta < 0.0) throw ConfigError("alpha and beta must be >= 0");
        if (it->replay_samples < 1) throw ConfigError("replay_samples must be >= 1");
        break;
      case Method::Buro:
        it->replay_weight = reader.real("replay_weight", it->replay_weight);
        reader.declare("buffer_capacity");
        it->buffer_capacity =
            static_cast<std::size_t>(reader.integer("buffer_capacity", static_cast<long>(it->buffer_capacity)));
        if (it->replay_weight < 0.0) throw ConfigError("replay_weight must be >= 0");
        break;
      case Method::Finetune:
      case Method::Zeroslide:
        break;
    }
    reader.finish();
  }

  if (plan.data_source == "file" && plan.embedding_file.empty())
    throw ConfigError("data source \"file\" requires embedding_file");
  if (plan.prototype_source == "file" && plan.prototype_file.empty())
    throw ConfigError("prototype_source \"file\" requires prototype_file");
  if (plan.has_method(Method::Zeroslide) && plan.data_source == "file" &&
      plan.prototype_source == "synthetic")
    throw ConfigError(
        "zeroslide on ingested data requires prototype_source \"file\" "
        "(synthetic prototypes need the generator's class means)");
  return plan;
}

inline RunPlan parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// Canonical form: every key explicit, fixed order. Reparsing it yields an
// equal plan.
inline std::string normalized_config(const RunPlan& plan) {
  std::ostringstream out;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };

  out << "[data]\n";
  out << "source = " << plan.data_source << "\n";
  if (!plan.embedding_file.empty()) out << "embedding_file = " << plan.embedding_file << "\n";
  out << "prototype_source = " << plan.prototype_source << "\n";
  if (!plan.prototype_file.empty()) out << "prototype_file = " << plan.prototype_file << "\n";
  const SyntheticConfig& s = plan.synth;
  out << "dim = " << s.dim << "\n";
  out << "task_classes = ";
  for (std::size_t t = 0; t < s.tasks.size(); ++t)
    out << (t ? "," : "") << s.tasks[t].class_count;
  out << "\n";
  out << "slides_per_class = " << (s.tasks.empty() ? 40 : s.tasks[0].slides_per_class) << "\n";
  out << "regions_per_slide = " << s.regions_per_slide << "\n";
  out << "patches_per_region = " << s.patches_per_region << "\n";
  out << "class_separation = " << num(s.class_separation) << "\n";
  out << "patch_noise_sigma = " << num(s.patch_noise_sigma) << "\n";
  out << "prototype_noise_sigma = " << num(s.prototype_noise_sigma) << "\n";
  out << "prototype_variants = " << s.prototype_variants << "\n";
  out << "seed = " << s.seed << "\n";

  out << "\n[run]\n";
  out << "methods = ";
  for (std::size_t i = 0; i < plan.methods.size(); ++i)
    out << (i ? "," : "") << to_string(plan.methods[i].method);
  out << "\n";
  out << "folds = " << plan.n_folds << "\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < plan.seeds.size(); ++i) out << (i ? "," : "") << plan.seeds[i];
  out << "\n";
  out << "epochs = " << plan.epochs << "\n";
  out << "lr = " << num(plan.lr) << "\n";
  out << "workers = " << plan.workers << "\n";
  out << "out = " << plan.out_dir << "\n";
  out << "aggregator = "
      << (plan.aggregator == AggregatorKind::Mean ? "mean" : "gated_attention") << "\n";
  out << "similarity = " << (plan.similarity == SimilarityKind::Cosine ? "cosine" : "dot")
      << "\n";

  for (const MethodConfig& mc : plan.methods) {
    switch (mc.method) {
      case Method::Ewc:
        out << "\n[method.ewc]\n";
        out << "lambda = " << num(mc.lambda) << "\n";
        break;
      case Method::Derpp:
        out << "\n[method.derpp]\n";
        out << "alpha = " << num(mc.alpha) << "\n";
        out << "beta = " << num(mc.beta) << "\n";
        out << "replay_samples = " << mc.replay_samples << "\n";
        out << "buffer_capacity = " << mc.buffer_capacity << "\n";
        break;
      case Method::Buro:
        out << "\n[method.buro]\n";
        out << "replay_weight = " << num(mc.replay_weight) << "\n";
        out << "buffer_capacity = " << mc.buffer_capacity << "\n";
        break;
      case Method::Finetune:
      case Method::Zeroslide:
        break;
    }
  }
  return out.str();
}

}  // namespace zsl
