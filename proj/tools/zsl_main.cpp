// zsl: benchmark harness for lifelong learning over bagged embeddings.
//
// Subcommands:
//   generate  write synthetic ZSLB/ZSLP files from a config
//   run       execute a (method x fold x seed) experiment plan
//   report    summary table + per-method confidence boxplots (SVG)
//   validate  check ZSLB/ZSLP/ZSLM/ZSLR files
//
// Exit codes: 0 success, 2 partial triple failures, 3 config error,
// 4 data-format error, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zsl/experiment.hpp"
#include "zsl/report.hpp"

namespace {

std::string sniff_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw zsl::DataError("cannot open file: " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in.gcount() != 4) throw zsl::FormatError("file shorter than a magic tag", 0);
  return std::string(magic, 4);
}

void validate_one(const std::string& path) {
  const std::string magic = sniff_magic(path);
  if (magic == "ZSLB") {
    auto tasks = zsl::load_embedding_file(path);
    std::size_t slides = 0;
    int dim = 0;
    for (const auto& t : tasks)
      for (const auto* split : {&t.train, &t.val, &t.test})
        for (const auto& s : *split) {
          ++slides;
          dim = static_cast<int>(s.regions.front().region_embedding.size());
        }
    std::printf("OK  %s: ZSLB embeddings, %zu tasks, dim %d, %zu slides\n", path.c_str(),
                tasks.size(), dim, slides);
  } else if (magic == "ZSLP") {
    auto specs = zsl::load_prototype_file(path);
    std::size_t variants = 0;
    for (const auto& spec : specs)
      for (const auto& v : spec.variants) variants += v.size();
    std::printf("OK  %s: ZSLP prototypes, %zu tasks, %zu variants\n", path.c_str(), specs.size(),
                variants);
  } else if (magic == "ZSLM") {
    auto params = zsl::load_checkpoint(path);
    std::printf("OK  %s: ZSLM checkpoint, %s aggregator, dim %d, %d classes\n", path.c_str(),
                params.kind == zsl::AggregatorKind::Mean ? "mean" : "gated_attention", params.dim,
                params.num_classes());
  } else if (magic == "ZSLR") {
    try {
      auto buf = zsl::load_der_buffer_snapshot(path);
      std::printf("OK  %s: ZSLR replay buffer (DER items), capacity %zu, %zu items, seen %llu\n",
                  path.c_str(), buf.capacity, buf.items.size(),
                  static_cast<unsigned long long>(buf.seen_count));
    } catch (const zsl::FormatError&) {
      auto buf = zsl::load_region_buffer_snapshot(path);
      std::printf("OK  %s: ZSLR replay buffer (region items), capacity %zu, %zu items, seen %llu\n",
                  path.c_str(), buf.capacity, buf.items.size(),
                  static_cast<unsigned long long>(buf.seen_count));
    }
  } else {
    throw zsl::FormatError("unknown magic \"" + magic + "\"", 0);
  }
}

int dispatch(const std::string& verb, const std::string& config_path, std::string out_dir,
             int workers, bool resume, const std::vector<std::string>& files) {
  namespace fs = std::filesystem;

  if (verb == "generate") {
    zsl::RunPlan plan = zsl::parse_config(config_path);
    if (plan.data_source != "synthetic")
      throw zsl::ConfigError("generate requires data source \"synthetic\"");
    if (out_dir.empty()) out_dir = plan.out_dir;
    fs::create_directories(out_dir);
    auto seq = zsl::generate_task_sequence(plan.synth);
    auto protos = zsl::synthesize_prototypes(seq, plan.synth);
    const auto data_path = (fs::path(out_dir) / "data.zslb").string();
    const auto proto_path = (fs::path(out_dir) / "protos.zslp").string();
    zsl::write_embedding_file(seq.tasks, data_path);
    zsl::write_prototype_file(protos, proto_path);
    std::printf("wrote %s (%zu tasks) and %s\n", data_path.c_str(), seq.tasks.size(),
                proto_path.c_str());
    return 0;
  }

  if (verb == "run") {
    zsl::RunPlan plan = zsl::parse_config(config_path);
    if (!out_dir.empty()) plan.out_dir = out_dir;
    if (workers > 0) plan.workers = workers;
    const zsl::RunStats stats = zsl::run_experiment(plan, resume);
    std::printf("triples: %d executed, %d skipped, %d failed\n", stats.executed, stats.skipped,
                stats.failed);
    std::printf("results under %s\n", plan.out_dir.c_str());
    return stats.failed > 0 ? 2 : 0;
  }

  if (verb == "report") {
    if (out_dir.empty()) throw zsl::ConfigError("report requires --out <results dir>");
    const std::string table = zsl::emit_report(out_dir);
    std::fputs(table.c_str(), stdout);
    std::printf("report written to %s\n", (fs::path(out_dir) / "report.txt").string().c_str());
    return 0;
  }

  // validate
  if (files.empty()) throw zsl::ConfigError("validate requires at least one file");
  for (const std::string& f : files) validate_one(f);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lifelong-learning benchmark for bagged-embedding classification"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int workers = 0;
  bool resume = false;
  std::vector<std::string> files;

  auto* generate = app.add_subcommand("generate", "write synthetic ZSLB/ZSLP files");
  generate->add_option("--config", config_path, "config file")->required();
  generate->add_option("--out", out_dir, "output directory");

  auto* run = app.add_subcommand("run", "execute an experiment plan");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_option("--workers", workers, "concurrent triples (overrides config)");
  run->add_flag("--resume", resume, "skip triples already completed per the manifest");

  auto* report = app.add_subcommand("report", "summary table and confidence boxplots");
  report->add_option("--out", out_dir, "results directory")->required();

  auto* validate = app.add_subcommand("validate", "check binary file formats");
  validate->add_option("files", files, "files to check");

  CLI11_PARSE(app, argc, argv);

  const std::string verb = generate->parsed()   ? "generate"
                           : run->parsed()      ? "run"
                           : report->parsed()   ? "report"
                                                : "validate";
  try {
    return dispatch(verb, config_path, out_dir, workers, resume, files);
  } catch (const zsl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 3;
  } catch (const zsl::FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return 4;
  } catch (const zsl::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
