#include "cli/commands.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dnnchip/accel_graph.hpp"
#include "dnnchip/binding.hpp"
#include "dnnchip/cost_library.hpp"
#include "dnnchip/dnn_ir.hpp"
#include "dnnchip/error.hpp"
#include "dnnchip/explore_io.hpp"
#include "dnnchip/io.hpp"
#include "dnnchip/predictor_coarse.hpp"
#include "dnnchip/predictor_fine.hpp"

namespace dnnchip::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string model;
  std::string arch;
  std::string costs;
  std::string config;
  std::string manifest;
  std::string out;
  std::string trace;
  std::string mode = "coarse";
  std::string format = "csv";
  std::int64_t tile_m = 0;
  std::int64_t tile_rows = 0;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

void emit(std::ostream& out, const std::string& dir, const std::string& name, const std::string& content) {
  if (dir.empty()) {
    out << content;
  } else {
    write_text_file(fs::path(dir) / name, content);
  }
}

void fail_on_diagnostics(const std::vector<Diagnostic>& diagnostics, std::ostream& err) {
  if (diagnostics.empty()) return;
  for (const auto& d : diagnostics) err << fmt::format("{}: {}: {}\n", d.rule, d.subject, d.message);
  fail(ErrorCategory::Validation, fmt::format("{} validation error(s)", diagnostics.size()));
}

// Architecture with its own states, or bound to --model.
AccelGraph load_graph(const Options& o, const UnitCostLibrary& costs, std::ostream& err) {
  auto graph = build_graph(parse_arch(read_text_file(o.arch)), costs);
  if (!o.model.empty()) {
    const auto model = parse_model(read_text_file(o.model));
    graph = bind_mapping(graph, model, DataSchedule{o.tile_m, o.tile_rows});
  }
  fail_on_diagnostics(validate_graph(graph), err);
  return graph;
}

void cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.mode != "coarse" && o.mode != "fine") {
    fail(ErrorCategory::Parse, fmt::format("unknown mode '{}' (expected coarse or fine)", o.mode));
  }
  const auto costs = load_library(read_text_file(o.costs));
  const auto graph = load_graph(o, costs, err);
  if (o.mode == "coarse") {
    const auto report = predict_coarse(graph, costs);
    emit(out, o.out, "report.json", report_to_json(report));
    if (!o.out.empty()) emit(out, o.out, "report.csv", report_to_csv(report));
    return;
  }
  SimLimits limits;
  limits.trace_enabled = !o.trace.empty();
  const auto result = simulate(graph, costs, limits);
  emit(out, o.out, "sim.json", sim_to_json(result));
  if (!o.trace.empty()) write_text_file(o.trace, export_trace(result));
}

void cmd_explore(const Options& o, std::ostream& out) {
  auto config = load_explore_config(o.config);
  if (o.seed) config.seed = *o.seed;
  const auto model = parse_model(read_text_file(config.model));
  const auto costs = load_library(read_text_file(config.costs));
  const unsigned threads = o.threads != 0 ? o.threads : std::max(1u, std::thread::hardware_concurrency());
  const auto run = run_explore(config, model, costs, threads);
  emit(out, o.out, "manifest.json", manifest_json(run));
  if (!o.out.empty()) {
    emit(out, o.out, "pareto.csv", pareto_csv(run));
    emit(out, o.out, "timing.json", timing_json(run));
  }
}

void cmd_report(const Options& o, std::ostream& out) {
  const auto rows = format_report(read_text_file(o.manifest), o.format);
  if (o.out.empty()) {
    out << rows;
  } else {
    write_text_file(o.out, rows);
  }
}

void cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.arch.empty() && o.model.empty()) fail(ErrorCategory::Parse, "validate needs --arch and/or --model");
  if (o.arch.empty()) {
    parse_model(read_text_file(o.model));
  } else {
    if (o.costs.empty()) fail(ErrorCategory::Parse, "validating an architecture needs --costs");
    const auto costs = load_library(read_text_file(o.costs));
    load_graph(o, costs, err);
  }
  out << "ok\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"DNN accelerator prediction and design-space exploration", "dnnchip"};
  app.require_subcommand(1);

  auto add_graph_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--arch", o.arch, "Architecture document")->required();
    cmd->add_option("--costs", o.costs, "Unit-cost library")->required();
    cmd->add_option("--model", o.model, "Model to bind onto the architecture");
    cmd->add_option("--tile-m", o.tile_m, "Output channels per tile (0 = whole layer)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--tile-rows", o.tile_rows, "Output rows per tile (0 = whole layer)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", o.out, "Output directory (default: standard output)");
  };

  auto* predict = app.add_subcommand("predict", "Coarse or fine prediction of one design");
  add_graph_inputs(predict);
  predict->add_option("--mode", o.mode, "coarse or fine")->check(CLI::IsMember({"coarse", "fine"}));
  predict->add_option("--trace", o.trace, "Write the state-transition trace here (fine mode)");

  auto* sim = app.add_subcommand("simulate", "Same as predict --mode fine");
  add_graph_inputs(sim);
  sim->add_option("--trace", o.trace, "Write the state-transition trace here");

  auto* explore = app.add_subcommand("explore", "Two-stage design-space exploration");
  explore->add_option("--config", o.config, "Exploration config")->required();
  explore->add_option("--out", o.out, "Output directory (default: manifest to standard output)");
  explore->add_option("--seed", o.seed, "Override the config seed");
  explore->add_option("--threads", o.threads, "Worker threads (default: available cores)")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Tabulate a manifest's candidates");
  report->add_option("--manifest", o.manifest, "Manifest written by explore")->required();
  report->add_option("--format", o.format, "csv or tsv");
  report->add_option("--out", o.out, "Output file (default: standard output)");

  auto* validate = app.add_subcommand("validate", "Check documents without predicting");
  validate->add_option("--arch", o.arch, "Architecture document");
  validate->add_option("--costs", o.costs, "Unit-cost library");
  validate->add_option("--model", o.model, "Model document");
  validate->add_option("--tile-m", o.tile_m, "Output channels per tile")->check(CLI::NonNegativeNumber);
  validate->add_option("--tile-rows", o.tile_rows, "Output rows per tile")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return static_cast<int>(ErrorCategory::Parse);
  }

  try {
    if (predict->parsed()) {
      cmd_predict(o, out, err);
    } else if (sim->parsed()) {
      o.mode = "fine";
      cmd_predict(o, out, err);
    } else if (explore->parsed()) {
      cmd_explore(o, out);
    } else if (report->parsed()) {
      cmd_report(o, out);
    } else if (validate->parsed()) {
      cmd_validate(o, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  }
  return 0;
}

}  // namespace dnnchip::cli
