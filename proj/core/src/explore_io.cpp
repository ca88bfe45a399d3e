#include "dnnchip/explore_io.hpp"

#include <algorithm>
#include <chrono>
#include <memory>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "dnnchip/error.hpp"
#include "dnnchip/io.hpp"
#include "json_util.hpp"

namespace dnnchip {
namespace {

using detail::json;
using detail::ordered_json;

constexpr std::int64_t kConfigVersion = 1;
constexpr std::int64_t kManifestVersion = 1;

std::size_t get_count(const json& object, std::string_view key, std::string_view context, std::size_t fallback,
                      std::size_t min = 1) {
  auto it = object.find(std::string(key));
  if (it == object.end()) return fallback;
  const auto v = detail::as_int(*it, key, context);
  if (v < static_cast<std::int64_t>(min)) {
    fail(ErrorCategory::Validation, fmt::format("{}: '{}' must be >= {} (got {})", context, key, min, v));
  }
  return static_cast<std::size_t>(v);
}

std::uint64_t get_positive(const json& object, std::string_view key, std::string_view context) {
  const auto v = detail::get_int(object, key, context);
  if (v <= 0) fail(ErrorCategory::Validation, fmt::format("{}: '{}' must be > 0 (got {})", context, key, v));
  return static_cast<std::uint64_t>(v);
}

AppSpec parse_app(const json& j) {
  constexpr std::string_view ctx = "explore config app";
  detail::require_object(j, ctx);
  detail::reject_unknown_fields(j, {"objective", "throughput_fps_min", "power_budget_w", "resource_budget"}, ctx);
  AppSpec app;
  const auto name = detail::get_string(j, "objective", ctx);
  auto objective = parse_objective(name);
  if (!objective) fail(ErrorCategory::Parse, fmt::format("{}: unknown objective '{}'", ctx, name));
  app.objective = *objective;
  app.throughput_fps_min = detail::get_number(j, "throughput_fps_min", ctx);
  app.power_budget_w = detail::get_number(j, "power_budget_w", ctx);
  const auto& budget = detail::require_field(j, "resource_budget", ctx);
  constexpr std::string_view bctx = "explore config resource_budget";
  detail::require_object(budget, bctx);
  detail::reject_unknown_fields(budget, {"mul", "mem_bits", "bus_bits"}, bctx);
  app.budget.mul = get_positive(budget, "mul", bctx);
  app.budget.mem_bits = get_positive(budget, "mem_bits", bctx);
  if (budget.contains("bus_bits")) app.budget.bus_bits = get_positive(budget, "bus_bits", bctx);
  check_app_spec(app);
  return app;
}

TemplateSpec parse_template(const json& j) {
  constexpr std::string_view ctx = "explore config template";
  detail::require_object(j, ctx);
  detail::reject_unknown_fields(j, {"kind", "params"}, ctx);
  TemplateSpec spec;
  const auto name = detail::get_string(j, "kind", ctx);
  auto kind = parse_template_kind(name);
  if (!kind) fail(ErrorCategory::Parse, fmt::format("{}: unknown template '{}'", ctx, name));
  spec.kind = *kind;
  const auto& ranges = template_parameters(spec.kind);
  if (auto it = j.find("params"); it != j.end()) {
    detail::require_object(*it, ctx);
    for (const auto& [param, values] : it->items()) {
      auto range = std::find_if(ranges.begin(), ranges.end(), [&](const ParamRange& r) { return r.name == param; });
      if (range == ranges.end()) {
        fail(ErrorCategory::Validation, fmt::format("{}: unknown parameter '{}'", name, param));
      }
      if (!values.is_array() || values.empty()) {
        fail(ErrorCategory::Parse, fmt::format("{}: '{}' must be a non-empty array", name, param));
      }
      auto& grid = spec.grid[param];
      for (const auto& v : values) {
        const auto value = detail::as_int(v, param, name);
        if (value < range->min || value > range->max) {
          fail(ErrorCategory::Validation, fmt::format("{}: out-of-range parameter {} = {} (allowed [{}, {}])", name,
                                                      param, value, range->min, range->max));
        }
        grid.push_back(value);
      }
    }
  }
  return spec;
}

DataSchedule parse_schedule(const json& j) {
  constexpr std::string_view ctx = "explore config schedule";
  detail::require_object(j, ctx);
  detail::reject_unknown_fields(j, {"tile_m", "tile_rows"}, ctx);
  DataSchedule s;
  s.tile_m = static_cast<std::int64_t>(get_count(j, "tile_m", ctx, 0, 0));
  s.tile_rows = static_cast<std::int64_t>(get_count(j, "tile_rows", ctx, 0, 0));
  return s;
}

ordered_json params_json(const TemplateParams& params) {
  ordered_json out = ordered_json::object();
  for (const auto& [k, v] : params) out[k] = v;
  return out;
}

ordered_json schedule_json(const DataSchedule& s) { return {{"tile_m", s.tile_m}, {"tile_rows", s.tile_rows}}; }

ordered_json resources_json(const ResourceReport& r) {
  return {{"mul", r.mul_count},
          {"mul_decode", r.mul_decode_count},
          {"onchip_mem_bits", r.onchip_mem_bits},
          {"datapath_bits", r.datapath_bits}};
}

std::uint64_t idle_of(const SimResult& sim, const std::string& ip) {
  auto it = sim.idle_cycles.find(ip);
  return it == sim.idle_cycles.end() ? 0 : it->second;
}

struct Point2 {
  double energy;
  double latency;
};

std::vector<bool> pareto_front(const std::vector<Point2>& pts) {
  std::vector<bool> front(pts.size(), true);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size() && front[i]; ++j) {
      const bool dominates = pts[j].energy <= pts[i].energy && pts[j].latency <= pts[i].latency &&
                             (pts[j].energy < pts[i].energy || pts[j].latency < pts[i].latency);
      if (dominates) front[i] = false;
    }
  }
  return front;
}

}  // namespace

ExploreConfig parse_explore_config(std::string_view document, const std::filesystem::path& base_dir) {
  constexpr std::string_view ctx = "explore config";
  const auto j = detail::parse_json(document, ctx);
  detail::require_object(j, ctx);
  detail::reject_unknown_fields(j,
                                {"version", "model", "costs", "app", "templates", "schedules", "keep", "n_opt",
                                 "variants_per_point", "convergence", "seed", "max_stage1_points"},
                                ctx);
  detail::require_version(j, kConfigVersion, ctx);
  ExploreConfig config;
  config.model = base_dir / detail::get_string(j, "model", ctx);
  config.costs = base_dir / detail::get_string(j, "costs", ctx);
  config.app = parse_app(detail::require_field(j, "app", ctx));

  const auto& templates = detail::require_field(j, "templates", ctx);
  if (!templates.is_array() || templates.empty()) {
    fail(ErrorCategory::Parse, "explore config: 'templates' must be a non-empty array");
  }
  for (const auto& t : templates) config.templates.push_back(parse_template(t));

  if (auto it = j.find("schedules"); it != j.end()) {
    if (!it->is_array() || it->empty()) {
      fail(ErrorCategory::Parse, "explore config: 'schedules' must be a non-empty array");
    }
    config.schedules.clear();
    for (const auto& s : *it) config.schedules.push_back(parse_schedule(s));
  }
  config.keep = get_count(j, "keep", ctx, config.keep);
  config.n_opt = get_count(j, "n_opt", ctx, config.n_opt);
  config.variants_per_point = get_count(j, "variants_per_point", ctx, config.variants_per_point);
  if (auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned()) fail(ErrorCategory::Parse, "explore config: 'seed' must be a non-negative integer");
    config.seed = it->get<std::uint64_t>();
  }
  if (j.contains("max_stage1_points")) config.max_stage1_points = get_count(j, "max_stage1_points", ctx, 1);
  if (auto it = j.find("convergence"); it != j.end()) {
    constexpr std::string_view cctx = "explore config convergence";
    detail::require_object(*it, cctx);
    detail::reject_unknown_fields(*it, {"rel_improvement", "patience", "max_iterations"}, cctx);
    if (it->contains("rel_improvement")) {
      const auto r = detail::get_number(*it, "rel_improvement", cctx);
      if (!(r >= 0.0 && r < 1.0)) {
        fail(ErrorCategory::Validation, fmt::format("{}: rel_improvement must be in [0, 1) (got {})", cctx, r));
      }
      config.convergence.rel_improvement = r;
    }
    config.convergence.patience = get_count(*it, "patience", cctx, config.convergence.patience);
    config.convergence.max_iterations = get_count(*it, "max_iterations", cctx, config.convergence.max_iterations, 0);
  }
  return config;
}

ExploreConfig load_explore_config(const std::filesystem::path& file) {
  return parse_explore_config(read_text_file(file), file.parent_path());
}

ExploreRun run_explore(const ExploreConfig& config, const DnnModel& model, const UnitCostLibrary& costs,
                       unsigned threads) {
  using Clock = std::chrono::steady_clock;
  ExploreRun run;
  run.config = config;
  run.model_name = model.name;
  run.technology = costs.technology();
  run.threads = threads == 0 ? 1 : threads;

  const auto t0 = Clock::now();
  run.space = enumerate_stage1(std::make_shared<const DnnModel>(model), config.app, config.templates,
                               config.schedules, costs, costs.technology());
  if (config.max_stage1_points) subsample(run.space, *config.max_stage1_points, config.seed);
  run.stage1 = prune_stage1(run.space, config.app, costs, config.keep, run.threads);
  const auto t1 = Clock::now();
  run.stage2 = optimize_stage2(run.stage1, costs, config.app, config.convergence, config.n_opt,
                               config.variants_per_point, run.threads);
  const auto t2 = Clock::now();
  run.stage1_seconds = std::chrono::duration<double>(t1 - t0).count();
  run.stage2_seconds = std::chrono::duration<double>(t2 - t1).count();
  return run;
}

std::string manifest_json(const ExploreRun& run) {
  ordered_json m;
  m["version"] = kManifestVersion;
  m["model"] = run.model_name;
  m["technology"] = run.technology;
  m["seed"] = run.config.seed;
  m["threads"] = run.threads;
  m["app"] = {{"objective", std::string(to_string(run.config.app.objective))},
              {"throughput_fps_min", run.config.app.throughput_fps_min},
              {"power_budget_w", run.config.app.power_budget_w}};
  m["counters"] = {{"n1", run.space.n1},
                   {"evaluated", run.space.points.size()},
                   {"n2", run.stage1.survivors.n2},
                   {"n3", run.stage2.n3},
                   {"n_opt", run.stage2.ranked.size()}};
  m["status"] = run.stage2.ranked.empty() ? "no feasible design" : "ok";

  ordered_json stage1 = ordered_json::array();
  for (const auto& e : run.stage1.evaluations) {
    ordered_json row{{"id", e.point.id()},
                     {"template", std::string(to_string(e.point.kind))},
                     {"params", params_json(e.point.params)},
                     {"schedule", schedule_json(e.point.schedule)},
                     {"feasible", e.feasible}};
    if (!e.reason.empty()) row["reason"] = e.reason;
    row["energy_j"] = e.energy_j;
    row["latency_s"] = e.latency_s;
    row["latency_cycles"] = e.latency_cycles;
    row["objective"] = e.objective;
    row["resources"] = resources_json(e.resources);
    stage1.push_back(std::move(row));
  }
  m["stage1"] = std::move(stage1);

  ordered_json survivors = ordered_json::array();
  for (const auto& p : run.stage1.survivors.points) survivors.push_back(p.id());
  m["survivors"] = std::move(survivors);

  ordered_json candidates = ordered_json::array();
  for (std::size_t rank = 0; rank < run.stage2.ranked.size(); ++rank) {
    const auto& c = run.stage2.ranked[rank];
    const auto& opt = c.optimization;
    ordered_json log = ordered_json::array();
    for (const auto& s : opt.log) {
      log.push_back({{"iteration", s.iteration},
                     {"bottleneck", s.bottleneck},
                     {"action", s.action},
                     {"latency_cycles", s.latency_cycles},
                     {"accepted", s.accepted},
                     {"note", s.note}});
    }
    candidates.push_back(
        {{"rank", rank + 1},
         {"id", c.id()},
         {"template", std::string(to_string(c.point.kind))},
         {"params", params_json(c.point.params)},
         {"schedule", schedule_json(c.point.schedule)},
         {"variant", c.variant},
         {"variant_ip", c.variant_ip},
         {"coarse", {{"energy_j", c.coarse.energy_j}, {"latency_s", c.coarse.latency_s}}},
         {"initial",
          {{"total_cycles", opt.initial.total_cycles},
           {"bottleneck", opt.initial.bottleneck},
           {"bottleneck_idle", idle_of(opt.initial, opt.initial.bottleneck)}}},
         {"fine",
          {{"energy_j", c.energy_j},
           {"total_cycles", opt.final.total_cycles},
           {"latency_s", c.latency_s},
           {"bottleneck", opt.final.bottleneck},
           {"bottleneck_idle", idle_of(opt.final, opt.final.bottleneck)}}},
         {"objective", c.objective},
         {"accepted_steps", opt.accepted_steps},
         {"frozen", opt.frozen},
         {"stop_reason", opt.stop_reason},
         {"log", std::move(log)}});
  }
  m["candidates"] = std::move(candidates);
  return m.dump(2) + "\n";
}

std::string timing_json(const ExploreRun& run) {
  ordered_json t{{"stage1_seconds", run.stage1_seconds},
                 {"stage2_seconds", run.stage2_seconds},
                 {"total_seconds", run.stage1_seconds + run.stage2_seconds}};
  return t.dump(2) + "\n";
}

std::string pareto_csv(const ExploreRun& run) {
  std::string out = "stage,id,template,energy_j,latency_s,pareto\n";
  std::vector<const Stage1Eval*> feasible;
  std::vector<Point2> pts;
  for (const auto& e : run.stage1.evaluations) {
    if (!e.feasible) continue;
    feasible.push_back(&e);
    pts.push_back({e.energy_j, e.latency_s});
  }
  auto front = pareto_front(pts);
  for (std::size_t i = 0; i < feasible.size(); ++i) {
    out += fmt::format("coarse,{},{},{},{},{}\n", feasible[i]->point.id(), to_string(feasible[i]->point.kind),
                       feasible[i]->energy_j, feasible[i]->latency_s, front[i] ? 1 : 0);
  }
  pts.clear();
  for (const auto& c : run.stage2.ranked) pts.push_back({c.energy_j, c.latency_s});
  front = pareto_front(pts);
  for (std::size_t i = 0; i < run.stage2.ranked.size(); ++i) {
    const auto& c = run.stage2.ranked[i];
    out += fmt::format("fine,{},{},{},{},{}\n", c.id(), to_string(c.point.kind), c.energy_j, c.latency_s,
                       front[i] ? 1 : 0);
  }
  return out;
}

std::string format_report(std::string_view manifest, std::string_view format) {
  std::string_view sep;
  if (format == "csv") {
    sep = ",";
  } else if (format == "tsv") {
    sep = "\t";
  } else {
    fail(ErrorCategory::Validation, fmt::format("unknown report format '{}' (expected csv or tsv)", format));
  }
  const auto m = detail::parse_json(manifest, "manifest");
  detail::require_object(m, "manifest");
  detail::require_version(m, kManifestVersion, "manifest");
  const auto& candidates = detail::require_field(m, "candidates", "manifest");
  if (!candidates.is_array()) fail(ErrorCategory::Parse, "manifest: 'candidates' must be an array");

  const std::vector<std::string_view> columns{"rank",     "id",        "template",  "stage",      "variant",
                                              "energy_j", "latency_s", "objective", "bottleneck", "frozen"};
  std::string out = fmt::format("{}\n", fmt::join(columns, sep));
  for (const auto& c : candidates) {
    constexpr std::string_view ctx = "manifest candidate";
    const auto& fine = detail::require_field(c, "fine", ctx);
    std::vector<std::string> cells{
        fmt::format("{}", detail::get_int(c, "rank", ctx)),
        detail::get_string(c, "id", ctx),
        detail::get_string(c, "template", ctx),
        "fine",
        fmt::format("{}", detail::get_int(c, "variant", ctx)),
        fmt::format("{}", detail::get_number(fine, "energy_j", ctx)),
        fmt::format("{}", detail::get_number(fine, "latency_s", ctx)),
        fmt::format("{}", detail::get_number(c, "objective", ctx)),
        detail::get_string(fine, "bottleneck", ctx),
        detail::require_field(c, "frozen", ctx).get<bool>() ? "1" : "0",
    };
    out += fmt::format("{}\n", fmt::join(cells, sep));
  }
  return out;
}

}  // namespace dnnchip
