#include "dnnchip/explorer.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <numeric>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "dnnchip/error.hpp"
#include "dnnchip/pipeline.hpp"

namespace dnnchip {
namespace {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
// The exception of the lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  const auto workers = std::max<std::size_t>(1, std::min<std::size_t>(threads == 0 ? 1 : threads, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (auto i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<TemplateParams> expand_grid(const TemplateSpec& spec) {
  std::vector<TemplateParams> out{TemplateParams{}};
  for (const auto& [name, values] : spec.grid) {  // std::map: sorted keys
    if (values.empty()) {
      fail(ErrorCategory::Validation, fmt::format("{}: empty grid for '{}'", to_string(spec.kind), name));
    }
    std::vector<TemplateParams> next;
    next.reserve(out.size() * values.size());
    for (const auto& partial : out) {
      for (auto v : values) {
        auto p = partial;
        p[name] = v;
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  return out;
}

bool supports_model(TemplateKind kind, const DnnModel& model) {
  const auto supported = template_layer_support(kind);
  return std::all_of(model.layers.begin(), model.layers.end(), [&](const LayerSpec& layer) {
    return std::find(supported.begin(), supported.end(), layer.kind) != supported.end();
  });
}

// Resources of the template with every grid parameter at its smallest value.
ResourceReport resource_floor(const TemplateSpec& spec, const UnitCostLibrary& costs, std::string_view technology) {
  TemplateParams smallest;
  for (const auto& [name, values] : spec.grid) smallest[name] = *std::min_element(values.begin(), values.end());
  return resource_usage(build_graph(instantiate_template(spec.kind, smallest, technology), costs), costs);
}

bool fully_pipelined(const AccelGraph& graph, const std::string& ip, const std::vector<std::string>& consumers) {
  if (consumers.empty()) {
    const auto producers = producers_of(graph, ip);
    return !producers.empty() && std::all_of(producers.begin(), producers.end(), [&](const std::string& p) {
      return graph.pipelined.contains({p, ip});
    });
  }
  return std::all_of(consumers.begin(), consumers.end(),
                     [&](const std::string& c) { return graph.pipelined.contains({ip, c}); });
}

}  // namespace

std::string DesignPoint::id() const { return fmt::format("{}-{:04}", to_string(kind), index); }

std::string Candidate::id() const { return fmt::format("{}/v{}", point.id(), variant); }

AccelGraph realize(const DesignPoint& point, const DnnModel& model, const UnitCostLibrary& costs,
                   std::string_view technology) {
  const auto graph = build_graph(instantiate_template(point.kind, point.params, technology), costs);
  return bind_mapping(graph, model, point.schedule);
}

DesignSpace enumerate_stage1(std::shared_ptr<const DnnModel> model, const AppSpec& spec,
                             const std::vector<TemplateSpec>& pool, const std::vector<DataSchedule>& schedules,
                             const UnitCostLibrary& costs, std::string_view technology) {
  if (!model) fail(ErrorCategory::Validation, "design space needs a model");
  check_app_spec(spec);
  DesignSpace space;
  space.model = model;
  space.technology = std::string(technology);
  const std::vector<DataSchedule> plans = schedules.empty() ? std::vector<DataSchedule>{DataSchedule{}} : schedules;
  for (const auto& tmpl : pool) {
    if (!supports_model(tmpl.kind, *model)) continue;
    const auto floor = resource_floor(tmpl, costs, technology);
    if (floor.mul_count > spec.budget.mul || floor.onchip_mem_bits > spec.budget.mem_bits) continue;
    for (const auto& params : expand_grid(tmpl)) {
      for (const auto& plan : plans) {
        space.points.push_back(DesignPoint{space.points.size(), tmpl.kind, params, plan});
      }
    }
  }
  if (space.points.empty()) {
    fail(ErrorCategory::Validation, "no feasible template: every template lacks a layer kind or exceeds the budget");
  }
  space.n1 = space.points.size();
  return space;
}

void subsample(DesignSpace& space, std::size_t limit, std::uint64_t seed) {
  const auto n = space.points.size();
  if (limit >= n) return;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < limit; ++i) {
    const auto j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(order[i], order[j]);
  }
  order.resize(limit);
  std::sort(order.begin(), order.end());
  std::vector<DesignPoint> kept;
  kept.reserve(limit);
  for (auto i : order) kept.push_back(space.points[i]);
  space.points = std::move(kept);
}

std::string budget_violation(const ResourceReport& resources, double energy_j, double latency_s, const AppSpec& spec) {
  if (resources.mul_count > spec.budget.mul) {
    return fmt::format("multipliers {} > budget {}", resources.mul_count, spec.budget.mul);
  }
  if (resources.onchip_mem_bits > spec.budget.mem_bits) {
    return fmt::format("on-chip memory {} bits > budget {}", resources.onchip_mem_bits, spec.budget.mem_bits);
  }
  if (spec.budget.bus_bits && resources.datapath_bits > *spec.budget.bus_bits) {
    return fmt::format("data-path width {} bits > budget {}", resources.datapath_bits, *spec.budget.bus_bits);
  }
  if (latency_s > 1.0 / spec.throughput_fps_min) {
    return fmt::format("latency {} s misses {} fps", latency_s, spec.throughput_fps_min);
  }
  if (latency_s > 0.0 && energy_j / latency_s > spec.power_budget_w) {
    return fmt::format("power {} W > budget {} W", energy_j / latency_s, spec.power_budget_w);
  }
  return {};
}

Stage1Result prune_stage1(const DesignSpace& space, const AppSpec& spec, const UnitCostLibrary& costs,
                          std::size_t keep, unsigned threads) {
  if (!space.model) fail(ErrorCategory::Validation, "design space needs a model");
  Stage1Result result;
  result.evaluations.resize(space.points.size());
  parallel_for(space.points.size(), threads, [&](std::size_t i) {
    auto& eval = result.evaluations[i];
    eval.point = space.points[i];
    try {
      const auto graph = realize(eval.point, *space.model, costs, space.technology);
      const auto report = predict_coarse(graph, costs);
      eval.energy_j = report.energy_j;
      eval.latency_s = report.latency_seconds;
      eval.latency_cycles = report.latency_cycles;
      eval.resources = report.resources;
      eval.objective = objective_value(spec.objective, eval.energy_j, eval.latency_s);
      eval.reason = budget_violation(eval.resources, eval.energy_j, eval.latency_s, spec);
      eval.feasible = eval.reason.empty();
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::Validation) throw;
      eval.feasible = false;
      eval.reason = e.what();
    }
  });

  for (const auto& eval : result.evaluations) {
    if (eval.feasible) result.ranked.push_back(eval);
  }
  std::stable_sort(result.ranked.begin(), result.ranked.end(), [](const Stage1Eval& a, const Stage1Eval& b) {
    if (a.objective != b.objective) return a.objective < b.objective;
    return a.point.index < b.point.index;
  });
  if (result.ranked.size() > keep) result.ranked.resize(keep);

  result.survivors.model = space.model;
  result.survivors.technology = space.technology;
  result.survivors.n1 = space.n1;
  for (const auto& eval : result.ranked) result.survivors.points.push_back(eval.point);
  result.survivors.n2 = result.survivors.points.size();
  return result;
}

OptimizationResult optimize_graph(const AccelGraph& graph, const ResourceBudget& budget, const UnitCostLibrary& costs,
                                  const ConvergenceRule& rule) {
  OptimizationResult result;
  result.graph = graph;
  result.initial = simulate(graph, costs);
  result.final = result.initial;
  result.stop_reason = "max iterations";

  std::size_t stale = 0;
  for (std::size_t iteration = 1; iteration <= rule.max_iterations; ++iteration) {
    const auto ip = result.final.bottleneck;
    if (ip.empty()) {
      result.stop_reason = "no bottleneck";
      break;
    }
    const auto consumers = consumers_of(result.graph, ip);
    const bool sink = consumers.empty();
    const char* pipeline_action = sink ? "pipeline_into" : "pipeline";
    auto pipeline = [&] {
      return sink ? insert_pipeline_into(result.graph, ip) : insert_pipeline(result.graph, ip);
    };
    auto reallocate = [&] { return reallocate_resource(result.graph, ip, budget, costs); };

    struct Attempt {
      std::string action;
      std::function<GraphEdit()> apply;
    };
    std::vector<Attempt> attempts;
    if (!fully_pipelined(result.graph, ip, consumers)) {
      attempts = {{pipeline_action, pipeline}, {"reallocate", reallocate}};
    } else {
      attempts = {{"reallocate", reallocate}, {"deepen", pipeline}};
    }

    bool accepted = false;
    bool realloc_blocked = false;
    std::vector<std::string> notes;
    for (const auto& attempt : attempts) {
      OptimizationStep step{iteration, ip, attempt.action, ip, result.final.total_cycles, false, {}};
      auto edit = attempt.apply();
      if (!edit.applied) {
        step.note = edit.note;
        if (attempt.action == "reallocate") realloc_blocked = true;
        notes.push_back(edit.note);
        result.log.push_back(std::move(step));
        continue;
      }
      auto sim = simulate(edit.graph, costs);
      step.latency_cycles = sim.total_cycles;
      if (sim.total_cycles >= result.final.total_cycles) {
        step.note = fmt::format("rolled back: {} cycles, best {}", sim.total_cycles, result.final.total_cycles);
        notes.push_back(step.note);
        result.log.push_back(std::move(step));
        continue;
      }
      step.accepted = true;
      result.log.push_back(std::move(step));
      const double before = static_cast<double>(result.final.total_cycles);
      const double gain = (before - static_cast<double>(sim.total_cycles)) / before;
      result.graph = std::move(edit.graph);
      result.final = std::move(sim);
      ++result.accepted_steps;
      stale = gain < rule.rel_improvement ? stale + 1 : 0;
      accepted = true;
      break;
    }
    if (!accepted) {
      result.frozen = realloc_blocked;
      result.stop_reason = realloc_blocked ? fmt::format("budget saturated at '{}'", ip)
                                           : fmt::format("no improving action at '{}'", ip);
      break;
    }
    if (stale >= rule.patience) {
      result.stop_reason = "converged";
      break;
    }
  }
  return result;
}

Stage2Result optimize_stage2(const Stage1Result& stage1, const UnitCostLibrary& costs, const AppSpec& spec,
                             const ConvergenceRule& rule, std::size_t n_opt, std::size_t variants_per_point,
                             unsigned threads) {
  const auto& space = stage1.survivors;
  if (!space.model) fail(ErrorCategory::Validation, "design space needs a model");
  const auto per_point = std::max<std::size_t>(1, variants_per_point);

  // Variant graphs of every survivor, built in parallel then flattened in order.
  std::vector<std::vector<std::pair<Candidate, AccelGraph>>> seeds(space.points.size());
  parallel_for(space.points.size(), threads, [&](std::size_t i) {
    const auto& point = space.points[i];
    auto base = realize(point, *space.model, costs, space.technology);
    const auto sim = simulate(base, costs);
    std::vector<std::string> by_load;
    for (const auto& node : base.nodes) {
      if (!node.states.empty()) by_load.push_back(node.id);
    }
    std::stable_sort(by_load.begin(), by_load.end(), [&](const std::string& a, const std::string& b) {
      const auto ba = sim.busy_cycles.at(a);
      const auto bb = sim.busy_cycles.at(b);
      if (ba != bb) return ba > bb;
      return a < b;
    });
    Candidate c;
    c.point = point;
    c.coarse = stage1.ranked[i];
    seeds[i].emplace_back(c, base);
    for (const auto& ip : by_load) {
      if (seeds[i].size() >= per_point) break;
      auto edit = insert_pipeline(base, ip);
      if (!edit.applied) continue;
      c.variant = seeds[i].size();
      c.variant_ip = ip;
      seeds[i].emplace_back(c, std::move(edit.graph));
    }
  });

  std::vector<std::pair<Candidate, AccelGraph>> jobs;
  for (auto& s : seeds) {
    for (auto& job : s) jobs.push_back(std::move(job));
  }

  Stage2Result result;
  result.n3 = jobs.size();
  std::vector<Candidate> done(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    auto c = jobs[i].first;
    c.optimization = optimize_graph(jobs[i].second, spec.budget, costs, rule);
    c.energy_j = c.optimization.final.energy_j;
    c.latency_s = c.optimization.final.latency_seconds;
    c.objective = objective_value(spec.objective, c.energy_j, c.latency_s);
    done[i] = std::move(c);
  });
  std::stable_sort(done.begin(), done.end(), [](const Candidate& a, const Candidate& b) {
    if (a.objective != b.objective) return a.objective < b.objective;
    if (a.point.index != b.point.index) return a.point.index < b.point.index;
    return a.variant < b.variant;
  });
  if (done.size() > n_opt) done.resize(n_opt);
  result.ranked = std::move(done);
  return result;
}

}  // namespace dnnchip
