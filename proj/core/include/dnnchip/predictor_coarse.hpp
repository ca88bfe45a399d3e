#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dnnchip/accel_graph.hpp"
#include "dnnchip/cost_library.hpp"

namespace dnnchip {

struct IpEstimate {
  double energy_j = 0.0;
  std::uint64_t latency_cycles = 0;  // at the IP's own clock
  double latency_seconds = 0.0;
};

struct ResourceReport {
  std::map<std::string, std::uint64_t> mem_bits_by_impl;
  std::uint64_t onchip_mem_bits = 0;
  std::uint64_t mul_count = 0;  // includes mul_decode_count
  std::uint64_t mul_decode_count = 0;
  std::uint64_t datapath_bits = 0;  // summed port widths
};

struct PredictionReport {
  double energy_j = 0.0;
  double clock_mhz = 0.0;
  std::uint64_t path_cycles = 0;  // summed per-round critical paths
  std::uint64_t host_cycles = 0;
  std::uint64_t latency_cycles = 0;
  double latency_seconds = 0.0;
  std::vector<std::string> critical_path;  // concatenated over rounds
  ResourceReport resources;
  std::vector<std::pair<std::string, IpEstimate>> per_ip;  // node order

  const IpEstimate* ip(std::string_view id) const;
};

// Energy and latency of one IP from its state machine; stateless IPs cost
// their warm-up only.
IpEstimate ip_estimate(const IpNode& ip, const UnitCostLibrary& costs, std::string_view technology);

ResourceReport resource_usage(const AccelGraph& graph, const UnitCostLibrary& costs);

// Analytical prediction without inter-IP overlap: rounds execute back to back
// and each round costs its critical path at the global clock.
PredictionReport predict_coarse(const AccelGraph& graph, const UnitCostLibrary& costs);

std::string report_to_json(const PredictionReport& report);
// Columns: scope,node,energy_j,latency_cycles,latency_seconds
std::string report_to_csv(const PredictionReport& report);

}  // namespace dnnchip
