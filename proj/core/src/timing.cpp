#include "dnnchip/timing.hpp"

#include <algorithm>
#include <cmath>

namespace dnnchip {

std::uint64_t seconds_to_cycles(double seconds, double freq_mhz) {
  const double cycles = seconds * freq_mhz * 1e6;
  if (!(cycles > 0.0)) return 0;
  const double nearest = std::round(cycles);
  if (std::abs(cycles - nearest) <= 1e-9 * std::max(1.0, cycles)) return static_cast<std::uint64_t>(nearest);
  return static_cast<std::uint64_t>(std::ceil(cycles));
}

StateCost state_cost(const IpNode& node, const IpState& state, const IpCostParams& params) {
  StateCost cost;
  switch (node.kind) {
    case IpKind::Computation: {
      const auto unroll = static_cast<std::uint64_t>(std::max<std::int64_t>(1, node.compute().unroll));
      const auto beats = (state.work + unroll - 1) / unroll;
      cost.seconds = static_cast<double>(beats) * params.l_mac;
      cost.energy_j = params.e_control + params.e_mac * static_cast<double>(unroll) * static_cast<double>(beats);
      break;
    }
    case IpKind::DataPath:
    case IpKind::Memory: {
      std::uint64_t width = 1;
      if (node.kind == IpKind::DataPath) {
        width = static_cast<std::uint64_t>(std::max<std::int64_t>(1, node.datapath().port_width_bits));
      }
      const auto beats = (state.work + width - 1) / width;
      cost.seconds = params.l_control + static_cast<double>(beats) * params.l_bit;
      cost.energy_j = params.e_control + static_cast<double>(state.work) * params.e_bit;
      break;
    }
  }
  return cost;
}

std::uint64_t state_cycles(const StateCost& cost, double clock_mhz) {
  return std::max<std::uint64_t>(1, seconds_to_cycles(cost.seconds, clock_mhz));
}

}  // namespace dnnchip
