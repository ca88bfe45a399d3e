#pragma once

#include <cstdint>

#include "dnnchip/accel_graph.hpp"
#include "dnnchip/cost_library.hpp"

namespace dnnchip {

// Whole cycles needed to cover `seconds` at `freq_mhz`, rounded up. Values
// within 1e-9 (relative) of an integer snap to it so that exact multiples
// of the clock period are not bumped by floating-point noise.
std::uint64_t seconds_to_cycles(double seconds, double freq_mhz);

struct StateCost {
  double seconds = 0.0;
  double energy_j = 0.0;
};

// Computation: beats = ceil(work / U), time = beats * l_mac,
//   energy = e_control + e_mac * U * beats.
// Data path: time = l_control + ceil(work / port_width) * l_bit,
//   energy = e_control + work * e_bit. Memories move one bit per beat.
StateCost state_cost(const IpNode& node, const IpState& state, const IpCostParams& params);

// Duration of a state in cycles of `clock_mhz`; never less than one cycle.
std::uint64_t state_cycles(const StateCost& cost, double clock_mhz);

}  // namespace dnnchip
