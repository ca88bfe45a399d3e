#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dnnchip/ip_kind.hpp"

namespace dnnchip {

// Unit costs of one IP implementation. Energies in joules, latencies in
// seconds. Warm-up terms are paid once per IP, control terms once per state.
struct IpCostParams {
  double e_warmup = 0.0;
  double l_warmup = 0.0;
  double e_control = 0.0;
  double l_control = 0.0;  // data-path and memory only
  double e_mac = 0.0;      // computation only
  double l_mac = 0.0;      // seconds per beat of U MACs
  double e_bit = 0.0;      // data-path and memory only
  double l_bit = 0.0;      // seconds per port-width beat
  friend bool operator==(const IpCostParams&, const IpCostParams&) = default;
};

struct CostEntry {
  std::string impl;
  IpKind kind = IpKind::Computation;
  std::string technology;
  IpCostParams params;
  friend bool operator==(const CostEntry&, const CostEntry&) = default;
};

// Per-inference overhead of the host CPU / on-chip controller.
struct HostOverhead {
  double energy_j = 0.0;
  double latency_s = 0.0;
  friend bool operator==(const HostOverhead&, const HostOverhead&) = default;
};

class UnitCostLibrary {
 public:
  UnitCostLibrary() = default;
  UnitCostLibrary(std::string technology, std::string provenance, std::vector<CostEntry> entries,
                  std::uint64_t mul_per_decode = 0, HostOverhead host = {});

  // Exact, case-sensitive match. Throws "unknown implementation" otherwise.
  const CostEntry& lookup(std::string_view impl, std::string_view technology) const;
  const CostEntry* find(std::string_view impl, std::string_view technology) const;

  const std::string& technology() const { return technology_; }
  const std::string& provenance() const { return provenance_; }
  const std::vector<CostEntry>& entries() const { return entries_; }
  std::uint64_t mul_per_decode() const { return mul_per_decode_; }
  const HostOverhead& host() const { return host_; }

  friend bool operator==(const UnitCostLibrary& a, const UnitCostLibrary& b) {
    return a.technology_ == b.technology_ && a.provenance_ == b.provenance_ && a.entries_ == b.entries_ &&
           a.mul_per_decode_ == b.mul_per_decode_ && a.host_ == b.host_;
  }

 private:
  std::string technology_;
  std::string provenance_;
  std::vector<CostEntry> entries_;
  std::uint64_t mul_per_decode_ = 0;
  HostOverhead host_;
};

UnitCostLibrary load_library(std::string_view document);
std::string serialize_library(const UnitCostLibrary& library);

}  // namespace dnnchip
