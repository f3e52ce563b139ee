#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dbfl/errors.hpp"

namespace dbfl {

struct EnergyParams {
  double attenuation = 2.0;
  double cycle = 0.275;          // per-node consumption cycle, [0.2, 0.35]
  double compute_coeff = 1e-4;   // energy per sample-epoch
  double payload_scale = 1e-3;   // energy per meter^attenuation per unit payload
};

inline void validate(const EnergyParams& p) {
  if (!(p.attenuation > 0.0) || !std::isfinite(p.attenuation)) throw InvalidArgument("attenuation must be > 0");
  if (!(p.cycle >= 0.2 && p.cycle <= 0.35)) throw InvalidArgument("consumption cycle must be in [0.2, 0.35]");
  if (!(p.compute_coeff >= 0.0) || !(p.payload_scale >= 0.0)) {
    throw InvalidArgument("energy coefficients must be nonnegative");
  }
}

struct EnergyCost {
  double transmission = 0.0;
  double compute = 0.0;

  double total() const { return transmission + compute; }
};

// cycle * (payload_scale * distance^attenuation * payload + compute_coeff * samples * epochs)
inline EnergyCost round_energy_parts(const EnergyParams& p, double distance_m, double payload, double samples,
                                     double epochs) {
  if (!(distance_m >= 0.0 && payload >= 0.0 && samples >= 0.0 && epochs >= 0.0)) {
    throw InvalidArgument("round_energy inputs must be nonnegative");
  }
  // d*d is exactly rounded, which keeps the distance-doubling ratio exact.
  const double spread = p.attenuation == 2.0 ? distance_m * distance_m : std::pow(distance_m, p.attenuation);
  return {p.cycle * (p.payload_scale * spread * payload),
          p.cycle * (p.compute_coeff * samples * epochs)};
}

inline double round_energy(const EnergyParams& p, double distance_m, double payload, double samples, double epochs) {
  return round_energy_parts(p, distance_m, payload, samples, epochs).total();
}

// Energy is held in integer nano-units so that the ledger of debits sums to
// initial minus remaining exactly.
using EnergyTicks = std::int64_t;
inline constexpr double kTicksPerUnit = 1e9;

inline EnergyTicks to_ticks(double units) {
  if (!(units >= 0.0) || !std::isfinite(units)) throw InvalidArgument("energy amount must be finite and >= 0");
  return static_cast<EnergyTicks>(std::llround(units * kTicksPerUnit));
}

inline double from_ticks(EnergyTicks t) { return static_cast<double>(t) / kTicksPerUnit; }

class EnergyState {
 public:
  EnergyState() = default;
  explicit EnergyState(std::span<const double> initial) {
    for (double v : initial) {
      if (!(v >= 0.0 && v <= 100.0)) throw InvalidArgument("initial energy must be in [0, 100]");
      remaining_.push_back(to_ticks(v));
    }
    initial_ = remaining_;
    dead_.assign(remaining_.size(), false);
    for (std::size_t i = 0; i < remaining_.size(); ++i) dead_[i] = remaining_[i] == 0;
  }

  std::size_t size() const { return remaining_.size(); }
  double remaining(std::size_t i) const { return from_ticks(remaining_[i]); }
  double initial(std::size_t i) const { return from_ticks(initial_[i]); }
  EnergyTicks remaining_ticks(std::size_t i) const { return remaining_[i]; }
  EnergyTicks initial_ticks(std::size_t i) const { return initial_[i]; }
  bool dead(std::size_t i) const { return dead_[i]; }

  // Overrides a node's starting charge; only valid before any debit.
  void reset_initial(std::size_t i, double units) {
    if (remaining_[i] != initial_[i]) throw InvalidArgument("cannot reset a node that already spent energy");
    remaining_[i] = initial_[i] = to_ticks(units);
    dead_[i] = remaining_[i] == 0;
  }

  // Debits each node, clamping at zero; returns the debits actually applied.
  std::vector<EnergyTicks> apply_round(std::span<const double> costs) {
    if (costs.size() != remaining_.size()) throw DimensionMismatch("one cost per node required");
    std::vector<EnergyTicks> debit(costs.size(), 0);
    for (std::size_t i = 0; i < costs.size(); ++i) {
      const EnergyTicks want = to_ticks(costs[i]);
      debit[i] = std::min(want, remaining_[i]);
      remaining_[i] -= debit[i];
      if (remaining_[i] == 0) dead_[i] = true;
    }
    return debit;
  }

 private:
  std::vector<EnergyTicks> remaining_;
  std::vector<EnergyTicks> initial_;
  std::vector<bool> dead_;
};

}  // namespace dbfl
