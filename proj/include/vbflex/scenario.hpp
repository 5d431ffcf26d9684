#pragma once

// Reference building, synthetic weather/disturbance generator and tariffs.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "vbflex/core.hpp"
#include "vbflex/thermal.hpp"

namespace vbflex {

/// Five-zone star building: zone 0 shares a wall with each of zones 1..4.
/// Values in SI (C 1.5e7 J/K, R_oi 0.03 K/W, R_adj 0.014 K/W, c_p 1012,
/// kappa_f 80, half-hour steps).
inline MultiZoneParams reference_building_params() {
  MultiZoneParams p;
  p.n_zones = 5;
  p.C_th.assign(5, 1.5e7);
  p.R_oi.assign(5, 0.03);
  p.T_set.assign(5, 25.0);
  p.delta.assign(5, 1.0);
  p.m_min.assign(5, 0.0);
  p.m_max.assign(5, 0.5);
  for (std::size_t j = 1; j < 5; ++j) p.set_adjacency(0, j, 0.014);
  p.c_p = 1012.0;
  p.T_sup = 15.0;
  p.d_r = 0.8;
  p.kappa_f = 80.0;
  p.COP = 1.0;
  p.dt = 1800.0;
  return p;
}

struct SynthExoSpec {
  std::uint64_t seed = 1;
  double T_mean = 30.0;
  double T_amplitude = 5.0;
  double T_peak_hour = 15.0;
  double T_noise = 1.0;          // half-width of uniform noise, degC
  double occupied_start = 8.0;   // hour of day
  double occupied_end = 18.0;
  double Q_occupied = 2500.0;    // W per zone
  double Q_unoccupied = 800.0;
  double Q_jitter = 0.1;         // relative half-width of uniform jitter
  std::vector<double> zone_factor;  // per zone multiplier; empty means all 1
};

inline double hour_of_step(std::size_t k, double dt) {
  const double h = static_cast<double>(k) * dt / 3600.0;
  return std::fmod(h, 24.0);
}

inline ExogenousSeries synth_exo(const SynthExoSpec& spec, std::size_t n_zones, std::size_t K, double dt) {
  if (!(dt > 0.0)) throw Error("synth_exo: dt must be positive");
  if (!spec.zone_factor.empty() && spec.zone_factor.size() != n_zones)
    throw Error("synth_exo: zone_factor must have one entry per zone");
  ExogenousSeries exo;
  exo.T_out.resize(K);
  exo.Q_dist.assign(n_zones, std::vector<double>(K));
  Rng weather(derive_seed(spec.seed, "exo.weather"));
  for (std::size_t k = 0; k < K; ++k) {
    const double h = hour_of_step(k, dt);
    const double noise = spec.T_noise > 0.0 ? weather.uniform(-spec.T_noise, spec.T_noise) : 0.0;
    exo.T_out[k] = spec.T_mean + spec.T_amplitude * std::cos(2.0 * std::numbers::pi * (h - spec.T_peak_hour) / 24.0) + noise;
  }
  for (std::size_t i = 0; i < n_zones; ++i) {
    Rng load(derive_seed(spec.seed, "exo.disturbance", i));
    const double factor = spec.zone_factor.empty() ? 1.0 : spec.zone_factor[i];
    for (std::size_t k = 0; k < K; ++k) {
      const double h = hour_of_step(k, dt);
      const bool occupied = h >= spec.occupied_start && h < spec.occupied_end;
      const double base = occupied ? spec.Q_occupied : spec.Q_unoccupied;
      const double jitter = spec.Q_jitter > 0.0 ? load.uniform(-spec.Q_jitter, spec.Q_jitter) : 0.0;
      exo.Q_dist[i][k] = factor * base * (1.0 + jitter);
    }
  }
  return exo;
}

struct TouPeriod {
  double start_hour = 0.0;
  double end_hour = 24.0;
  double price = 0.0;  // currency per kWh
};

inline std::vector<TouPeriod> default_tou_periods() {
  return {{0, 8, 0.10}, {8, 12, 0.20}, {12, 18, 0.35}, {18, 22, 0.20}, {22, 24, 0.10}};
}

/// Expands a daily time-of-use schedule onto K steps.
inline std::vector<double> tou_tariff(const std::vector<TouPeriod>& periods, std::size_t K, double dt) {
  if (periods.empty()) throw Error("tou_tariff: no periods");
  std::vector<double> c(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double h = hour_of_step(k, dt);
    bool found = false;
    for (const auto& p : periods) {
      if (p.price < 0.0) throw Error("tou_tariff: negative price");
      if (h >= p.start_hour && h < p.end_hour) {
        c[k] = p.price;
        found = true;
        break;
      }
    }
    if (!found) throw Error("tou_tariff: hour " + std::to_string(h) + " not covered by any period");
  }
  return c;
}

}  // namespace vbflex
