#pragma once

// Independent reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "storage_dqn/environment.hpp"
#include "storage_dqn/network.hpp"

namespace storage_dqn::testing {

// Scalar, layer-by-layer forward pass written from the layout description only.
inline DuelingOutput reference_forward(const NetworkParams& p, std::span<const double> obs) {
  std::vector<double> x(obs.begin(), obs.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double shift = p.input_shift.empty() ? 0.0 : p.input_shift[i];
    const double scale = p.input_scale.empty() ? 1.0 : p.input_scale[i];
    x[i] = (x[i] - shift) * scale;
  }
  auto dense = [&](const DenseShape& s, const std::vector<double>& in, bool relu) {
    std::vector<double> out(static_cast<std::size_t>(s.out));
    for (int o = 0; o < s.out; ++o) {
      double acc = p.values[s.bias_offset + static_cast<std::size_t>(o)];
      for (int i = 0; i < s.in; ++i)
        acc += in[static_cast<std::size_t>(i)] * p.values[s.weight_offset + static_cast<std::size_t>(i * s.out + o)];
      out[static_cast<std::size_t>(o)] = relu ? std::max(0.0, acc) : acc;
    }
    return out;
  };
  for (const auto& s : p.trunk) x = dense(s, x, true);
  std::vector<double> v = x, a = x;
  for (std::size_t i = 0; i < p.value.size(); ++i) v = dense(p.value[i], v, i + 1 < p.value.size());
  for (std::size_t i = 0; i < p.advantage.size(); ++i) a = dense(p.advantage[i], a, i + 1 < p.advantage.size());
  DuelingOutput out;
  out.value = v[0];
  const double mean = (a[0] + a[1] + a[2]) / 3.0;
  for (int k = 0; k < 3; ++k) {
    out.advantage[k] = a[k];
    out.q[k] = v[0] + (a[k] - mean);
  }
  return out;
}

// Signs of every hidden ReLU pre-activation over a batch, in layer order. Two parameter
// vectors with equal patterns lie on the same linear piece of the network.
inline std::vector<bool> relu_pattern(const NetworkParams& p, std::span<const std::span<const double>> batch) {
  std::vector<bool> pattern;
  auto dense = [&](const DenseShape& s, const std::vector<double>& in, bool relu) {
    std::vector<double> out(static_cast<std::size_t>(s.out));
    for (int o = 0; o < s.out; ++o) {
      double acc = p.values[s.bias_offset + static_cast<std::size_t>(o)];
      for (int i = 0; i < s.in; ++i)
        acc += in[static_cast<std::size_t>(i)] * p.values[s.weight_offset + static_cast<std::size_t>(i * s.out + o)];
      if (relu) pattern.push_back(acc > 0.0);
      out[static_cast<std::size_t>(o)] = relu ? std::max(0.0, acc) : acc;
    }
    return out;
  };
  for (const auto& obs : batch) {
    std::vector<double> x(obs.begin(), obs.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double shift = p.input_shift.empty() ? 0.0 : p.input_shift[i];
      const double scale = p.input_scale.empty() ? 1.0 : p.input_scale[i];
      x[i] = (x[i] - shift) * scale;
    }
    for (const auto& s : p.trunk) x = dense(s, x, true);
    std::vector<double> v = x, a = x;
    for (std::size_t i = 0; i + 1 < p.value.size(); ++i) v = dense(p.value[i], v, true);
    for (std::size_t i = 0; i + 1 < p.advantage.size(); ++i) a = dense(p.advantage[i], a, true);
  }
  return pattern;
}

// Forces the network outputs: the last value/advantage layers ignore their input.
inline void force_outputs(NetworkParams& p, double value, const QValues& advantage) {
  const DenseShape& vs = p.value.back();
  const DenseShape& as = p.advantage.back();
  std::fill_n(p.values.begin() + static_cast<std::ptrdiff_t>(vs.weight_offset), vs.in * vs.out, 0.0);
  std::fill_n(p.values.begin() + static_cast<std::ptrdiff_t>(as.weight_offset), as.in * as.out, 0.0);
  p.values[vs.bias_offset] = value;
  for (int k = 0; k < 3; ++k) p.values[as.bias_offset + static_cast<std::size_t>(k)] = advantage[k];
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Coordinates above `tolerance` whose +-step stencil crosses a ReLU kink. Central
  // differences do not estimate a derivative there, so they are left out of max_rel_error.
  std::size_t kinked = 0;
};

// Central differences on `coords` randomly chosen parameters (all when coords >= size).
// Relative error |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradCheckResult gradient_check(const NetworkParams& params, std::span<const BatchItem> batch,
                                      std::span<const double> weights, std::size_t coords, std::mt19937_64& rng,
                                      double step = 1e-5, double floor = 1e-6, double tolerance = 1e-4) {
  const NetworkParams grad = backward(params, batch, weights);
  std::vector<std::span<const double>> inputs;
  for (const auto& item : batch) inputs.push_back(item.obs);
  const auto pattern = relu_pattern(params, inputs);
  std::vector<std::size_t> idx(params.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (coords < idx.size()) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(coords);
  }
  NetworkParams probe = params;
  GradCheckResult r;
  for (std::size_t i : idx) {
    const double orig = probe.values[i];
    probe.values[i] = orig + step;
    const double up = loss(probe, batch, weights);
    probe.values[i] = orig - step;
    const double down = loss(probe, batch, weights);
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = grad.values[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > tolerance) {
      const bool down_kink = relu_pattern(probe, inputs) != pattern;
      probe.values[i] = orig + step;
      const bool up_kink = relu_pattern(probe, inputs) != pattern;
      if (down_kink || up_kink) {
        probe.values[i] = orig;
        ++r.kinked;
        continue;
      }
    }
    probe.values[i] = orig;
    r.max_rel_error = std::max(r.max_rel_error, rel);
    ++r.checked;
  }
  return r;
}

// Exhaustive minimum-cost dispatch by plain recursion over every action sequence.
inline double exhaustive_cost(std::span<const double> load, const TariffSchedule& tariff,
                              const BatteryConfig& battery, const DemandResponseConfig& dr) {
  const std::size_t T = load.size();
  double best = INFINITY;
  std::vector<int> actions(T, 0);
  std::size_t total = 1;
  for (std::size_t t = 0; t < T; ++t) total *= 3;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    double energy = battery.initial_wh(), day = 0.0, milli = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const auto a = static_cast<Action>(c % 3);
      c /= 3;
      const auto h = simulate_hour(battery, tariff, dr, static_cast<int>(t), energy, day, a, load[t]);
      energy = h.battery.new_energy;
      day += h.battery.grid_draw;
      milli += h.cost_milli;
    }
    best = std::min(best, milli / 1000.0);
  }
  return best;
}

}  // namespace storage_dqn::testing

#include <map>
#include <utility>

namespace storage_dqn::testing {

// Forward dynamic program over the exact set of reachable (energy, day grid) states,
// with no quantization. Handles any number of hours within one episode.
inline double reachable_state_cost(std::span<const double> load, const TariffSchedule& tariff,
                                   const BatteryConfig& battery, const DemandResponseConfig& dr) {
  const bool track = dr.enabled && dr.mode == DemandResponseMode::DailyCumulative;
  std::map<std::pair<double, double>, double> frontier{{{battery.initial_wh(), 0.0}, 0.0}};
  for (std::size_t t = 0; t < load.size(); ++t) {
    std::map<std::pair<double, double>, double> next;
    for (const auto& [state, milli] : frontier) {
      for (int a = 0; a < 3; ++a) {
        const auto h = simulate_hour(battery, tariff, dr, static_cast<int>(t % 24), state.first, state.second,
                                     static_cast<Action>(a), load[t]);
        // beyond the limit every extra Wh is penalized alike, so cap the tracked total
        const double day = track ? std::min(dr.limit_wh, state.second + h.battery.grid_draw) : 0.0;
        const std::pair<double, double> key{h.battery.new_energy, day};
        const double v = milli + h.cost_milli;
        auto it = next.find(key);
        if (it == next.end() || v < it->second) next[key] = v;
      }
    }
    frontier = std::move(next);
  }
  double best = INFINITY;
  for (const auto& [state, milli] : frontier) best = std::min(best, milli);
  return best / 1000.0;
}

}  // namespace storage_dqn::testing
