#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "gridcase/matpower.hpp"
#include "gridcase/network.hpp"
#include "gridcase/rng.hpp"

namespace gridcase::testing {

inline std::string fixture(const std::string& name) {
  return std::string(GRIDCASE_FIXTURES) + "/" + name;
}

inline Network load_fixture(const std::string& name) {
  return matpower::lower(matpower::read_file(fixture(name)));
}

/// The three-bus network: lossless 1-2 and 2-3, lossy 1-3, load at bus 3.
inline Network three_bus() {
  Network net;
  net.name = "three_bus";
  net.base_mva = 100.0;
  net.buses = {
      {.id = 1, .kind = BusKind::slack, .v_init = 1.1},
      {.id = 2, .kind = BusKind::pq},
      {.id = 3, .kind = BusKind::pq, .pd = 1.0},
  };
  net.branches = {
      {.from_bus = 1, .to_bus = 2, .r = 0.0, .x = 0.05},
      {.from_bus = 2, .to_bus = 3, .r = 0.0, .x = 0.05},
      {.from_bus = 1, .to_bus = 3, .r = 0.1, .x = 0.1},
  };
  net.generators = {
      {.bus = 1, .pg = 1.01, .p_min = 0.0, .p_max = kInf, .q_min = -kInf, .q_max = kInf,
       .v_set = 1.1, .cost = {0.0, 1.0, 0.0}},
      {.bus = 3, .pg = 0.0, .p_min = 0.0, .p_max = kInf, .q_min = 0.0, .q_max = 0.0,
       .cost = {0.0, 10.0, 0.0}},
  };
  return net;
}

/// Small meshed network with 2 to `max_buses` buses: a random spanning tree
/// plus extra lines, loads on most buses and two or three generators.
inline Network random_network(std::uint64_t seed, int max_buses = 6) {
  RandomStream rng(seed, 0x72616e64ULL, 0);
  auto between = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  Network net;
  net.name = "random_" + std::to_string(seed);
  int nb = 2 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_buses - 1));
  double load = 0.0;
  for (int i = 1; i <= nb; ++i) {
    Bus bus{.id = i, .kind = i == 1 ? BusKind::slack : BusKind::pq};
    if (i > 1 && rng.uniform() < 0.8) {
      bus.pd = between(0.1, 0.8);
      bus.qd = between(-0.05, 0.3);
    }
    load += bus.pd;
    net.buses.push_back(bus);
  }
  auto line = [&](int f, int t) {
    Branch br{.from_bus = f, .to_bus = t, .r = between(0.002, 0.04), .x = between(0.02, 0.2),
              .b_charge = between(0.0, 0.06)};
    if (rng.uniform() < 0.4) br.rate_a = between(0.6, 1.5);
    if (rng.uniform() < 0.3) {
      double bound = deg_to_rad(between(15.0, 40.0));
      br.angle_min = -bound;
      br.angle_max = bound;
    }
    net.branches.push_back(br);
  };
  for (int i = 2; i <= nb; ++i) line(1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(i - 1)), i);
  int extra = nb > 2 ? static_cast<int>(rng.next() % 3) : 0;
  for (int k = 0; k < extra; ++k) {
    int f = 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(nb));
    int t = 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(nb));
    if (f != t) line(f, t);
  }
  int ng = nb > 2 ? 2 + static_cast<int>(rng.next() % 2) : 2;
  for (int k = 0; k < ng; ++k) {
    int bus = k == 0 ? 1 : 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(nb));
    Generator g{.bus = bus, .p_min = 0.0, .p_max = between(0.6, 1.2) * (load + 0.5),
                .q_min = -between(0.3, 1.0), .q_max = between(0.3, 1.0)};
    g.cost = {between(0.0, 0.05), between(5.0, 40.0), between(0.0, 50.0)};
    net.generators.push_back(g);
  }
  return net;
}

}  // namespace gridcase::testing
