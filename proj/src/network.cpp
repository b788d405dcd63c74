#include "gridcase/network.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <sstream>
#include <utility>

namespace gridcase {

namespace {

constexpr std::array<std::pair<FuelCategory, std::string_view>, 8> kFuelLabels{{
    {FuelCategory::cow, "COW"},
    {FuelCategory::pel, "PEL"},
    {FuelCategory::ng, "NG"},
    {FuelCategory::nuc, "NUC"},
    {FuelCategory::bio, "BIO"},
    {FuelCategory::drn, "DRN"},
    {FuelCategory::rn, "RN"},
    {FuelCategory::sync, "SYNC"},
}};

template <class... Args>
std::string concat(Args&&... args) {
  std::ostringstream out;
  (out << ... << args);
  return out.str();
}

}  // namespace

std::string_view to_string(FuelCategory fuel) {
  for (const auto& [category, label] : kFuelLabels) {
    if (category == fuel) return label;
  }
  return "?";
}

std::optional<FuelCategory> parse_fuel_label(std::string_view label) {
  std::string upper(label);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (const auto& [category, text] : kFuelLabels) {
    if (text == upper) return category;
  }
  return std::nullopt;
}

std::string_view to_string(Violation::Element element) {
  switch (element) {
    case Violation::Element::network: return "network";
    case Violation::Element::bus: return "bus";
    case Violation::Element::branch: return "branch";
    case Violation::Element::generator: return "generator";
  }
  return "?";
}

double Branch::admittance_magnitude() const { return 1.0 / std::hypot(r, x); }

std::unordered_map<int, std::size_t> Network::bus_lookup() const {
  std::unordered_map<int, std::size_t> lookup;
  lookup.reserve(buses.size());
  for (std::size_t i = 0; i < buses.size(); ++i) lookup.emplace(buses[i].id, i);
  return lookup;
}

std::vector<Violation> validate(const Network& net) {
  using E = Violation::Element;
  std::vector<Violation> out;
  auto add = [&](E element, std::size_t index, std::string kind, std::string message) {
    out.push_back({element, index, std::move(kind), std::move(message), 0.0});
  };

  if (!(net.base_mva > 0.0) || !std::isfinite(net.base_mva)) {
    add(E::network, 0, "base_mva", concat("base_mva must be positive, got ", net.base_mva));
  }

  std::unordered_map<int, std::size_t> seen;
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const Bus& bus = net.buses[i];
    if (auto [it, fresh] = seen.emplace(bus.id, i); !fresh) {
      add(E::bus, i, "duplicate_id",
          concat("bus id ", bus.id, " already used by bus index ", it->second));
    }
    if (!(bus.v_min > 0.0) || !(bus.v_min <= bus.v_max)) {
      add(E::bus, i, "voltage_bounds",
          concat("bus ", bus.id, " needs 0 < v_min <= v_max, got [", bus.v_min, ", ",
                 bus.v_max, "]"));
    }
    if (!(bus.base_kv >= 0.0)) {
      add(E::bus, i, "base_kv", concat("bus ", bus.id, " has negative base_kv"));
    }
  }

  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const Branch& br = net.branches[k];
    if (!seen.contains(br.from_bus)) {
      add(E::branch, k, "dangling", concat("branch ", k, " from_bus ", br.from_bus, " not found"));
    }
    if (!seen.contains(br.to_bus)) {
      add(E::branch, k, "dangling", concat("branch ", k, " to_bus ", br.to_bus, " not found"));
    }
    if (br.from_bus == br.to_bus) {
      add(E::branch, k, "self_loop", concat("branch ", k, " connects bus ", br.from_bus, " to itself"));
    }
    if (br.x == 0.0) {
      add(E::branch, k, "zero_reactance", concat("branch ", k, " has x = 0"));
    }
    if (!(br.tap > 0.0)) {
      add(E::branch, k, "tap", concat("branch ", k, " tap ratio must be positive"));
    }
    if (!(br.angle_min <= 0.0) || !(br.angle_max >= 0.0)) {
      add(E::branch, k, "angle_bounds",
          concat("branch ", k, " needs angle_min <= 0 <= angle_max"));
    }
    if (br.rate_a && !(*br.rate_a > 0.0)) {
      add(E::branch, k, "rate_a", concat("branch ", k, " thermal limit must be positive"));
    }
  }

  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    if (!seen.contains(gen.bus)) {
      add(E::generator, g, "dangling", concat("generator ", g, " bus ", gen.bus, " not found"));
    }
    if (!(gen.p_min <= gen.p_max)) {
      add(E::generator, g, "p_bounds", concat("generator ", g, " has p_min > p_max"));
    }
    if (!(gen.q_min <= gen.q_max)) {
      add(E::generator, g, "q_bounds", concat("generator ", g, " has q_min > q_max"));
    }
    const CostPoly& c = gen.cost;
    if (!std::isfinite(c.c2) || !std::isfinite(c.c1) || !std::isfinite(c.c0)) {
      add(E::generator, g, "cost", concat("generator ", g, " has non-finite cost coefficients"));
    } else if (c.c2 < 0.0) {
      add(E::generator, g, "cost", concat("generator ", g, " has a concave cost (c2 < 0)"));
    }
  }
  return out;
}

double to_per_unit(double value, double base_mva) {
  if (!(base_mva > 0.0)) throw std::invalid_argument("base_mva must be positive");
  return value / base_mva;
}

double from_per_unit(double value_pu, double base_mva) {
  if (!(base_mva > 0.0)) throw std::invalid_argument("base_mva must be positive");
  return value_pu * base_mva;
}

}  // namespace gridcase
