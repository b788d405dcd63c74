#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gridcase {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Input data that cannot be turned into a usable case (exit code 2 in the CLI).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical solve that did not produce a usable answer (exit code 3).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BusKind { pq, pv, slack, inactive };

enum class FuelCategory { cow, pel, ng, nuc, bio, drn, rn, sync };

std::string_view to_string(FuelCategory fuel);
std::optional<FuelCategory> parse_fuel_label(std::string_view label);

/// Quadratic generation cost in $/h with active power in MW.
struct CostPoly {
  double c2 = 0.0;  // $/MW^2h
  double c1 = 0.0;  // $/MWh
  double c0 = 0.0;  // $/h

  double operator()(double p_mw) const { return (c2 * p_mw + c1) * p_mw + c0; }
  bool operator==(const CostPoly&) const = default;
};

struct Bus {
  int id = 0;
  BusKind kind = BusKind::pq;
  double pd = 0.0;
  double qd = 0.0;
  double gs = 0.0;
  double bs = 0.0;
  double v_min = 0.9;
  double v_max = 1.1;
  double base_kv = 0.0;  // 0 = unknown
  double v_init = 1.0;
  double theta_init = 0.0;  // rad
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charge = 0.0;
  double tap = 1.0;
  double shift = 0.0;              // rad
  std::optional<double> rate_a;    // nullopt = unlimited
  double angle_min = -kInf;        // rad
  double angle_max = kInf;         // rad
  bool in_service = true;

  /// Series admittance magnitude 1/|r + jx|.
  double admittance_magnitude() const;
  bool is_transformer() const { return tap != 1.0 || shift != 0.0; }
};

struct Generator {
  int bus = 0;
  double pg = 0.0;
  double qg = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double v_set = 1.0;
  bool in_service = true;
  CostPoly cost;
  std::optional<FuelCategory> fuel;
};

/// Per-unit network on `base_mva`. Angles in radians, powers in p.u.
struct Network {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;

  /// Map from bus id to position in `buses`. Duplicate ids keep the first.
  std::unordered_map<int, std::size_t> bus_lookup() const;
};

struct Violation {
  enum class Element { network, bus, branch, generator };
  Element element = Element::network;
  std::size_t index = 0;
  std::string kind;
  std::string message;
  double magnitude = 0.0;
};

std::string_view to_string(Violation::Element element);

/// Structural validation. Never throws; an empty result means the network is sound.
std::vector<Violation> validate(const Network& net);

double to_per_unit(double value, double base_mva);
double from_per_unit(double value_pu, double base_mva);

}  // namespace gridcase
