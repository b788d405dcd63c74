#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gridcase/fleet.hpp"
#include "gridcase/network.hpp"
#include "gridcase/rng.hpp"

namespace gridcase::augment {

inline constexpr const char* kToolVersion = "gridcase 0.1.0";

enum class ReactiveModel { none, am50, al50 };

/// How base_kv enters the statistical thermal model.
enum class ThermalVoltage { kilovolt, per_unit };

struct AugmentPlan {
  bool gf_stat = false;
  bool ag_stat = false;
  ReactiveModel reactive = ReactiveModel::none;
  bool ac_stat = false;
  bool tl_stat = false;
  bool tl_ub = false;
  std::optional<double> angle_bound_deg;
  double tl_ub_theta_deg = 15.0;
  ThermalVoltage thermal_voltage = ThermalVoltage::kilovolt;
  std::uint64_t seed = 0;
  fleet::AugmentModels models = fleet::default_models();

  /// Throws std::invalid_argument for out-of-range settings.
  void check() const;
  /// Names of the selected models in application order, e.g. "AG-Stat".
  std::vector<std::string> model_names() const;
};

/// Plan from a JSON config. Keys mirror the model names; see configs/.
AugmentPlan plan_from_json(const nlohmann::json& doc);

struct LogRecord {
  Violation::Element element = Violation::Element::generator;
  std::size_t index = 0;
  std::string model;
  std::string field;
  double old_value = 0.0;
  double new_value = 0.0;
  std::vector<double> samples;
  std::size_t draws = 0;
  std::string note;
};

struct AugmentLog {
  std::vector<LogRecord> records;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const AugmentLog& log, const AugmentPlan& plan);

// Stream tags keep the draws of one model independent of the others.
inline constexpr std::uint64_t kTagFuel = 0x4746;      // "GF"
inline constexpr std::uint64_t kTagCapacity = 0x4147;  // "AG"
inline constexpr std::uint64_t kTagCost = 0x4143;      // "AC"

/// `at_slack` marks a generator on the reference bus. Keys are in MW.
FuelCategory classify_fuel(const Generator& gen, bool at_slack, const fleet::CapacityBins& bins,
                           double base_mva, RandomStream& rng);

struct CapacityDraw {
  double p_max_mw = 0.0;
  std::size_t draws = 0;
  bool fallback = false;
  std::vector<double> samples;
};

inline constexpr std::size_t kMaxCapacityDraws = 100;

/// Nameplate capacity above the reference output `p_ref_mw`. Throws DataError for
/// fuels without a capacity model.
CapacityDraw ag_stat(double p_ref_mw, FuelCategory fuel, const fleet::AugmentModels& models,
                     RandomStream& rng);

std::pair<double, double> rg_am50(double q_min, double q_max, double nameplate);
std::pair<double, double> rg_al50(double q_min, double q_max, double nameplate);

/// Linear cost; the sampled value is returned through `sample` when given.
CostPoly ac_stat(FuelCategory fuel, const fleet::AugmentModels& models, RandomStream& rng,
                 double* sample = nullptr);

/// Thermal limit in p.u. on `base_mva`, or nothing when the model does not apply.
std::optional<double> tl_stat(const Branch& branch, const Bus& from, const Bus& to,
                              const fleet::LogLogModel& model, double base_mva = 100.0,
                              ThermalVoltage unit = ThermalVoltage::kilovolt);

struct UpperBound {
  double limit = 0.0;
  bool weak = false;  // angle term is not large compared with the voltage band
};

/// Limit implied by the voltage bounds and an angle-difference bound.
UpperBound tl_ub(const Branch& branch, const Bus& from, const Bus& to, double theta_delta);

/// Smallest of the applicable computed limits, never loosening `existing`.
std::optional<double> tl_combined(std::optional<double> existing, std::optional<double> stat,
                                  std::optional<double> upper);

/// Applies the plan to a copy of `net`.
std::pair<Network, AugmentLog> apply_plan(const Network& net, const AugmentPlan& plan);

/// Header comment lines naming the models, seed and tool version.
std::vector<std::string> provenance(const AugmentPlan& plan, const std::string& source);

}  // namespace gridcase::augment
