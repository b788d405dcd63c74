#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gridcase/network.hpp"

namespace gridcase::fleet {

/// One generating unit from an EIA-860 style inventory.
struct FleetRecord {
  std::string status;
  std::string energy_source;
  double nameplate_mw = 0.0;
  double summer_mw = 0.0;
};

/// One state fuel price from a SEDS style table.
struct PriceRecord {
  std::string state;
  std::string seds_label;
  double price_per_mmbtu = 0.0;
};

/// Contiguous nameplate-capacity bins with the fuel mix observed in each.
struct CapacityBin {
  double low_mw = 0.0;   // smallest sample in the bin
  double high_mw = 0.0;  // largest sample in the bin
  std::size_t count = 0;
  std::map<FuelCategory, double> weights;
};

struct CapacityBins {
  std::vector<CapacityBin> bins;

  /// Bin for a capacity key; keys outside the sampled range use the nearest edge bin.
  const CapacityBin& lookup(double capacity_mw) const;
  bool empty() const { return bins.empty(); }
};

struct NormalParams {
  double mean = 0.0;
  double stddev = 0.0;
};

struct LogLogModel {
  double a = 0.0;  // intercept of ln y on ln x
  double k = 0.0;  // slope
};

/// Fitted parameters for every data-driven augmentation model.
struct AugmentModels {
  CapacityBins bins;
  std::map<FuelCategory, double> capacity_rate;  // exponential rate, 1/MW
  std::map<FuelCategory, NormalParams> capacity_normal;  // MW
  std::map<FuelCategory, double> summer_reduction;  // fraction of nameplate
  std::map<FuelCategory, NormalParams> cost_normal;  // $/MWh
  LogLogModel thermal{};
};

/// Built-in parameters: capacity, summer reduction and cost fits for the
/// 2012 US fleet, and the log-log thermal model (a, k) = (-5.0886, 0.4772).
/// The classifier bins are derived from the capacity distributions, weighted
/// by the per-fuel unit counts of the filtered fleet.
const AugmentModels& default_models();

inline constexpr double kMwhPerMmbtu = 0.29307107;
inline constexpr std::size_t kMinBinSamples = 100;

/// Fuel category for an EIA-860 energy source code. Throws std::invalid_argument.
FuelCategory map_fuel(std::string_view code);

/// In-service (status "OP") units of the COW, PEL, NG or NUC categories with
/// nameplate >= min_mw. Unknown fuel codes are dropped.
std::vector<FleetRecord> filter_fleet(std::span<const FleetRecord> records, double min_mw);

CapacityBins fit_bins(std::span<const FleetRecord> records,
                      std::size_t min_samples = kMinBinSamples);

/// Maximum likelihood rate 1/mean.
double fit_exponential(std::span<const double> samples);

/// Sample mean and population (divide-by-n) standard deviation.
NormalParams fit_normal(std::span<const double> samples);

/// Ordinary least squares of ln y on ln x; points are (x, y).
LogLogModel fit_loglog(std::span<const std::pair<double, double>> points);

/// Resamples the smaller set with replacement so both contribute equally.
std::vector<std::pair<double, double>> balance_equal(
    std::span<const std::pair<double, double>> first,
    std::span<const std::pair<double, double>> second, std::uint64_t seed);

/// $/MMBtu to $/MWh.
double convert_price(double price_per_mmbtu);

/// SEDS label whose prices feed the cost model of `fuel`.
std::string_view seds_label_for(FuelCategory fuel);

/// Fits every model from raw records. Categories without data keep the defaults.
AugmentModels fit_models(std::span<const FleetRecord> fleet, std::span<const PriceRecord> prices,
                         double min_capacity_mw = 5.0,
                         const AugmentModels& fallback = default_models());

// CSV ingestion. Columns are matched by header name; extra columns are ignored.
std::vector<FleetRecord> read_fleet_csv(const std::string& path);
std::vector<PriceRecord> read_price_csv(const std::string& path);
/// Columns x_over_r, capacity_ratio.
std::vector<std::pair<double, double>> read_line_csv(const std::string& path);

nlohmann::json to_json(const AugmentModels& models);
AugmentModels models_from_json(const nlohmann::json& doc);

}  // namespace gridcase::fleet
