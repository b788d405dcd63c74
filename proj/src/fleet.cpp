#include "gridcase/fleet.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gridcase/rng.hpp"

namespace gridcase::fleet {

namespace {

constexpr FuelCategory kModeledFuels[] = {FuelCategory::cow, FuelCategory::pel, FuelCategory::ng,
                                          FuelCategory::nuc};

bool is_modeled(FuelCategory fuel) {
  return std::find(std::begin(kModeledFuels), std::end(kModeledFuels), fuel) !=
         std::end(kModeledFuels);
}

std::string upper(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string trim(std::string_view text) {
  auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

// Inverse of the standard normal CDF by bisection on erfc; only used to build
// the default classifier, so speed does not matter.
double normal_quantile(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

AugmentModels make_defaults() {
  AugmentModels m;
  m.capacity_rate = {{FuelCategory::pel, 0.023254},
                     {FuelCategory::ng, 0.009188},
                     {FuelCategory::cow, 0.003201}};
  m.capacity_normal = {{FuelCategory::nuc, {1044.56, 219.27}}};
  m.summer_reduction = {{FuelCategory::pel, 0.1611},
                        {FuelCategory::ng, 0.1298},
                        {FuelCategory::cow, 0.0848},
                        {FuelCategory::nuc, 0.0580}};
  m.cost_normal = {{FuelCategory::pel, {6.8828, 0.3334}},
                   {FuelCategory::ng, {1.0606, 0.2006}},
                   {FuelCategory::cow, {0.7683, 0.2452}},
                   {FuelCategory::nuc, {0.2101, 0.0199}}};
  m.thermal = {-5.0886, 0.4772};

  // Unit counts per fuel after the 5 MW floor.
  const std::pair<FuelCategory, int> counts[] = {
      {FuelCategory::pel, 665}, {FuelCategory::ng, 2912}, {FuelCategory::cow, 852},
      {FuelCategory::nuc, 102}};
  const std::map<FuelCategory, const char*> code = {{FuelCategory::pel, "DFO"},
                                                    {FuelCategory::ng, "NG"},
                                                    {FuelCategory::cow, "BIT"},
                                                    {FuelCategory::nuc, "NUC"}};
  std::vector<FleetRecord> synthetic;
  for (auto [fuel, n] : counts) {
    for (int i = 0; i < n; ++i) {
      double u = (i + 0.5) / n;
      double mw = 0.0;
      if (auto rate = m.capacity_rate.find(fuel); rate != m.capacity_rate.end()) {
        mw = -std::log1p(-u) / rate->second;
      } else {
        const NormalParams& p = m.capacity_normal.at(fuel);
        mw = std::max(0.0, p.mean + p.stddev * normal_quantile(u));
      }
      synthetic.push_back({"OP", code.at(fuel), mw, mw});
    }
  }
  m.bins = fit_bins(synthetic);
  return m;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::size_t column(std::string_view name, const std::string& path) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw DataError(path + ": missing column '" + std::string(name) + "'");
  }
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (table.header.empty()) {
      for (auto& cell : cells) {
        std::transform(cell.begin(), cell.end(), cell.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      }
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw DataError(path + ":" + std::to_string(number) + ": expected " +
                      std::to_string(table.header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(number);
  }
  if (table.header.empty()) throw DataError(path + ": empty file");
  return table;
}

double csv_number(const CsvTable& table, std::size_t row, std::size_t col, const std::string& path) {
  const std::string& text = table.rows[row][col];
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) {
    throw DataError(path + ":" + std::to_string(table.line_numbers[row]) + ": '" + text +
                    "' is not a number");
  }
  return value;
}

nlohmann::json normal_json(const NormalParams& p, const char* unit) {
  return {{"mean", p.mean}, {"stddev", p.stddev}, {"unit", unit}};
}

FuelCategory fuel_key(const std::string& label) {
  auto fuel = parse_fuel_label(label);
  if (!fuel) throw DataError("unknown fuel category '" + label + "' in models file");
  return *fuel;
}

}  // namespace

const CapacityBin& CapacityBins::lookup(double capacity_mw) const {
  if (bins.empty()) throw std::logic_error("capacity bins are empty");
  for (std::size_t i = 0; i + 1 < bins.size(); ++i) {
    if (capacity_mw < bins[i + 1].low_mw) return bins[i];
  }
  return bins.back();
}

const AugmentModels& default_models() {
  static const AugmentModels defaults = make_defaults();
  return defaults;
}

FuelCategory map_fuel(std::string_view code) {
  static const std::map<std::string, FuelCategory, std::less<>> table = [] {
    std::map<std::string, FuelCategory, std::less<>> t;
    auto add = [&](FuelCategory fuel, std::initializer_list<const char*> codes) {
      for (const char* c : codes) t.emplace(c, fuel);
    };
    add(FuelCategory::cow, {"ANT", "BIT", "LIG", "SUB", "WC"});
    add(FuelCategory::pel, {"RC", "DFO", "JF", "KER", "PC", "RFO", "WO"});
    add(FuelCategory::ng, {"BFG", "NG", "OG", "PG", "SG", "SGC"});
    add(FuelCategory::nuc, {"NUC"});
    add(FuelCategory::bio, {"AB", "MSW", "OBS", "WDS", "OBL", "SLW", "BLQ", "WDL"});
    add(FuelCategory::drn, {"WAT", "GEO"});
    add(FuelCategory::rn, {"SUN", "WND"});
    return t;
  }();
  auto it = table.find(upper(trim(code)));
  if (it == table.end()) throw std::invalid_argument("unknown fuel code '" + std::string(code) + "'");
  return it->second;
}

std::vector<FleetRecord> filter_fleet(std::span<const FleetRecord> records, double min_mw) {
  std::vector<FleetRecord> out;
  for (const FleetRecord& rec : records) {
    if (upper(trim(rec.status)) != "OP") continue;
    if (!(rec.nameplate_mw >= min_mw)) continue;
    FuelCategory fuel;
    try {
      fuel = map_fuel(rec.energy_source);
    } catch (const std::invalid_argument&) {
      continue;
    }
    if (is_modeled(fuel)) out.push_back(rec);
  }
  return out;
}

CapacityBins fit_bins(std::span<const FleetRecord> records, std::size_t min_samples) {
  if (min_samples == 0) throw std::invalid_argument("bins need at least one sample");
  if (records.size() < min_samples) {
    throw std::invalid_argument("fit_bins needs at least " + std::to_string(min_samples) +
                                " records, got " + std::to_string(records.size()));
  }
  std::vector<std::pair<double, FuelCategory>> units;
  units.reserve(records.size());
  for (const FleetRecord& rec : records) {
    units.emplace_back(rec.nameplate_mw, map_fuel(rec.energy_source));
  }
  std::stable_sort(units.begin(), units.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [begin, end)
  std::size_t begin = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    bool full = i + 1 - begin >= min_samples;
    bool boundary = i + 1 == units.size() || units[i + 1].first != units[i].first;
    if (full && boundary) {
      ranges.emplace_back(begin, i + 1);
      begin = i + 1;
    }
  }
  if (begin < units.size()) {
    if (ranges.empty()) {
      ranges.emplace_back(begin, units.size());
    } else {
      ranges.back().second = units.size();
    }
  }

  CapacityBins out;
  for (auto [first, last] : ranges) {
    CapacityBin bin;
    bin.low_mw = units[first].first;
    bin.high_mw = units[last - 1].first;
    bin.count = last - first;
    for (std::size_t i = first; i < last; ++i) bin.weights[units[i].second] += 1.0;
    for (auto& [fuel, weight] : bin.weights) weight /= static_cast<double>(bin.count);
    out.bins.push_back(std::move(bin));
  }
  return out;
}

double fit_exponential(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("fit_exponential needs at least 2 samples");
  for (double s : samples) {
    if (!(s > 0.0)) throw std::invalid_argument("fit_exponential needs positive samples");
  }
  double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
  return 1.0 / mean;
}

NormalParams fit_normal(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("fit_normal needs at least 2 samples");
  const double n = static_cast<double>(samples.size());
  double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  return {mean, std::sqrt(ss / n)};
}

LogLogModel fit_loglog(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw std::invalid_argument("fit_loglog needs at least 2 points");
  const double n = static_cast<double>(points.size());
  double mean_u = 0.0;
  double mean_v = 0.0;
  for (auto [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("fit_loglog needs positive points");
    mean_u += std::log(x);
    mean_v += std::log(y);
  }
  mean_u /= n;
  mean_v /= n;
  double suu = 0.0;
  double suv = 0.0;
  for (auto [x, y] : points) {
    double du = std::log(x) - mean_u;
    suu += du * du;
    suv += du * (std::log(y) - mean_v);
  }
  if (suu <= 1e-300) throw std::invalid_argument("fit_loglog is degenerate: all x are equal");
  double k = suv / suu;
  return {mean_v - k * mean_u, k};
}

std::vector<std::pair<double, double>> balance_equal(
    std::span<const std::pair<double, double>> first,
    std::span<const std::pair<double, double>> second, std::uint64_t seed) {
  if (first.empty() || second.empty()) throw std::invalid_argument("balance_equal needs two non-empty sets");
  auto small = first.size() <= second.size() ? first : second;
  auto large = first.size() <= second.size() ? second : first;
  std::vector<std::pair<double, double>> out(large.begin(), large.end());
  out.insert(out.end(), small.begin(), small.end());
  RandomStream rng(seed, 0x6c6f676c6f67ULL, 0);
  for (std::size_t i = small.size(); i < large.size(); ++i) {
    out.push_back(small[static_cast<std::size_t>(rng.uniform() * small.size())]);
  }
  return out;
}

double convert_price(double price_per_mmbtu) {
  if (price_per_mmbtu < 0.0) throw std::invalid_argument("fuel price must be non-negative");
  return price_per_mmbtu / kMwhPerMmbtu;
}

std::string_view seds_label_for(FuelCategory fuel) {
  switch (fuel) {
    case FuelCategory::pel: return "Distillate Fuel Oil";
    case FuelCategory::ng: return "Natural Gas";
    case FuelCategory::cow: return "Coal";
    case FuelCategory::nuc: return "Nuclear Fuel";
    default: return "";
  }
}

AugmentModels fit_models(std::span<const FleetRecord> fleet, std::span<const PriceRecord> prices,
                         double min_capacity_mw, const AugmentModels& fallback) {
  AugmentModels m = fallback;
  if (!fleet.empty()) {
    auto dispatchable = filter_fleet(fleet, 0.0);
    m.bins = fit_bins(dispatchable);

    auto sized = filter_fleet(fleet, min_capacity_mw);
    std::map<FuelCategory, std::vector<double>> capacity;
    std::map<FuelCategory, std::vector<double>> reduction;
    for (const FleetRecord& rec : sized) {
      FuelCategory fuel = map_fuel(rec.energy_source);
      capacity[fuel].push_back(rec.nameplate_mw);
      if (rec.nameplate_mw > 0.0) {
        reduction[fuel].push_back((rec.nameplate_mw - rec.summer_mw) / rec.nameplate_mw);
      }
    }
    for (auto& [fuel, samples] : capacity) {
      if (samples.size() < 2) continue;
      if (fuel == FuelCategory::nuc) {
        m.capacity_normal[fuel] = fit_normal(samples);
      } else {
        m.capacity_rate[fuel] = fit_exponential(samples);
      }
    }
    for (auto& [fuel, samples] : reduction) {
      if (samples.size() < 2) continue;
      double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
      m.summer_reduction[fuel] = std::clamp(mean, 0.0, 0.99);
    }
  }
  for (FuelCategory fuel : kModeledFuels) {
    std::vector<double> samples;
    for (const PriceRecord& rec : prices) {
      if (rec.seds_label == seds_label_for(fuel)) samples.push_back(convert_price(rec.price_per_mmbtu));
    }
    if (samples.size() >= 2) m.cost_normal[fuel] = fit_normal(samples);
  }
  return m;
}

std::vector<FleetRecord> read_fleet_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  auto status = table.column("status", path);
  auto source = table.column("energy_source", path);
  auto nameplate = table.column("nameplate_mw", path);
  auto summer = table.column("summer_mw", path);
  std::vector<FleetRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    FleetRecord rec{table.rows[i][status], table.rows[i][source],
                    csv_number(table, i, nameplate, path), csv_number(table, i, summer, path)};
    if (rec.nameplate_mw < 0.0 || rec.summer_mw < 0.0) {
      throw DataError(path + ":" + std::to_string(table.line_numbers[i]) + ": negative capacity");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<PriceRecord> read_price_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  auto state = table.column("state", path);
  auto label = table.column("seds_label", path);
  auto price = table.column("price_per_mmbtu", path);
  std::vector<PriceRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    PriceRecord rec{table.rows[i][state], table.rows[i][label], csv_number(table, i, price, path)};
    if (rec.price_per_mmbtu < 0.0) {
      throw DataError(path + ":" + std::to_string(table.line_numbers[i]) + ": negative price");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::pair<double, double>> read_line_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  auto ratio = table.column("x_over_r", path);
  auto capacity = table.column("capacity_ratio", path);
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    out.emplace_back(csv_number(table, i, ratio, path), csv_number(table, i, capacity, path));
  }
  return out;
}

nlohmann::json to_json(const AugmentModels& m) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  auto& bins = doc["fuel_classifier_bins"] = nlohmann::json::array();
  for (const CapacityBin& bin : m.bins.bins) {
    nlohmann::json weights = nlohmann::json::object();
    for (const auto& [fuel, w] : bin.weights) weights[std::string(to_string(fuel))] = w;
    bins.push_back({{"low_mw", bin.low_mw}, {"high_mw", bin.high_mw}, {"count", bin.count},
                    {"weights", weights}});
  }
  auto& rate = doc["capacity_exponential"] = nlohmann::json::object();
  for (const auto& [fuel, lambda] : m.capacity_rate) {
    rate[std::string(to_string(fuel))] = {{"rate", lambda}, {"unit", "1/MW"}};
  }
  auto& normal = doc["capacity_normal"] = nlohmann::json::object();
  for (const auto& [fuel, p] : m.capacity_normal) {
    normal[std::string(to_string(fuel))] = normal_json(p, "MW");
  }
  auto& summer = doc["summer_reduction"] = nlohmann::json::object();
  for (const auto& [fuel, r] : m.summer_reduction) {
    summer[std::string(to_string(fuel))] = {{"fraction", r}};
  }
  auto& cost = doc["cost_normal"] = nlohmann::json::object();
  for (const auto& [fuel, p] : m.cost_normal) {
    cost[std::string(to_string(fuel))] = normal_json(p, "$/MWh");
  }
  doc["thermal_loglog"] = {{"a", m.thermal.a},
                           {"k", m.thermal.k},
                           {"model", "t = v_kv * exp(a) * (x/r)^k, t in p.u. on 100 MVA"}};
  return doc;
}

AugmentModels models_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("schema_version", 0) != 1) throw DataError("unsupported models schema_version");
    AugmentModels m = default_models();
    if (doc.contains("fuel_classifier_bins")) {
      m.bins.bins.clear();
      for (const auto& item : doc.at("fuel_classifier_bins")) {
        CapacityBin bin;
        bin.low_mw = item.at("low_mw").get<double>();
        bin.high_mw = item.at("high_mw").get<double>();
        bin.count = item.at("count").get<std::size_t>();
        for (const auto& [label, w] : item.at("weights").items()) bin.weights[fuel_key(label)] = w.get<double>();
        m.bins.bins.push_back(std::move(bin));
      }
    }
    if (doc.contains("capacity_exponential")) {
      m.capacity_rate.clear();
      for (const auto& [label, v] : doc.at("capacity_exponential").items()) {
        m.capacity_rate[fuel_key(label)] = v.at("rate").get<double>();
      }
    }
    if (doc.contains("capacity_normal")) {
      m.capacity_normal.clear();
      for (const auto& [label, v] : doc.at("capacity_normal").items()) {
        m.capacity_normal[fuel_key(label)] = {v.at("mean").get<double>(), v.at("stddev").get<double>()};
      }
    }
    if (doc.contains("summer_reduction")) {
      m.summer_reduction.clear();
      for (const auto& [label, v] : doc.at("summer_reduction").items()) {
        m.summer_reduction[fuel_key(label)] = v.at("fraction").get<double>();
      }
    }
    if (doc.contains("cost_normal")) {
      m.cost_normal.clear();
      for (const auto& [label, v] : doc.at("cost_normal").items()) {
        m.cost_normal[fuel_key(label)] = {v.at("mean").get<double>(), v.at("stddev").get<double>()};
      }
    }
    if (doc.contains("thermal_loglog")) {
      m.thermal = {doc.at("thermal_loglog").at("a").get<double>(),
                   doc.at("thermal_loglog").at("k").get<double>()};
    }
    for (const auto& [fuel, lambda] : m.capacity_rate) {
      if (!(lambda > 0.0)) throw DataError("capacity rate must be positive for " + std::string(to_string(fuel)));
    }
    for (const auto& [fuel, r] : m.summer_reduction) {
      if (!(r >= 0.0 && r < 1.0)) throw DataError("summer reduction must lie in [0, 1)");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed models file: ") + e.what());
  }
}

}  // namespace gridcase::fleet
