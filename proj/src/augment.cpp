#include "gridcase/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gridcase/matpower.hpp"

namespace gridcase::augment {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool has_capacity_model(FuelCategory fuel) {
  return fuel == FuelCategory::cow || fuel == FuelCategory::pel || fuel == FuelCategory::ng ||
         fuel == FuelCategory::nuc || fuel == FuelCategory::sync;
}

FuelCategory require_fuel(const Generator& gen, std::size_t index, const char* model) {
  if (!gen.fuel) {
    throw DataError(std::string(model) + ": generator " + std::to_string(index) +
                    " has no fuel category; enable GF-Stat or supply mpc.genfuel");
  }
  if (!has_capacity_model(*gen.fuel)) {
    throw DataError(std::string(model) + ": no model for fuel " + std::string(to_string(*gen.fuel)) +
                    " (generator " + std::to_string(index) + ")");
  }
  return *gen.fuel;
}

}  // namespace

void AugmentPlan::check() const {
  if (angle_bound_deg && !(*angle_bound_deg > 0.0 && *angle_bound_deg <= 90.0)) {
    throw std::invalid_argument("angle bound must lie in (0, 90] degrees");
  }
  if (tl_ub && !(tl_ub_theta_deg > 0.0 && tl_ub_theta_deg <= 90.0)) {
    throw std::invalid_argument("TL-UB angle must lie in (0, 90] degrees");
  }
  if (gf_stat && models.bins.empty()) throw std::invalid_argument("GF-Stat needs classifier bins");
}

std::vector<std::string> AugmentPlan::model_names() const {
  std::vector<std::string> names;
  if (gf_stat) names.emplace_back("GF-Stat");
  if (ag_stat) names.emplace_back("AG-Stat");
  if (reactive == ReactiveModel::am50) names.emplace_back("RG-AM50");
  if (reactive == ReactiveModel::al50) names.emplace_back("RG-AL50");
  if (ac_stat) names.emplace_back("AC-Stat");
  if (tl_stat) names.emplace_back("TL-Stat");
  if (tl_ub) names.emplace_back("TL-UB");
  if (angle_bound_deg) names.emplace_back("angle bound");
  return names;
}

AugmentPlan plan_from_json(const nlohmann::json& doc) {
  static const std::vector<std::string> known = {
      "schema_version", "gf_stat",         "ag_stat",         "reactive", "ac_stat", "tl_stat",
      "tl_ub",          "tl_ub_theta_deg", "angle_bound_deg", "thermal_voltage", "models", "seed"};
  try {
    if (!doc.is_object()) throw DataError("plan must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw DataError("unknown plan key '" + key + "'");
      }
    }
    if (doc.value("schema_version", 1) != 1) throw DataError("unsupported plan schema_version");
    AugmentPlan plan;
    plan.gf_stat = doc.value("gf_stat", false);
    plan.ag_stat = doc.value("ag_stat", false);
    plan.ac_stat = doc.value("ac_stat", false);
    plan.tl_stat = doc.value("tl_stat", false);
    plan.tl_ub = doc.value("tl_ub", false);
    plan.tl_ub_theta_deg = doc.value("tl_ub_theta_deg", 15.0);
    plan.seed = doc.value("seed", std::uint64_t{0});
    std::string reactive = doc.value("reactive", std::string("none"));
    if (reactive == "AM50") {
      plan.reactive = ReactiveModel::am50;
    } else if (reactive == "AL50") {
      plan.reactive = ReactiveModel::al50;
    } else if (reactive != "none") {
      throw DataError("reactive must be \"AM50\", \"AL50\" or \"none\"");
    }
    if (doc.contains("angle_bound_deg") && !doc.at("angle_bound_deg").is_null()) {
      plan.angle_bound_deg = doc.at("angle_bound_deg").get<double>();
    }
    std::string unit = doc.value("thermal_voltage", std::string("kV"));
    if (unit == "kV") {
      plan.thermal_voltage = ThermalVoltage::kilovolt;
    } else if (unit == "pu") {
      plan.thermal_voltage = ThermalVoltage::per_unit;
    } else {
      throw DataError("thermal_voltage must be \"kV\" or \"pu\"");
    }
    if (doc.contains("models")) plan.models = fleet::models_from_json(doc.at("models"));
    try {
      plan.check();
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed plan: ") + e.what());
  }
}

nlohmann::json to_json(const AugmentLog& log, const AugmentPlan& plan) {
  auto number = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return nullptr;
    return v > 0 ? "Inf" : "-Inf";
  };
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["tool"] = kToolVersion;
  doc["seed"] = plan.seed;
  doc["models"] = plan.model_names();
  auto& records = doc["records"] = nlohmann::json::array();
  for (const LogRecord& r : log.records) {
    nlohmann::json item = {{"element", std::string(to_string(r.element))},
                           {"index", r.index},
                           {"model", r.model},
                           {"field", r.field},
                           {"old", number(r.old_value)},
                           {"new", number(r.new_value)}};
    if (!r.samples.empty()) item["samples"] = r.samples;
    if (r.draws > 0) item["draws"] = r.draws;
    if (!r.note.empty()) item["note"] = r.note;
    records.push_back(std::move(item));
  }
  doc["warnings"] = log.warnings;
  return doc;
}

FuelCategory classify_fuel(const Generator& gen, bool at_slack, const fleet::CapacityBins& bins,
                           double base_mva, RandomStream& rng) {
  if (gen.p_max == 0.0) return FuelCategory::sync;
  bool p_max_given = std::isfinite(gen.p_max) && gen.p_max > 0.0;
  if (at_slack && !p_max_given && !(gen.pg > 0.0)) return FuelCategory::nuc;
  double key = (p_max_given ? gen.p_max : gen.pg) * base_mva;
  const fleet::CapacityBin& bin = bins.lookup(key);
  double total = 0.0;
  for (const auto& [fuel, w] : bin.weights) total += w;
  if (!(total > 0.0)) throw DataError("capacity bin has no fuel weights");
  double u = rng.uniform() * total;
  FuelCategory chosen = bin.weights.rbegin()->first;
  double acc = 0.0;
  for (const auto& [fuel, w] : bin.weights) {
    acc += w;
    if (u < acc) {
      chosen = fuel;
      break;
    }
  }
  return chosen;
}

CapacityDraw ag_stat(double p_ref_mw, FuelCategory fuel, const fleet::AugmentModels& models,
                     RandomStream& rng) {
  CapacityDraw out;
  if (fuel == FuelCategory::sync) return out;
  p_ref_mw = std::max(0.0, p_ref_mw);
  auto rate = models.capacity_rate.find(fuel);
  auto normal = models.capacity_normal.find(fuel);
  if (rate == models.capacity_rate.end() && normal == models.capacity_normal.end()) {
    throw DataError("no capacity model for fuel " + std::string(to_string(fuel)));
  }
  for (std::size_t i = 0; i < kMaxCapacityDraws; ++i) {
    double draw = rate != models.capacity_rate.end()
                      ? rng.exponential(rate->second)
                      : std::max(0.0, rng.normal(normal->second.mean, normal->second.stddev));
    ++out.draws;
    out.samples.push_back(draw);
    if (draw > p_ref_mw) {
      out.p_max_mw = draw;
      return out;
    }
  }
  auto reduction = models.summer_reduction.find(fuel);
  if (reduction == models.summer_reduction.end()) {
    throw DataError("no summer reduction for fuel " + std::string(to_string(fuel)));
  }
  out.fallback = true;
  out.p_max_mw = p_ref_mw / (1.0 - reduction->second);
  return out;
}

std::pair<double, double> rg_am50(double q_min, double q_max, double nameplate) {
  double half = 0.5 * nameplate;
  return {std::clamp(q_min, -half, half), std::clamp(q_max, -half, half)};
}

std::pair<double, double> rg_al50(double q_min, double q_max, double nameplate) {
  double half = 0.5 * nameplate;
  return {std::min(q_min, -half), std::max(q_max, half)};
}

CostPoly ac_stat(FuelCategory fuel, const fleet::AugmentModels& models, RandomStream& rng,
                 double* sample) {
  if (fuel == FuelCategory::sync) return {};
  auto it = models.cost_normal.find(fuel);
  if (it == models.cost_normal.end()) {
    throw DataError("no cost model for fuel " + std::string(to_string(fuel)));
  }
  double draw = rng.normal(it->second.mean, it->second.stddev);
  if (sample) *sample = draw;
  return {0.0, std::max(0.0, draw), 0.0};
}

std::optional<double> tl_stat(const Branch& branch, const Bus& from, const Bus& to,
                              const fleet::LogLogModel& model, double base_mva,
                              ThermalVoltage unit) {
  if (!(branch.r > 0.0) || !(branch.x > 0.0)) return std::nullopt;
  if (!(from.base_kv > 0.0) || from.base_kv != to.base_kv) return std::nullopt;
  if (branch.is_transformer()) return std::nullopt;
  double v = unit == ThermalVoltage::kilovolt ? from.base_kv : 1.0;
  // The fit is expressed on a 100 MVA base.
  return v * std::exp(model.a) * std::pow(branch.x / branch.r, model.k) * 100.0 / base_mva;
}

UpperBound tl_ub(const Branch& branch, const Bus& from, const Bus& to, double theta_delta) {
  double y = branch.admittance_magnitude();
  double vi = from.v_max;
  double vj = to.v_max;
  double spread = vi * vi + vj * vj - 2.0 * vi * vj * std::cos(theta_delta);
  double vmax = std::max(vi, vj);
  UpperBound out;
  out.limit = vmax * y * std::sqrt(std::max(0.0, spread));
  double band = std::max(from.v_max - from.v_min, to.v_max - to.v_min);
  out.weak = 2.0 * y * std::sin(0.5 * theta_delta) < 5.0 * band;
  return out;
}

std::optional<double> tl_combined(std::optional<double> existing, std::optional<double> stat,
                                  std::optional<double> upper) {
  std::optional<double> computed;
  for (auto candidate : {stat, upper}) {
    if (candidate && (!computed || *candidate < *computed)) computed = candidate;
  }
  if (!computed) return existing;
  if (existing && *existing <= *computed) return existing;
  return computed;
}

std::pair<Network, AugmentLog> apply_plan(const Network& net, const AugmentPlan& plan) {
  plan.check();
  Network out = net;
  AugmentLog log;
  const auto lookup = out.bus_lookup();
  const double base = out.base_mva;
  auto bus_of = [&](int id) -> const Bus& {
    auto it = lookup.find(id);
    if (it == lookup.end()) throw DataError("reference to missing bus " + std::to_string(id));
    return out.buses[it->second];
  };
  auto gen_record = [&](std::size_t i, const char* model, const char* field, double old_value,
                        double new_value) -> LogRecord& {
    log.records.push_back({Violation::Element::generator, i, model, field, old_value, new_value, {}, 0, {}});
    return log.records.back();
  };

  if (plan.gf_stat) {
    for (std::size_t i = 0; i < out.generators.size(); ++i) {
      Generator& gen = out.generators[i];
      if (gen.fuel) continue;
      RandomStream rng(plan.seed, kTagFuel, i);
      bool at_slack = bus_of(gen.bus).kind == BusKind::slack;
      gen.fuel = classify_fuel(gen, at_slack, plan.models.bins, base, rng);
      gen_record(i, "GF-Stat", "fuel", kNaN, kNaN).note = std::string(to_string(*gen.fuel));
    }
  }

  if (plan.ag_stat) {
    for (std::size_t i = 0; i < out.generators.size(); ++i) {
      Generator& gen = out.generators[i];
      FuelCategory fuel = require_fuel(gen, i, "AG-Stat");
      RandomStream rng(plan.seed, kTagCapacity, i);
      double p_ref = std::isfinite(gen.p_max) ? gen.p_max : gen.pg;
      CapacityDraw draw = ag_stat(p_ref * base, fuel, plan.models, rng);
      double old_value = gen.p_max;
      gen.p_max = draw.p_max_mw / base;
      gen.p_min = std::min(gen.p_min, gen.p_max);
      LogRecord& rec = gen_record(i, "AG-Stat", "p_max", old_value, gen.p_max);
      rec.samples = std::move(draw.samples);
      rec.draws = draw.draws;
      if (draw.fallback) rec.note = "summer reduction fallback";
    }
  }

  if (plan.reactive != ReactiveModel::none) {
    const char* name = plan.reactive == ReactiveModel::am50 ? "RG-AM50" : "RG-AL50";
    for (std::size_t i = 0; i < out.generators.size(); ++i) {
      Generator& gen = out.generators[i];
      if (gen.fuel == FuelCategory::sync) continue;
      if (!std::isfinite(gen.p_max)) {
        log.warnings.push_back(std::string(name) + ": generator " + std::to_string(i) +
                               " has no finite nameplate; reactive bounds unchanged");
        continue;
      }
      auto [q_min, q_max] = plan.reactive == ReactiveModel::am50
                                ? rg_am50(gen.q_min, gen.q_max, gen.p_max)
                                : rg_al50(gen.q_min, gen.q_max, gen.p_max);
      if (q_min != gen.q_min) gen_record(i, name, "q_min", gen.q_min, q_min);
      if (q_max != gen.q_max) gen_record(i, name, "q_max", gen.q_max, q_max);
      gen.q_min = q_min;
      gen.q_max = q_max;
    }
  }

  if (plan.ac_stat) {
    for (std::size_t i = 0; i < out.generators.size(); ++i) {
      Generator& gen = out.generators[i];
      FuelCategory fuel = require_fuel(gen, i, "AC-Stat");
      RandomStream rng(plan.seed, kTagCost, i);
      double sample = kNaN;
      CostPoly cost = ac_stat(fuel, plan.models, rng, &sample);
      LogRecord& rec = gen_record(i, "AC-Stat", "c1", gen.cost.c1, cost.c1);
      if (!std::isnan(sample)) {
        rec.samples = {sample};
        rec.draws = 1;
      }
      if (gen.cost.c2 != 0.0) gen_record(i, "AC-Stat", "c2", gen.cost.c2, 0.0);
      if (gen.cost.c0 != 0.0) gen_record(i, "AC-Stat", "c0", gen.cost.c0, 0.0);
      gen.cost = cost;
    }
  }

  if (plan.tl_stat || plan.tl_ub) {
    const char* name = plan.tl_stat ? "TL-Stat" : "TL-UB";
    double theta = deg_to_rad(plan.tl_ub_theta_deg);
    for (std::size_t k = 0; k < out.branches.size(); ++k) {
      Branch& br = out.branches[k];
      const Bus& from = bus_of(br.from_bus);
      const Bus& to = bus_of(br.to_bus);
      std::optional<double> stat;
      std::optional<double> upper;
      if (plan.tl_stat) {
        stat = tl_stat(br, from, to, plan.models.thermal, base, plan.thermal_voltage);
      }
      if (plan.tl_ub) {
        UpperBound ub = tl_ub(br, from, to, theta);
        upper = ub.limit;
        if (ub.weak) {
          log.warnings.push_back("TL-UB: branch " + std::to_string(k) +
                                 " angle term is small compared with the voltage band");
        }
      }
      auto limit = tl_combined(br.rate_a, stat, upper);
      if (limit != br.rate_a) {
        std::string note = stat && (!upper || *stat <= *upper) ? "statistical" : "upper bound";
        if (!plan.tl_stat) note.clear();
        log.records.push_back({Violation::Element::branch, k, name, "rate_a",
                               br.rate_a.value_or(kInf), *limit, {}, 0, note});
        br.rate_a = limit;
      }
    }
  }

  if (plan.angle_bound_deg) {
    double theta = deg_to_rad(*plan.angle_bound_deg);
    for (std::size_t k = 0; k < out.branches.size(); ++k) {
      Branch& br = out.branches[k];
      if (br.angle_min != -theta) {
        log.records.push_back({Violation::Element::branch, k, "angle bound", "angle_min", br.angle_min, -theta, {}, 0, {}});
      }
      if (br.angle_max != theta) {
        log.records.push_back({Violation::Element::branch, k, "angle bound", "angle_max", br.angle_max, theta, {}, 0, {}});
      }
      br.angle_min = -theta;
      br.angle_max = theta;
    }
  }
  return {std::move(out), std::move(log)};
}

std::vector<std::string> provenance(const AugmentPlan& plan, const std::string& source) {
  std::vector<std::string> lines;
  lines.push_back(" generated by " + std::string(kToolVersion));
  if (!source.empty()) lines.push_back(" source: " + source);
  std::string models;
  for (const std::string& name : plan.model_names()) {
    if (!models.empty()) models += ", ";
    models += name;
  }
  lines.push_back(" models: " + (models.empty() ? std::string("none") : models));
  if (plan.angle_bound_deg) {
    lines.push_back(" angle bound: " + matpower::format_number(*plan.angle_bound_deg) + " deg");
  }
  lines.push_back(" seed: " + std::to_string(plan.seed));
  return lines;
}

}  // namespace gridcase::augment
