#include "gridcase/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gridcase::scenario {
namespace {

bool at_slack(const Network& net, const std::unordered_map<int, std::size_t>& lookup, const Generator& g) {
  auto it = lookup.find(g.bus);
  return it != lookup.end() && net.buses[it->second].kind == BusKind::slack;
}

std::string format_alpha(double alpha) {
  std::ostringstream out;
  out.precision(8);
  out << alpha;
  return out.str();
}

}  // namespace

Network api_oracle_network(const Network& net, double alpha, bool active_only) {
  Network out = net;
  for (Bus& b : out.buses) {
    b.pd *= alpha;
    if (!active_only) b.qd *= alpha;
  }
  auto lookup = net.bus_lookup();
  for (Generator& g : out.generators) {
    if (at_slack(net, lookup, g)) {
      g.p_min = -kInf;
      g.p_max = kInf;
    } else {
      double p = alpha * (std::isfinite(g.pg) ? g.pg : 0.0);
      g.p_min = p;
      g.p_max = p;
    }
    g.q_min = -kInf;
    g.q_max = kInf;
  }
  return out;
}

ApiResult gen_api(const Network& net, const fleet::AugmentModels& models, std::uint64_t seed,
                  const ApiOptions& options) {
  bool limited = std::any_of(net.branches.begin(), net.branches.end(),
                             [](const Branch& br) { return br.in_service && br.rate_a; });
  if (!limited) throw DataError("no branch has a finite thermal limit; demand can grow without bound");

  ApiResult result;
  opt::IpmOptions tight = options.ipm;
  tight.tolerance = std::min(tight.tolerance, 1e-10);
  auto oracle = [&](double alpha, opf::Feasibility& out) {
    Network scaled = api_oracle_network(net, alpha, options.active_only);
    ++result.oracle_calls;
    out = opf::check_feasible(scaled, options.ipm);
    if (!out.feasible) {
      ++result.oracle_calls;
      opf::Feasibility retry = opf::check_feasible(scaled, tight);
      if (retry.feasible) {
        result.notes.push_back("oracle noise at alpha " + format_alpha(alpha) + "; tightened solve is feasible");
        out = std::move(retry);
      }
    }
    return out.feasible;
  };

  opf::Feasibility at_lo, probe;
  if (!oracle(1.0, at_lo)) throw DataError("case is not AC feasible at its nominal demand");
  if (oracle(options.alpha_max, probe)) {
    throw DataError("case is still feasible at " + format_alpha(options.alpha_max) + "x demand");
  }
  double lo = 1.0, hi = options.alpha_max;
  while (hi - lo > options.relative_tolerance * lo) {
    double mid = 0.5 * (lo + hi);
    if (oracle(mid, probe)) {
      lo = mid;
      at_lo = std::move(probe);
    } else {
      hi = mid;
    }
  }
  result.alpha = lo;
  result.active_only = options.active_only;
  result.dispatch = at_lo.solution;

  Network fixed = net;
  for (Bus& b : fixed.buses) {
    b.pd *= lo;
    if (!options.active_only) b.qd *= lo;
  }
  const opf::Solution& sol = result.dispatch;
  for (std::size_t k = 0; k < fixed.buses.size(); ++k) {
    if (std::isnan(sol.v[k])) continue;
    fixed.buses[k].v_init = sol.v[k];
    fixed.buses[k].theta_init = sol.theta[k];
  }
  auto lookup = fixed.bus_lookup();
  for (std::size_t i = 0; i < fixed.generators.size(); ++i) {
    Generator& g = fixed.generators[i];
    if (std::isnan(sol.pg[i])) continue;
    g.pg = sol.pg[i];
    g.qg = sol.qg[i];
    g.v_set = sol.v[lookup.at(g.bus)];
    g.p_min = 0.0;
    g.p_max = kInf;
    g.q_min = -kInf;
    g.q_max = kInf;
  }

  augment::AugmentPlan plan;
  plan.gf_stat = std::any_of(fixed.generators.begin(), fixed.generators.end(),
                             [](const Generator& g) { return !g.fuel; });
  plan.ag_stat = true;
  plan.reactive = augment::ReactiveModel::al50;
  plan.ac_stat = true;
  plan.seed = seed;
  plan.models = models;
  auto [augmented, log] = augment::apply_plan(fixed, plan);
  result.network = std::move(augmented);
  result.plan = plan;
  result.log = std::move(log);
  return result;
}

Network with_angle_bound(const Network& net, double theta_rad) {
  Network out = net;
  for (Branch& br : out.branches) {
    if (!br.in_service) continue;
    br.angle_min = -theta_rad;
    br.angle_max = theta_rad;
  }
  return out;
}

SadResult gen_sad(const Network& net, const SadOptions& options) {
  SadResult result;
  auto feasible = [&](double deg) {
    ++result.oracle_calls;
    return opf::check_feasible(with_angle_bound(net, deg_to_rad(deg)), options.ipm).feasible;
  };
  if (!feasible(options.theta_max_deg)) {
    std::ostringstream msg;
    msg << "case is not AC feasible with angle differences of " << options.theta_max_deg << " deg";
    throw DataError(msg.str());
  }
  double lo = 0.0, hi = options.theta_max_deg;
  while (hi - lo > options.tolerance_deg) {
    double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  result.theta_deg = hi;
  result.network = with_angle_bound(net, deg_to_rad(hi));
  return result;
}

nlohmann::json to_json(const ApiResult& result, const std::string& case_name) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["generator"] = "api";
  doc["case"] = case_name;
  doc["alpha"] = result.alpha;
  doc["active_only"] = result.active_only;
  doc["oracle_calls"] = result.oracle_calls;
  doc["notes"] = result.notes;
  doc["augment"] = augment::to_json(result.log, result.plan);
  return doc;
}

nlohmann::json to_json(const SadResult& result, const std::string& case_name) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["generator"] = "sad";
  doc["case"] = case_name;
  doc["theta_deg"] = result.theta_deg;
  doc["oracle_calls"] = result.oracle_calls;
  return doc;
}

}  // namespace gridcase::scenario
