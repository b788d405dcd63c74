#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridcase/augment.hpp"
#include "gridcase/fleet.hpp"
#include "gridcase/network.hpp"
#include "gridcase/opf.hpp"

namespace gridcase::scenario {

struct ApiOptions {
  bool active_only = false;  // scale p^d only
  double alpha_max = 64.0;
  double relative_tolerance = 1e-4;
  opt::IpmOptions ipm;
};

struct ApiResult {
  Network network;           // augmented output case
  double alpha = 1.0;        // demand scale found by bisection
  bool active_only = false;
  opf::Solution dispatch;    // feasibility solution at alpha
  augment::AugmentPlan plan;
  augment::AugmentLog log;
  int oracle_calls = 0;
  std::vector<std::string> notes;
};

/// Network used by the API feasibility oracle at demand scale `alpha`: loads
/// scaled, non-slack active outputs scaled from their set-points, slack output
/// and all reactive outputs unbounded.
Network api_oracle_network(const Network& net, double alpha, bool active_only);

/// Congested variant: largest uniform demand scale that stays AC feasible, with
/// loads and generator set-points fixed there and AG-Stat, RG-AL50 and AC-Stat
/// applied (GF-Stat first when a generator has no fuel). Throws DataError when
/// no branch has a finite thermal limit, the case is infeasible at its own
/// demand, or still feasible at `alpha_max`.
ApiResult gen_api(const Network& net, const fleet::AugmentModels& models, std::uint64_t seed,
                  const ApiOptions& options = {});

struct SadOptions {
  double theta_max_deg = 30.0;
  double tolerance_deg = 0.01;
  opt::IpmOptions ipm;
};

struct SadResult {
  Network network;
  double theta_deg = 0.0;
  int oracle_calls = 0;
};

/// Copy of `net` with every in-service branch limited to |θ_i - θ_j| <= theta.
Network with_angle_bound(const Network& net, double theta_rad);

/// Small-angle variant: the smallest uniform angle-difference bound, to within
/// the tolerance, that keeps the case AC feasible. Throws DataError when the
/// case is infeasible at `theta_max_deg`.
SadResult gen_sad(const Network& net, const SadOptions& options = {});

nlohmann::json to_json(const ApiResult& result, const std::string& case_name);
nlohmann::json to_json(const SadResult& result, const std::string& case_name);

}  // namespace gridcase::scenario
