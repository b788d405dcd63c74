#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gridcase/network.hpp"
#include "gridcase/opt/ipm.hpp"
#include "gridcase/opt/model.hpp"

namespace gridcase::opf {

enum class Formulation { ac, cp, nfll, soc };

std::string_view to_string(Formulation model);       // "ac", "cp", "nfll", "soc"
std::string_view display_name(Formulation model);    // "AC", "CP", "NF+LL", "SOC"
std::optional<Formulation> parse_formulation(std::string_view name);

/// The formulation cannot be applied to this network.
class NotApplicable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An NLP together with the variable positions of the network quantities.
/// Per-bus vectors are indexed like net.buses, per-generator vectors like
/// net.generators; -1 marks a quantity the formulation does not carry.
struct Problem {
  Formulation kind = Formulation::ac;
  bool convex = false;
  opt::Model nlp;
  std::vector<int> v, theta, w;
  std::vector<int> pg, qg;
  std::vector<int> slack;  // elastic balance slacks
};

Problem formulate_ac(const Network& net);
/// Throws NotApplicable when an in-service branch has negative r or x.
Problem formulate_cp(const Network& net);
Problem formulate_nfll(const Network& net);
Problem formulate_soc(const Network& net);
Problem formulate(const Network& net, Formulation model);

/// AC constraints with nonnegative slacks on both sides of every balance row;
/// the objective is the slack total.
Problem formulate_elastic(const Network& net);

struct Solution {
  Formulation kind = Formulation::ac;
  opt::Status status = opt::Status::numerical_failure;
  double objective = 0.0;  // $/h
  double max_violation = 0.0;
  int iterations = 0;
  std::vector<double> v, theta, w;  // per bus, NaN when absent
  std::vector<double> pg, qg;       // per generator, p.u., NaN when absent
};

Solution solve(const Problem& problem, const opt::IpmOptions& options = {});

struct SolveOptions {
  opt::IpmOptions ipm;
  int starts = 1;  // AC only: extra starts perturb the flat start
  std::uint64_t seed = 0;
};

/// Formulates and solves; the AC model keeps the best optimal start.
Solution solve(const Network& net, Formulation model, const SolveOptions& options = {});

/// 100 (ac - relax) / ac. Throws DataError when ac is not positive.
double gap(double ac_objective, double relax_objective);

struct Feasibility {
  bool feasible = false;
  double slack = 0.0;  // p.u. mismatch the network cannot absorb
  Solution solution;
};
inline constexpr double kFeasibilityTolerance = 1e-6;

Feasibility check_feasible(const Network& net, const opt::IpmOptions& options = {});

struct ModelResult {
  Formulation model = Formulation::ac;
  bool applicable = true;
  opt::Status status = opt::Status::numerical_failure;
  double objective = 0.0;
  int iterations = 0;
  std::optional<double> gap;  // percent; set when both solves are optimal
};

struct GapReport {
  std::string case_name;
  std::string error;  // non-empty when the case could not be built
  ModelResult ac;
  std::vector<ModelResult> relaxations;
};

GapReport gap_report(const std::string& case_name, const Network& net,
                     const std::vector<Formulation>& relaxations, const SolveOptions& options = {});

/// One report per path in input order. Per-case failures are recorded, never thrown.
std::vector<GapReport> gap_table(const std::vector<std::string>& paths,
                                 const std::vector<Formulation>& relaxations,
                                 const SolveOptions& options = {}, unsigned jobs = 1);

nlohmann::json to_json(const std::vector<GapReport>& reports,
                       const std::vector<Formulation>& relaxations);
std::string to_markdown(const std::vector<GapReport>& reports,
                        const std::vector<Formulation>& relaxations);

}  // namespace gridcase::opf
