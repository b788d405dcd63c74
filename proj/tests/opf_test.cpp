#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "gridcase/opf.hpp"
#include "gridcase/powerflow.hpp"
#include "gridcase/rng.hpp"
#include "test_support.hpp"

using namespace gridcase;
using gridcase::testing::load_fixture;
using gridcase::testing::random_network;
using gridcase::testing::three_bus;
using opf::Formulation;

namespace {

constexpr Formulation kAll[] = {Formulation::ac, Formulation::cp, Formulation::nfll, Formulation::soc};
constexpr Formulation kRelaxations[] = {Formulation::cp, Formulation::nfll, Formulation::soc};

double objective(const Network& net, Formulation model) {
  opf::Solution sol = opf::solve(net, model);
  REQUIRE_MESSAGE(sol.status == opt::Status::optimal, opf::to_string(model));
  return sol.objective;
}

// Random point strictly inside the variable bounds.
Eigen::VectorXd interior_point(const opt::Model& m, RandomStream& rng) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(m.num_variables()));
  for (std::size_t j = 0; j < m.num_variables(); ++j) {
    double l = m.var_lower()[j], u = m.var_upper()[j], u01 = rng.uniform();
    double v;
    if (l == u) {
      v = l;
    } else if (std::isfinite(l) && std::isfinite(u)) {
      v = l + (u - l) * (0.05 + 0.9 * u01);
    } else if (std::isfinite(l)) {
      v = l + 0.1 + u01;
    } else if (std::isfinite(u)) {
      v = u - 0.1 - u01;
    } else {
      v = m.initial()[j] + u01 - 0.5;
    }
    x[static_cast<Eigen::Index>(j)] = v;
  }
  return x;
}

bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

// Gradient, Jacobian and Lagrangian Hessian against central differences.
void check_derivatives(const opt::Model& m, std::uint64_t seed) {
  RandomStream rng(seed, 1, 0);
  Eigen::VectorXd x = interior_point(m, rng);
  const auto n = x.size();
  const auto rows = static_cast<Eigen::Index>(m.num_constraints());
  Eigen::VectorXd lambda(rows);
  for (Eigen::Index i = 0; i < rows; ++i) lambda[i] = 2.0 * rng.uniform() - 1.0;
  const double sigma = 0.7;

  auto d = m.first_order(x);
  Eigen::MatrixXd jac = Eigen::MatrixXd(d.jac);
  Eigen::MatrixXd hl = Eigen::MatrixXd(m.hessian(x, sigma, lambda));
  Eigen::MatrixXd hess = hl + hl.transpose();
  hess.diagonal() = hl.diagonal();
  auto lagrangian_grad = [&](const Eigen::VectorXd& p) {
    auto e = m.first_order(p);
    return Eigen::VectorXd(sigma * e.grad + e.jac.transpose() * lambda);
  };

  for (Eigen::Index j = 0; j < n; ++j) {
    double h = 1e-5 * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    double fd = (m.objective(xp) - m.objective(xm)) / (2 * h);
    CHECK_MESSAGE(close(d.grad[j], fd, 1e-6), "objective gradient, variable " << j);
    Eigen::VectorXd gfd = (m.constraints(xp) - m.constraints(xm)) / (2 * h);
    for (Eigen::Index i = 0; i < rows; ++i) {
      CHECK_MESSAGE(close(jac(i, j), gfd[i], 1e-6), "jacobian (" << i << ", " << j << ")");
    }
    Eigen::VectorXd hfd = (lagrangian_grad(xp) - lagrangian_grad(xm)) / (2 * h);
    for (Eigen::Index i = 0; i < n; ++i) {
      CHECK_MESSAGE(close(hess(i, j), hfd[i], 1e-6), "hessian (" << i << ", " << j << ")");
    }
  }
}

// Minimum-cost dispatch of linear costs against total demand.
double merit_order(const Network& net) {
  std::vector<const Generator*> gens;
  for (const Generator& g : net.generators) {
    REQUIRE(g.cost.c2 == 0.0);
    gens.push_back(&g);
  }
  std::sort(gens.begin(), gens.end(), [](auto* a, auto* b) { return a->cost.c1 < b->cost.c1; });
  double need = 0.0, cost = 0.0;
  for (const Bus& b : net.buses) need += b.pd * net.base_mva;
  for (const Generator* g : gens) {
    double p = std::clamp(need, g->p_min * net.base_mva, g->p_max * net.base_mva);
    cost += g->cost(p);
    need -= p;
  }
  REQUIRE(need <= 1e-9);
  return cost;
}

}  // namespace

TEST_CASE("optimality gap arithmetic") {
  CHECK(opf::gap(100.0, 100.0) == 0.0);
  CHECK(opf::gap(985.0, 100.0) == doctest::Approx(89.85).epsilon(1e-4));
  CHECK_THROWS_AS(opf::gap(0.0, 1.0), DataError);
  CHECK_THROWS_AS(opf::gap(-5.0, 1.0), DataError);
}

TEST_CASE("formulation names round-trip") {
  for (Formulation f : kAll) CHECK(opf::parse_formulation(opf::to_string(f)) == f);
  CHECK(opf::parse_formulation("NF+LL") == Formulation::nfll);
  CHECK_FALSE(opf::parse_formulation("sdp"));
}

TEST_CASE("three-bus capacity scenario bounds") {
  Network net = load_fixture("case3_capacity.m");
  double ac = objective(net, Formulation::ac);
  CHECK(std::abs(ac - 985.0) <= 1.0);
  CHECK(std::abs(opf::gap(ac, objective(net, Formulation::cp)) - 89.84) <= 0.2);
  CHECK(std::abs(opf::gap(ac, objective(net, Formulation::nfll)) - 88.93) <= 0.5);
  CHECK(std::abs(opf::gap(ac, objective(net, Formulation::soc)) - 88.93) <= 0.5);
}

TEST_CASE("three-bus voltage scenario bounds") {
  Network net = load_fixture("case3_voltage.m");
  double ac = objective(net, Formulation::ac);
  CHECK(std::abs(ac - 102.0) <= 0.5);
  CHECK(objective(net, Formulation::cp) == doctest::Approx(100.0).epsilon(1e-8));
  CHECK(std::abs(opf::gap(ac, objective(net, Formulation::cp)) - 1.96) <= 0.1);
  CHECK(std::abs(opf::gap(ac, objective(net, Formulation::nfll)) - 1.96) <= 0.2);
  CHECK(std::abs(opf::gap(ac, objective(net, Formulation::soc)) - 1.96) <= 0.2);
}

TEST_CASE("three-bus uncongested AC optimum matches the power-flow dispatch") {
  // Generator 3 is ten times dearer than the marginal loss, so the optimum
  // serves everything from bus 1 and only the slack voltage is free.
  Network net = load_fixture("case3_base.m");
  double ac = objective(net, Formulation::ac);
  double best = kInf;
  for (int k = 0; k <= 20; ++k) {
    Network pf = net;
    double v = 0.9 + 0.01 * k;
    pf.generators[0].v_set = v;
    pf.buses[0].v_init = v;
    pf.generators[1].pg = 0.0;
    auto sol = powerflow::solve_pf(pf);
    auto violations = powerflow::check_operational(pf, sol);
    bool ok = std::none_of(violations.begin(), violations.end(), [](const Violation& w) { return w.kind == "voltage"; });
    if (ok) best = std::min(best, net.generators[0].cost(sol.gen_p[0] * net.base_mva));
  }
  CHECK(ac == doctest::Approx(best).epsilon(1e-6));
  CHECK(ac <= best + 1e-6);
}

TEST_CASE("case9 AC objective and SOC gap") {
  Network net = load_fixture("case9.m");
  double ac = objective(net, Formulation::ac);
  CHECK(std::abs(ac - 5296.69) <= 1.0);
  CHECK(opf::gap(ac, objective(net, Formulation::soc)) <= 0.05);
}

TEST_CASE("case5 and case14 reproduce their table rows") {
  Network c5 = load_fixture("case5.m");
  double ac5 = objective(c5, Formulation::ac);
  CHECK(std::abs(ac5 - 17551.89) <= 1.0);
  double cp5 = objective(c5, Formulation::cp);
  CHECK(cp5 == doctest::Approx(merit_order(c5)).epsilon(1e-8));
  CHECK(std::abs(opf::gap(ac5, cp5) - 15.62) <= 0.005);
  CHECK(std::abs(opf::gap(ac5, objective(c5, Formulation::soc)) - 14.54) <= 0.01);

  Network c14 = load_fixture("case14.m");
  double ac14 = objective(c14, Formulation::ac);
  CHECK(std::abs(ac14 - 8081.53) <= 1.0);
  CHECK(std::abs(opf::gap(ac14, objective(c14, Formulation::soc)) - 0.08) <= 0.01);
}

TEST_CASE("copper plate") {
  SUBCASE("single generator covering the load pays its cost curve") {
    Network net = three_bus();
    net.generators.resize(1);
    net.generators[0].cost = {0.02, 7.0, 30.0};
    CHECK(objective(net, Formulation::cp) == doctest::Approx(net.generators[0].cost(100.0)).epsilon(1e-8));
  }
  SUBCASE("negative impedance is not applicable") {
    Network net = three_bus();
    net.branches[2].x = -0.1;
    CHECK_THROWS_AS(opf::formulate_cp(net), opf::NotApplicable);
    opf::GapReport report = opf::gap_report("neg", net, {Formulation::cp, Formulation::soc});
    REQUIRE(report.relaxations.size() == 2);
    CHECK_FALSE(report.relaxations[0].applicable);
    CHECK_FALSE(report.relaxations[0].gap);
    CHECK(opf::to_markdown({report}, {Formulation::cp, Formulation::soc}).find("| --- |") != std::string::npos);
  }
}

TEST_CASE("lossless network flow equals copper plate") {
  Network net = three_bus();
  for (Branch& br : net.branches) br.r = 0.0;
  net.generators[1].q_max = kInf;
  net.generators[1].q_min = -kInf;
  CHECK(objective(net, Formulation::nfll) == doctest::Approx(objective(net, Formulation::cp)).epsilon(1e-7));
}

TEST_CASE("relaxations are ordered on random networks") {
  int solved = 0;
  for (std::uint64_t seed = 1; solved < 20 && seed < 200; ++seed) {
    Network net = random_network(seed);
    double obj[4];
    bool ok = true;
    for (int k = 0; k < 4; ++k) {
      opf::Solution sol = opf::solve(net, kAll[k]);
      ok = ok && sol.status == opt::Status::optimal;
      obj[k] = sol.objective;
    }
    if (!ok) continue;
    ++solved;
    CAPTURE(seed);
    CHECK(obj[1] <= obj[2] + 1e-6);
    CHECK(obj[2] <= obj[3] + 1e-6);
    CHECK(obj[3] <= obj[0] + 1e-6);
  }
  CHECK(solved == 20);
}

TEST_CASE("derivatives of every formulation match finite differences") {
  std::vector<Network> nets{load_fixture("case9.m"), load_fixture("case3_capacity.m")};
  for (std::uint64_t seed = 3; seed < 6; ++seed) nets.push_back(random_network(seed));
  std::uint64_t s = 0;
  for (const Network& net : nets) {
    for (Formulation f : kAll) {
      CAPTURE(net.name);
      CAPTURE(opf::to_string(f));
      check_derivatives(opf::formulate(net, f).nlp, ++s);
    }
    check_derivatives(opf::formulate_elastic(net).nlp, ++s);
  }
}

TEST_CASE("convex formulations reach the same optimum from random starts") {
  Network net = load_fixture("case9.m");
  for (Formulation f : kRelaxations) {
    opf::Problem pb = opf::formulate(net, f);
    double reference = opf::solve(pb).objective;
    for (std::uint64_t k = 0; k < 10; ++k) {
      RandomStream rng(k, 2, static_cast<std::uint64_t>(f));
      Eigen::VectorXd x = interior_point(pb.nlp, rng);
      for (Eigen::Index j = 0; j < x.size(); ++j) pb.nlp.set_initial(static_cast<int>(j), x[j]);
      opf::Solution sol = opf::solve(pb);
      CAPTURE(opf::to_string(f));
      CHECK(sol.status == opt::Status::optimal);
      CHECK(sol.objective == doctest::Approx(reference).epsilon(1e-6));
    }
  }
}

TEST_CASE("AC solution is reproduced by the power flow") {
  Network net = load_fixture("case9.m");
  opf::Solution sol = opf::solve(net, Formulation::ac);
  REQUIRE(sol.status == opt::Status::optimal);
  Network fixed = net;
  auto lookup = net.bus_lookup();
  for (std::size_t i = 0; i < fixed.generators.size(); ++i) {
    Generator& g = fixed.generators[i];
    g.pg = sol.pg[i];
    g.v_set = sol.v[lookup.at(g.bus)];
  }
  auto pf = powerflow::solve_pf(fixed);
  for (std::size_t b = 0; b < net.buses.size(); ++b) {
    CHECK(std::abs(pf.v[b] - sol.v[b]) <= 1e-6);
    CHECK(std::abs(pf.theta[b] - sol.theta[b]) <= 1e-6);
  }
  for (std::size_t i = 0; i < net.generators.size(); ++i) {
    CHECK(std::abs(pf.gen_p[i] - sol.pg[i]) <= 1e-6);
  }
}

TEST_CASE("multi-start never worsens the AC objective") {
  Network net = load_fixture("case5.m");
  opf::SolveOptions options;
  options.starts = 4;
  options.seed = 7;
  opf::Solution multi = opf::solve(net, Formulation::ac, options);
  CHECK(multi.status == opt::Status::optimal);
  CHECK(multi.objective <= objective(net, Formulation::ac) + 1e-6);
}

TEST_CASE("AC formulation requires a slack bus") {
  Network net = three_bus();
  net.buses[0].kind = BusKind::pv;
  CHECK_THROWS_AS(opf::formulate_ac(net), DataError);
}

TEST_CASE("elastic feasibility") {
  Network net = three_bus();
  opf::Feasibility ok = opf::check_feasible(net);
  CHECK(ok.feasible);
  CHECK(ok.slack <= opf::kFeasibilityTolerance);

  for (Generator& g : net.generators) g.p_max = 0.3;
  opf::Feasibility short_supply = opf::check_feasible(net);
  CHECK_FALSE(short_supply.feasible);
  CHECK(short_supply.slack >= 0.4 - 1e-6);
}

TEST_CASE("gap table keeps order and records failures") {
  namespace fs = std::filesystem;
  fs::path bad = fs::temp_directory_path() / "gridcase_opf_bad.m";
  std::ofstream(bad) << "function mpc = broken\nmpc.bus = [1 2;\n";
  std::vector<std::string> paths{gridcase::testing::fixture("case3_capacity.m"), bad.string(),
                                 gridcase::testing::fixture("case3_voltage.m")};
  std::vector<Formulation> models{Formulation::cp, Formulation::nfll, Formulation::soc};
  auto reports = opf::gap_table(paths, models, {}, 2);
  fs::remove(bad);
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].case_name == "case3_capacity");
  CHECK(reports[1].case_name == "gridcase_opf_bad");
  CHECK_FALSE(reports[1].error.empty());
  CHECK(reports[2].case_name == "case3_voltage");
  CHECK(reports[0].relaxations.size() == 3);
  CHECK(reports[0].relaxations[0].gap.has_value());

  auto doc = opf::to_json(reports, models);
  CHECK(doc["schema_version"] == 1);
  CHECK(doc["cases"].size() == 3);
  CHECK(doc["cases"][1].contains("error"));
  CHECK(doc["cases"][0]["relaxations"][2]["model"] == "soc");

  std::string md = opf::to_markdown(reports, models);
  CHECK(md.find("| Case | AC ($/h) | CP (%) | NF+LL (%) | SOC (%) |") == 0);
  CHECK(md.find("| gridcase_opf_bad | err. | err. | err. | err. |") != std::string::npos);
  CHECK(md.find("| case3_voltage | 102.01 |") != std::string::npos);

  CHECK(opf::gap_table({}, models).empty());
}
