#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gridcase/augment.hpp"
#include "gridcase/fleet.hpp"
#include "gridcase/opf.hpp"
#include "gridcase/powerflow.hpp"
#include "gridcase/scenario.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace gridcase;
using gridcase::testing::load_fixture;
using opf::Formulation;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool within(double got, double want, double tol) { return std::abs(got - want) <= tol; }

bool relative(double got, double want, double tol) { return std::abs(got - want) <= tol * std::abs(want); }

opf::Solution solve_ok(const Network& net, Formulation f, Outcome& out) {
  opf::Solution sol = opf::solve(net, f);
  out.check(sol.status == opt::Status::optimal, std::string(opf::display_name(f)) + " not optimal");
  return sol;
}

// AC objective and each relaxation gap, in percent.
struct Bounds {
  double ac = 0.0;
  double gap[3] = {0.0, 0.0, 0.0};
};

constexpr Formulation kRelaxations[] = {Formulation::cp, Formulation::nfll, Formulation::soc};

Bounds bounds(const Network& net, Outcome& out) {
  Bounds b;
  b.ac = solve_ok(net, Formulation::ac, out).objective;
  for (int k = 0; k < 3; ++k) b.gap[k] = opf::gap(b.ac, solve_ok(net, kRelaxations[k], out).objective);
  return b;
}

void uncongested(Outcome& out) {
  Network net = load_fixture("case3_base.m");
  auto start = Clock::now();
  double ac = solve_ok(net, Formulation::ac, out).objective;
  double t = seconds_since(start);
  out.detail << "AC " << ac << " $/h in " << t << " s";
  out.check(within(ac, 101.0, 0.5), "AC = 101 +- 0.5");
  out.check(t < 1.0, "runtime < 1 s");
}

void capacity(Outcome& out) {
  Network net = load_fixture("case3_capacity.m");
  auto start = Clock::now();
  Bounds b = bounds(net, out);
  double t = seconds_since(start);
  out.detail << "AC " << b.ac << ", CP " << b.gap[0] << "%, NF+LL " << b.gap[1] << "%, SOC " << b.gap[2]
             << "% in " << t << " s";
  out.check(within(b.ac, 985.0, 1.0), "AC = 985 +- 1");
  out.check(within(b.gap[0], 89.84, 0.2), "CP gap = 89.84 +- 0.2");
  out.check(within(b.gap[1], 88.93, 0.5), "NF+LL gap = 88.93 +- 0.5");
  out.check(within(b.gap[2], 88.93, 0.5), "SOC gap = 88.93 +- 0.5");
  out.check(t < 5.0, "runtime < 5 s");
}

void voltage(Outcome& out) {
  Bounds b = bounds(load_fixture("case3_voltage.m"), out);
  out.detail << "AC " << b.ac << ", CP " << b.gap[0] << "%, NF+LL " << b.gap[1] << "%, SOC " << b.gap[2] << "%";
  out.check(within(b.ac, 102.0, 0.5), "AC = 102 +- 0.5");
  for (int k = 0; k < 3; ++k) {
    out.check(within(b.gap[k], 1.96, 0.2), std::string(opf::display_name(kRelaxations[k])) + " gap = 1.96 +- 0.2");
  }
}

void power_flow(Outcome& out) {
  Network net = load_fixture("case3_base.m");
  auto sol = powerflow::solve_pf(net);
  out.check(sol.converged, "power flow converged");
  const double vm[] = {1.100, 1.090, 1.080};
  const double va[] = {0.0, -1.434, -2.895};
  const double mva[] = {64.0, 63.0, 44.0};
  const char* lines[] = {"1-2", "2-3", "1-3"};
  for (int i = 0; i < 3; ++i) {
    double deg = rad_to_deg(sol.theta[i]);
    out.detail << "bus " << i + 1 << " " << sol.v[i] << "/" << deg << " deg; ";
    out.check(within(sol.v[i], vm[i], 1e-3), "bus " + std::to_string(i + 1) + " magnitude");
    out.check(within(deg, va[i], 0.01), "bus " + std::to_string(i + 1) + " angle");
  }
  for (int k = 0; k < 3; ++k) {
    double s = sol.flows[k].s_from * net.base_mva;
    out.detail << "line " << lines[k] << " " << s << " MVA" << (k < 2 ? "; " : "");
    out.check(within(s, mva[k], 1.0), std::string("line ") + lines[k] + " from-end flow");
  }
}

void case9(Outcome& out) {
  Network net = load_fixture("case9.m");
  double ac = solve_ok(net, Formulation::ac, out).objective;
  double soc = opf::gap(ac, solve_ok(net, Formulation::soc, out).objective);
  out.detail << "AC " << ac << " $/h, SOC gap " << soc << "%";
  out.check(within(ac, 5296.69, 1.0), "AC = 5296.69 +- 1");
  out.check(soc <= 0.05, "SOC gap <= 0.05%");
}

void thermal_upper_bound(Outcome& out) {
  Network net = load_fixture("case3_base.m");
  const Branch& line = net.branches[2];
  auto ub = augment::tl_ub(line, net.buses[0], net.buses[2], deg_to_rad(15.0));
  // r = x = 0.1, v^u = 1.1 at both ends
  const double pi = 3.14159265358979323846;
  double y2 = 1.0 / (0.1 * 0.1 + 0.1 * 0.1);
  double vu = 1.1;
  double expected = std::sqrt(vu * vu * y2 * (vu * vu + vu * vu - 2.0 * vu * vu * std::cos(15.0 * pi / 180.0)));
  out.detail << "TL-UB " << ub.limit << " p.u., hand value " << expected;
  out.check(relative(ub.limit, expected, 1e-9), "relative error <= 1e-9");
}

void fits(Outcome& out) {
  std::vector<std::pair<double, double>> points;
  for (double x : {0.7, 1.5, 4.0, 9.0, 25.0, 60.0}) points.emplace_back(x, std::exp(-5.0886) * std::pow(x, 0.4772));
  auto model = fleet::fit_loglog(points);
  out.detail << "log-log (" << model.a << ", " << model.k << ")";
  out.check(within(model.a, -5.0886, 1e-9) && within(model.k, 0.4772, 1e-9), "log-log coefficients to 1e-9");

  std::mt19937_64 rng(7);
  const int draws = 100000;
  const std::pair<const char*, double> rates[] = {{"PEL", 0.023254}, {"NG", 0.009188}, {"COW", 0.003201}};
  double worst = 0.0;
  for (auto [name, rate] : rates) {
    std::exponential_distribution<double> dist(rate);
    std::vector<double> s(draws);
    for (double& v : s) v = dist(rng);
    double got = fleet::fit_exponential(s);
    worst = std::max(worst, std::abs(got - rate) / rate);
    out.check(relative(got, rate, 0.02), std::string(name) + " exponential rate");
  }
  struct Normal {
    const char* name;
    double mean, sd;
  };
  const Normal normals[] = {{"NUC capacity", 1044.56, 219.27}, {"PEL cost", 6.8828, 0.3334},
                            {"NG cost", 1.0606, 0.2006},       {"COW cost", 0.7683, 0.2452},
                            {"NUC cost", 0.2101, 0.0199}};
  for (const Normal& n : normals) {
    std::normal_distribution<double> dist(n.mean, n.sd);
    std::vector<double> s(draws);
    for (double& v : s) v = dist(rng);
    auto got = fleet::fit_normal(s);
    worst = std::max({worst, std::abs(got.mean - n.mean) / n.mean, std::abs(got.stddev - n.sd) / n.sd});
    out.check(relative(got.mean, n.mean, 0.02) && relative(got.stddev, n.sd, 0.02), n.name);
  }
  out.detail << ", worst distribution error " << 100.0 * worst << "%";
}

// Gradient, constraint Jacobian and Lagrangian Hessian against central differences.
bool derivatives_match(const opt::Model& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Eigen::VectorXd x(static_cast<Eigen::Index>(m.num_variables()));
  for (std::size_t j = 0; j < m.num_variables(); ++j) {
    double l = m.var_lower()[j], u = m.var_upper()[j], r = u01(rng);
    double v = m.initial()[j] + r - 0.5;
    if (l == u) {
      v = l;
    } else if (std::isfinite(l) && std::isfinite(u)) {
      v = l + (u - l) * (0.05 + 0.9 * r);
    } else if (std::isfinite(l)) {
      v = l + 0.1 + r;
    } else if (std::isfinite(u)) {
      v = u - 0.1 - r;
    }
    x[static_cast<Eigen::Index>(j)] = v;
  }
  const auto n = x.size();
  const auto rows = static_cast<Eigen::Index>(m.num_constraints());
  Eigen::VectorXd lambda(rows);
  for (Eigen::Index i = 0; i < rows; ++i) lambda[i] = 2.0 * u01(rng) - 1.0;
  const double sigma = 0.7;

  auto d = m.first_order(x);
  Eigen::MatrixXd jac = Eigen::MatrixXd(d.jac);
  Eigen::MatrixXd lower = Eigen::MatrixXd(m.hessian(x, sigma, lambda));
  Eigen::MatrixXd hess = lower + lower.transpose();
  hess.diagonal() = lower.diagonal();
  auto lagrangian_grad = [&](const Eigen::VectorXd& p) {
    auto e = m.first_order(p);
    return Eigen::VectorXd(sigma * e.grad + e.jac.transpose() * lambda);
  };
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-6 * std::max({1.0, std::abs(a), std::abs(b)}); };

  bool ok = true;
  for (Eigen::Index j = 0; j < n; ++j) {
    double h = 1e-5 * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    ok = ok && close(d.grad[j], (m.objective(xp) - m.objective(xm)) / (2 * h));
    Eigen::VectorXd gfd = (m.constraints(xp) - m.constraints(xm)) / (2 * h);
    Eigen::VectorXd hfd = (lagrangian_grad(xp) - lagrangian_grad(xm)) / (2 * h);
    for (Eigen::Index i = 0; i < rows; ++i) ok = ok && close(jac(i, j), gfd[i]);
    for (Eigen::Index i = 0; i < n; ++i) ok = ok && close(hess(i, j), hfd[i]);
  }
  return ok;
}

void dominance(Outcome& out) {
  const Formulation order[] = {Formulation::cp, Formulation::nfll, Formulation::soc, Formulation::ac};
  int solved = 0, skipped = 0, ordered = 0, derivatives = 0;
  double margin = kInf;
  for (std::uint64_t seed = 1000; solved < 50 && seed < 1200; ++seed) {
    Network net = gridcase::testing::random_network(seed);
    double obj[4];
    bool ok = true;
    for (int k = 0; k < 4; ++k) {
      opf::Solution sol = opf::solve(net, order[k]);
      ok = ok && sol.status == opt::Status::optimal;
      obj[k] = sol.objective;
    }
    if (!ok) {
      ++skipped;
      continue;
    }
    ++solved;
    bool in_order = true;
    for (int k = 0; k < 3; ++k) {
      margin = std::min(margin, obj[k + 1] + 1e-6 - obj[k]);
      in_order = in_order && obj[k] <= obj[k + 1] + 1e-6;
    }
    ordered += in_order;
    bool fd = true;
    for (int k = 0; k < 4; ++k) fd = derivatives_match(opf::formulate(net, order[k]).nlp, seed * 4 + k) && fd;
    derivatives += fd;
  }
  out.detail << solved << " networks (" << skipped << " skipped as not all optimal), ordered " << ordered
             << ", derivatives " << derivatives << ", smallest ordering margin " << margin;
  out.check(solved == 50, "50 networks with every solve optimal");
  out.check(ordered == solved, "CP <= NF+LL <= SOC <= AC + 1e-6");
  out.check(derivatives == solved, "finite differences to 1e-6");
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism(Outcome& out) {
  fs::path dir = fs::temp_directory_path() / "gridcase_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto run = [&](const std::string& name) {
    std::string cmd = std::string("\"") + GRIDCASE_CLI + "\" augment \"" + gridcase::testing::fixture("case14.m") +
                      "\" --plan \"" + GRIDCASE_CONFIGS + "/nesta.json\" --seed 42 -o \"" + (dir / name).string() +
                      "\" 2>/dev/null";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
  };
  out.check(run("first.m") && run("second.m"), "augment exit status");
  std::string a = slurp(dir / "first.m"), b = slurp(dir / "second.m");
  std::string la = slurp(dir / "first.json"), lb = slurp(dir / "second.json");
  out.detail << "case " << a.size() << " bytes, log " << la.size() << " bytes";
  out.check(!a.empty() && a == b, "case files identical");
  out.check(!la.empty() && la == lb, "logs identical");
}

void scenarios(Outcome& out) {
  Network net = load_fixture("case3_capacity.m");
  auto api = scenario::gen_api(net, fleet::default_models(), 42);
  opf::Solution ac = solve_ok(api.network, Formulation::ac, out);
  auto flows = powerflow::branch_flows(api.network, ac.v, ac.theta);
  const Branch& line = api.network.branches[1];
  double loading = line.rate_a ? std::max(flows[1].s_from, flows[1].s_to) / *line.rate_a : 0.0;
  out.detail << "API alpha " << api.alpha << ", line 2-3 at " << 100.0 * loading << "%";
  out.check(loading >= 0.99, "line 2-3 loaded to >= 99%");

  for (const char* name : {"case3_capacity.m", "case9.m"}) {
    auto sad = scenario::gen_sad(load_fixture(name));
    bool feasible = opf::check_feasible(sad.network).feasible &&
                    opf::solve(sad.network, Formulation::ac).status == opt::Status::optimal;
    auto again = scenario::gen_sad(sad.network);
    out.detail << "; " << name << " SAD " << sad.theta_deg << " deg, again " << again.theta_deg;
    out.check(feasible, std::string(name) + " SAD output re-solves");
    out.check(std::abs(again.theta_deg - sad.theta_deg) <= 0.01, std::string(name) + " SAD idempotent");
  }
}

struct Criterion {
  int id;
  const char* title;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "3-bus uncongested AC objective and runtime", uncongested},
      {2, "3-bus capacity scenario bounds", capacity},
      {3, "3-bus voltage scenario bounds", voltage},
      {4, "3-bus power flow solution", power_flow},
      {5, "9-bus AC objective and SOC gap", case9},
      {6, "TL-UB on line 1-3 at 15 deg", thermal_upper_bound},
      {7, "model fits on synthetic data", fits},
      {8, "relaxation ordering and derivatives on random networks", dominance},
      {9, "augment determinism on the 14-bus case", determinism},
      {10, "API and SAD scenario generators", scenarios},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Outcome out;
    out.detail.precision(6);
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    failed += !out.pass;
    std::printf("%s %2d %s: %s\n", out.pass ? "PASS" : "FAIL", c.id, c.title, out.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
