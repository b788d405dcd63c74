#include "gridcase/opf.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <thread>

#include "gridcase/matpower.hpp"
#include "gridcase/powerflow.hpp"
#include "gridcase/rng.hpp"

namespace gridcase::opf {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kConeEpsilon = 1e-10;
constexpr std::uint64_t kTagStart = 0x6f70662d7374ULL;

double clamp_into(double value, double lo, double hi) {
  if (!std::isfinite(value)) value = 0.0;
  return std::min(std::max(value, lo), hi);
}

// Injected power at one branch end: self and mutual admittance parts.
struct EndAdmittance {
  double g_self, b_self, g_mut, b_mut;
};

// x = (v_a, v_b, theta_a, theta_b)
template <class T>
T end_p(const EndAdmittance& y, const std::array<T, 4>& x) {
  T d = x[2] - x[3];
  return y.g_self * x[0] * x[0] + x[0] * x[1] * (y.g_mut * opt::cos(d) + y.b_mut * opt::sin(d));
}

template <class T>
T end_q(const EndAdmittance& y, const std::array<T, 4>& x) {
  T d = x[2] - x[3];
  return -y.b_self * x[0] * x[0] + x[0] * x[1] * (y.g_mut * opt::sin(d) - y.b_mut * opt::cos(d));
}

struct Ends {
  EndAdmittance from, to;
};

Ends end_admittances(const Branch& br) {
  auto y = powerflow::branch_admittance(br);
  return {{y.ff.real(), y.ff.imag(), y.ft.real(), y.ft.imag()},
          {y.tt.real(), y.tt.imag(), y.tf.real(), y.tf.imag()}};
}

struct Layout {
  powerflow::Topology topo;
  std::vector<long> gen_bus;  // active bus index per generator, -1 when out
};

Layout layout(const Network& net) {
  Layout out{powerflow::topology(net), {}};
  auto lookup = net.bus_lookup();
  out.gen_bus.assign(net.generators.size(), -1);
  for (std::size_t i = 0; i < net.generators.size(); ++i) {
    const Generator& gen = net.generators[i];
    if (!gen.in_service) continue;
    auto it = lookup.find(gen.bus);
    if (it == lookup.end()) throw DataError("generator " + std::to_string(i + 1) + " references unknown bus " + std::to_string(gen.bus));
    out.gen_bus[i] = out.topo.index_of[it->second];
  }
  return out;
}

Problem empty_problem(const Network& net, Formulation kind, bool convex) {
  Problem pb;
  pb.kind = kind;
  pb.convex = convex;
  pb.v.assign(net.buses.size(), -1);
  pb.theta.assign(net.buses.size(), -1);
  pb.w.assign(net.buses.size(), -1);
  pb.pg.assign(net.generators.size(), -1);
  pb.qg.assign(net.generators.size(), -1);
  return pb;
}

void add_generators(Problem& pb, const Network& net, const Layout& lay, bool reactive) {
  for (std::size_t i = 0; i < net.generators.size(); ++i) {
    if (lay.gen_bus[i] < 0) continue;
    const Generator& g = net.generators[i];
    pb.pg[i] = pb.nlp.add_variable(g.p_min, g.p_max, clamp_into(g.pg, g.p_min, g.p_max));
    if (reactive) pb.qg[i] = pb.nlp.add_variable(g.q_min, g.q_max, clamp_into(g.qg, g.q_min, g.q_max));
  }
}

void add_cost(Problem& pb, const Network& net) {
  const double base = net.base_mva;
  for (std::size_t i = 0; i < net.generators.size(); ++i) {
    if (pb.pg[i] < 0) continue;
    const CostPoly& c = net.generators[i].cost;
    pb.nlp.add_constant(opt::kObjective, c.c0);
    if (c.c1 != 0.0) pb.nlp.add_linear(opt::kObjective, pb.pg[i], c.c1 * base);
    if (c.c2 != 0.0) {
      double k = c.c2 * base * base;
      pb.nlp.add_term<1>(opt::kObjective, {pb.pg[i]}, [k](const auto& x) { return k * x[0] * x[0]; });
    }
  }
}

// Balance rows per active bus: generation minus withdrawals equals demand.
struct Balance {
  std::vector<int> p, q;
};

Balance add_balance_rows(Problem& pb, const Network& net, const Layout& lay, bool reactive) {
  Balance rows;
  for (std::size_t k : lay.topo.buses) {
    const Bus& b = net.buses[k];
    rows.p.push_back(pb.nlp.add_constraint(b.pd, b.pd));
    if (reactive) rows.q.push_back(pb.nlp.add_constraint(b.qd, b.qd));
  }
  for (std::size_t i = 0; i < net.generators.size(); ++i) {
    if (lay.gen_bus[i] < 0) continue;
    pb.nlp.add_linear(rows.p[lay.gen_bus[i]], pb.pg[i], 1.0);
    if (reactive) pb.nlp.add_linear(rows.q[lay.gen_bus[i]], pb.qg[i], 1.0);
  }
  return rows;
}

void check_impedances(const Network& net, const Layout& lay, Formulation kind) {
  for (std::size_t e : lay.topo.branches) {
    const Branch& br = net.branches[e];
    if (br.r < 0.0 || br.x < 0.0) {
      throw NotApplicable(std::string(display_name(kind)) + " does not apply: branch " +
                          std::to_string(e + 1) + " has a negative impedance");
    }
  }
}

Problem build_ac(const Network& net, bool elastic) {
  Layout lay = layout(net);
  Problem pb = empty_problem(net, Formulation::ac, false);
  opt::Model& m = pb.nlp;

  long ref = -1;
  for (std::size_t k : lay.topo.buses) {
    if (net.buses[k].kind == BusKind::slack) {
      ref = static_cast<long>(k);
      break;
    }
  }
  if (ref < 0) throw DataError("AC-OPF needs a slack bus");

  for (std::size_t k : lay.topo.buses) {
    const Bus& b = net.buses[k];
    pb.v[k] = m.add_variable(b.v_min, b.v_max, clamp_into(1.0, b.v_min, b.v_max));
    pb.theta[k] = static_cast<long>(k) == ref ? m.add_variable(0.0, 0.0, 0.0)
                                              : m.add_variable(-kInf, kInf, 0.0);
  }
  add_generators(pb, net, lay, true);
  if (!elastic) add_cost(pb, net);
  Balance rows = add_balance_rows(pb, net, lay, true);

  for (std::size_t a = 0; a < lay.topo.buses.size(); ++a) {
    std::size_t k = lay.topo.buses[a];
    const Bus& b = net.buses[k];
    int v = pb.v[k];
    if (b.gs != 0.0) {
      double gs = b.gs;
      m.add_term<1>(rows.p[a], {v}, [gs](const auto& x) { return -gs * x[0] * x[0]; });
    }
    if (b.bs != 0.0) {
      double bs = b.bs;
      m.add_term<1>(rows.q[a], {v}, [bs](const auto& x) { return bs * x[0] * x[0]; });
    }
  }

  for (std::size_t n = 0; n < lay.topo.branches.size(); ++n) {
    const Branch& br = net.branches[lay.topo.branches[n]];
    std::size_t fa = lay.topo.from[n], ta = lay.topo.to[n];
    std::size_t fk = lay.topo.buses[fa], tk = lay.topo.buses[ta];
    Ends y = end_admittances(br);
    std::array<int, 4> fx{pb.v[fk], pb.v[tk], pb.theta[fk], pb.theta[tk]};
    std::array<int, 4> tx{pb.v[tk], pb.v[fk], pb.theta[tk], pb.theta[fk]};

    auto withdraw = [&m](int row, const std::array<int, 4>& vars, EndAdmittance e) {
      m.add_term<4>(row, vars, [e](const auto& x) { return -end_p(e, x); });
    };
    auto withdraw_q = [&m](int row, const std::array<int, 4>& vars, EndAdmittance e) {
      m.add_term<4>(row, vars, [e](const auto& x) { return -end_q(e, x); });
    };
    withdraw(rows.p[fa], fx, y.from);
    withdraw_q(rows.q[fa], fx, y.from);
    withdraw(rows.p[ta], tx, y.to);
    withdraw_q(rows.q[ta], tx, y.to);

    if (br.rate_a) {
      double limit = *br.rate_a * *br.rate_a;
      for (auto [vars, e] : {std::pair{fx, y.from}, std::pair{tx, y.to}}) {
        int row = m.add_constraint(-kInf, limit);
        m.add_term<4>(row, vars, [e = e](const auto& x) {
          auto p = end_p(e, x);
          auto q = end_q(e, x);
          return p * p + q * q;
        });
      }
    }
    if (std::isfinite(br.angle_min) || std::isfinite(br.angle_max)) {
      int row = m.add_constraint(br.angle_min, br.angle_max);
      m.add_linear(row, pb.theta[fk], 1.0);
      m.add_linear(row, pb.theta[tk], -1.0);
    }
  }

  if (elastic) {
    auto relax = [&pb, &m](int row) {
      int up = m.add_variable(0.0, kInf, 0.1);
      int down = m.add_variable(0.0, kInf, 0.1);
      m.add_linear(row, up, 1.0);
      m.add_linear(row, down, -1.0);
      m.add_linear(opt::kObjective, up, 1.0);
      m.add_linear(opt::kObjective, down, 1.0);
      pb.slack.push_back(up);
      pb.slack.push_back(down);
    };
    for (int row : rows.p) relax(row);
    for (int row : rows.q) relax(row);
  }
  return pb;
}

}  // namespace

std::string_view to_string(Formulation model) {
  switch (model) {
    case Formulation::ac: return "ac";
    case Formulation::cp: return "cp";
    case Formulation::nfll: return "nfll";
    case Formulation::soc: return "soc";
  }
  return "?";
}

std::string_view display_name(Formulation model) {
  switch (model) {
    case Formulation::ac: return "AC";
    case Formulation::cp: return "CP";
    case Formulation::nfll: return "NF+LL";
    case Formulation::soc: return "SOC";
  }
  return "?";
}

std::optional<Formulation> parse_formulation(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "ac") return Formulation::ac;
  if (s == "cp") return Formulation::cp;
  if (s == "nfll" || s == "nf+ll") return Formulation::nfll;
  if (s == "soc") return Formulation::soc;
  return std::nullopt;
}

Problem formulate_ac(const Network& net) { return build_ac(net, false); }

Problem formulate_elastic(const Network& net) { return build_ac(net, true); }

Problem formulate_cp(const Network& net) {
  Layout lay = layout(net);
  check_impedances(net, lay, Formulation::cp);
  Problem pb = empty_problem(net, Formulation::cp, true);
  add_generators(pb, net, lay, false);
  add_cost(pb, net);
  double demand = 0.0;
  for (std::size_t k : lay.topo.buses) demand += net.buses[k].pd;
  int row = pb.nlp.add_constraint(demand, kInf);
  for (int var : pb.pg) {
    if (var >= 0) pb.nlp.add_linear(row, var, 1.0);
  }
  return pb;
}

Problem formulate_nfll(const Network& net) {
  Layout lay = layout(net);
  Problem pb = empty_problem(net, Formulation::nfll, true);
  opt::Model& m = pb.nlp;
  for (std::size_t k : lay.topo.buses) {
    const Bus& b = net.buses[k];
    double lo = b.v_min * b.v_min, hi = b.v_max * b.v_max;
    pb.w[k] = m.add_variable(lo, hi, clamp_into(1.0, lo, hi));
  }
  add_generators(pb, net, lay, true);
  add_cost(pb, net);
  Balance rows = add_balance_rows(pb, net, lay, true);
  for (std::size_t a = 0; a < lay.topo.buses.size(); ++a) {
    const Bus& b = net.buses[lay.topo.buses[a]];
    int w = pb.w[lay.topo.buses[a]];
    if (b.gs != 0.0) m.add_linear(rows.p[a], w, -b.gs);
    if (b.bs != 0.0) m.add_linear(rows.q[a], w, b.bs);
  }

  for (std::size_t n = 0; n < lay.topo.branches.size(); ++n) {
    const Branch& br = net.branches[lay.topo.branches[n]];
    std::size_t fa = lay.topo.from[n], ta = lay.topo.to[n];
    std::size_t fk = lay.topo.buses[fa], tk = lay.topo.buses[ta];
    int wf = pb.w[fk], wt = pb.w[tk];
    int pf = m.add_variable(-kInf, kInf, 0.0);
    int qf = m.add_variable(-kInf, kInf, 0.0);
    int pt = m.add_variable(-kInf, kInf, 0.0);
    int qt = m.add_variable(-kInf, kInf, 0.0);
    double tau2 = br.tap * br.tap;
    double charge_f = 0.5 * br.b_charge / tau2, charge_t = 0.5 * br.b_charge;

    // terminal q = series q - charging * w
    m.add_linear(rows.p[fa], pf, -1.0);
    m.add_linear(rows.q[fa], qf, -1.0);
    m.add_linear(rows.q[fa], wf, charge_f);
    m.add_linear(rows.p[ta], pt, -1.0);
    m.add_linear(rows.q[ta], qt, -1.0);
    m.add_linear(rows.q[ta], wt, charge_t);

    if (br.r > 0.0) {
      double vf = net.buses[fk].v_max, vt = net.buses[tk].v_max;
      double kf = br.r * tau2 / (vf * vf), kt = br.r / (vt * vt);
      for (auto [k, p, q] : {std::tuple{kf, pf, qf}, std::tuple{kt, pt, qt}}) {
        int row = m.add_constraint(-kInf, 0.0);
        m.add_linear(row, pf, -1.0);
        m.add_linear(row, pt, -1.0);
        m.add_term<2>(row, {p, q}, [k = k](const auto& x) { return k * (x[0] * x[0] + x[1] * x[1]); });
      }
    } else if (br.r == 0.0) {
      int row = m.add_constraint(0.0, kInf);
      m.add_linear(row, pf, 1.0);
      m.add_linear(row, pt, 1.0);
    }

    if (br.rate_a) {
      double limit = *br.rate_a * *br.rate_a;
      for (auto [p, q, w, c] : {std::tuple{pf, qf, wf, charge_f}, std::tuple{pt, qt, wt, charge_t}}) {
        int row = m.add_constraint(-kInf, limit);
        m.add_term<3>(row, {p, q, w}, [c = c](const auto& x) {
          auto qq = x[1] - c * x[2];
          return x[0] * x[0] + qq * qq;
        });
      }
    }
  }
  return pb;
}

Problem formulate_soc(const Network& net) {
  Layout lay = layout(net);
  Problem pb = empty_problem(net, Formulation::soc, true);
  opt::Model& m = pb.nlp;
  for (std::size_t k : lay.topo.buses) {
    const Bus& b = net.buses[k];
    double lo = b.v_min * b.v_min, hi = b.v_max * b.v_max;
    pb.w[k] = m.add_variable(lo, hi, clamp_into(1.0, lo, hi));
  }
  add_generators(pb, net, lay, true);
  add_cost(pb, net);
  Balance rows = add_balance_rows(pb, net, lay, true);
  for (std::size_t a = 0; a < lay.topo.buses.size(); ++a) {
    const Bus& b = net.buses[lay.topo.buses[a]];
    int w = pb.w[lay.topo.buses[a]];
    if (b.gs != 0.0) m.add_linear(rows.p[a], w, -b.gs);
    if (b.bs != 0.0) m.add_linear(rows.q[a], w, b.bs);
  }

  // One (wR, wI) pair per connected bus pair, oriented from the lower active index.
  auto bounded = [](const Branch& br) {
    return br.angle_min > -kPi / 2 && br.angle_max < kPi / 2;
  };
  std::map<std::pair<std::size_t, std::size_t>, bool> pair_bounded;
  for (std::size_t n = 0; n < lay.topo.branches.size(); ++n) {
    std::size_t a = lay.topo.from[n], b = lay.topo.to[n];
    if (a == b) continue;
    auto key = std::minmax(a, b);
    auto [it, fresh] = pair_bounded.try_emplace({key.first, key.second}, true);
    it->second = it->second && bounded(net.branches[lay.topo.branches[n]]);
    (void)fresh;
  }
  std::map<std::pair<std::size_t, std::size_t>, std::pair<int, int>> pair_vars;
  for (auto [key, has_bound] : pair_bounded) {
    int wr = m.add_variable(has_bound ? 0.0 : -kInf, kInf, 1.0);
    int wi = m.add_variable(-kInf, kInf, 0.0);
    pair_vars[key] = {wr, wi};
    int wa = pb.w[lay.topo.buses[key.first]], wb = pb.w[lay.topo.buses[key.second]];
    // sqrt(s^2 + eps) <= s + eps / (2 s) keeps the smoothed cone outside the exact one.
    double s_min = m.var_lower()[wa] + m.var_lower()[wb];
    double shift = s_min > 0.0 ? std::min(std::sqrt(kConeEpsilon), kConeEpsilon / (2.0 * s_min))
                               : std::sqrt(kConeEpsilon);
    int row = m.add_constraint(-kInf, shift);
    m.add_term<4>(row, {wa, wb, wr, wi}, [](const auto& x) {
      auto d = x[0] - x[1];
      return opt::sqrt(4.0 * x[2] * x[2] + 4.0 * x[3] * x[3] + d * d + kConeEpsilon) - x[0] - x[1];
    });
  }

  for (std::size_t n = 0; n < lay.topo.branches.size(); ++n) {
    const Branch& br = net.branches[lay.topo.branches[n]];
    std::size_t fa = lay.topo.from[n], ta = lay.topo.to[n];
    if (fa == ta) continue;
    std::size_t fk = lay.topo.buses[fa], tk = lay.topo.buses[ta];
    auto [wr, wi] = pair_vars.at({std::min(fa, ta), std::max(fa, ta)});
    double s = fa < ta ? 1.0 : -1.0;  // wI of this orientation = s * wi
    Ends y = end_admittances(br);

    // S_ij = conj(Yff) w_i + conj(Yft) (wR + j wI);  S_ji = conj(Ytt) w_j + conj(Ytf) (wR - j wI)
    struct Linear {
      int w;
      double cw, cr, ci;
    };
    const EndAdmittance& f = y.from;
    const EndAdmittance& t = y.to;
    Linear pf{pb.w[fk], f.g_self, f.g_mut, s * f.b_mut};
    Linear qf{pb.w[fk], -f.b_self, -f.b_mut, s * f.g_mut};
    Linear pt{pb.w[tk], t.g_self, t.g_mut, -s * t.b_mut};
    Linear qt{pb.w[tk], -t.b_self, -t.b_mut, -s * t.g_mut};

    auto withdraw = [&](int row, const Linear& e) {
      m.add_linear(row, e.w, -e.cw);
      m.add_linear(row, wr, -e.cr);
      m.add_linear(row, wi, -e.ci);
    };
    withdraw(rows.p[fa], pf);
    withdraw(rows.q[fa], qf);
    withdraw(rows.p[ta], pt);
    withdraw(rows.q[ta], qt);

    if (br.rate_a) {
      double limit = *br.rate_a * *br.rate_a;
      for (auto [p, q] : {std::pair{pf, qf}, std::pair{pt, qt}}) {
        int row = m.add_constraint(-kInf, limit);
        m.add_term<3>(row, {p.w, wr, wi}, [p = p, q = q](const auto& x) {
          auto pp = p.cw * x[0] + p.cr * x[1] + p.ci * x[2];
          auto qq = q.cw * x[0] + q.cr * x[1] + q.ci * x[2];
          return pp * pp + qq * qq;
        });
      }
    }
    if (bounded(br)) {
      // tan(lo) wR <= wI_ij <= tan(hi) wR
      int upper = m.add_constraint(-kInf, 0.0);
      m.add_linear(upper, wi, s);
      m.add_linear(upper, wr, -std::tan(br.angle_max));
      int lower = m.add_constraint(0.0, kInf);
      m.add_linear(lower, wi, s);
      m.add_linear(lower, wr, -std::tan(br.angle_min));
    }
  }
  return pb;
}

Problem formulate(const Network& net, Formulation model) {
  switch (model) {
    case Formulation::ac: return formulate_ac(net);
    case Formulation::cp: return formulate_cp(net);
    case Formulation::nfll: return formulate_nfll(net);
    case Formulation::soc: return formulate_soc(net);
  }
  throw std::invalid_argument("unknown formulation");
}

Solution solve(const Problem& problem, const opt::IpmOptions& options) {
  opt::IpmResult r = opt::solve(problem.nlp, options);
  Solution sol;
  sol.kind = problem.kind;
  sol.status = r.status;
  sol.objective = r.objective;
  sol.max_violation = r.max_violation;
  sol.iterations = r.iterations;
  auto pick = [&r](const std::vector<int>& vars) {
    std::vector<double> out(vars.size(), kNaN);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (vars[i] >= 0 && r.x.size() > vars[i]) out[i] = r.x[vars[i]];
    }
    return out;
  };
  sol.v = pick(problem.v);
  sol.theta = pick(problem.theta);
  sol.w = pick(problem.w);
  sol.pg = pick(problem.pg);
  sol.qg = pick(problem.qg);
  return sol;
}

Solution solve(const Network& net, Formulation model, const SolveOptions& options) {
  Problem pb = formulate(net, model);
  Solution best = solve(pb, options.ipm);
  if (model != Formulation::ac) return best;
  for (int k = 1; k < options.starts; ++k) {
    RandomStream rng(options.seed, kTagStart, static_cast<std::uint64_t>(k));
    for (std::size_t b = 0; b < net.buses.size(); ++b) {
      if (pb.v[b] < 0) continue;
      const Bus& bus = net.buses[b];
      pb.nlp.set_initial(pb.v[b], bus.v_min + (bus.v_max - bus.v_min) * rng.uniform());
      if (pb.nlp.var_lower()[pb.theta[b]] < pb.nlp.var_upper()[pb.theta[b]]) {
        pb.nlp.set_initial(pb.theta[b], 0.4 * rng.uniform() - 0.2);
      }
    }
    Solution trial = solve(pb, options.ipm);
    bool better = best.status != opt::Status::optimal || trial.objective < best.objective;
    if (trial.status == opt::Status::optimal && better) best = std::move(trial);
  }
  return best;
}

double gap(double ac_objective, double relax_objective) {
  if (!(ac_objective > 0.0)) throw DataError("optimality gap needs a positive AC objective");
  return 100.0 * (ac_objective - relax_objective) / ac_objective;
}

Feasibility check_feasible(const Network& net, const opt::IpmOptions& options) {
  Feasibility out;
  out.solution = solve(formulate_elastic(net), options);
  out.slack = out.solution.objective;
  out.feasible = out.solution.status == opt::Status::optimal && out.slack <= kFeasibilityTolerance;
  return out;
}

GapReport gap_report(const std::string& case_name, const Network& net,
                     const std::vector<Formulation>& relaxations, const SolveOptions& options) {
  GapReport report;
  report.case_name = case_name;
  auto run = [&](Formulation model) {
    ModelResult res;
    res.model = model;
    try {
      Solution sol = solve(net, model, options);
      res.status = sol.status;
      res.objective = sol.objective;
      res.iterations = sol.iterations;
    } catch (const NotApplicable&) {
      res.applicable = false;
    }
    return res;
  };
  report.ac = run(Formulation::ac);
  for (Formulation model : relaxations) {
    ModelResult res = run(model);
    if (res.applicable && res.status == opt::Status::optimal &&
        report.ac.status == opt::Status::optimal && report.ac.objective > 0.0) {
      res.gap = gap(report.ac.objective, res.objective);
    }
    report.relaxations.push_back(res);
  }
  return report;
}

std::vector<GapReport> gap_table(const std::vector<std::string>& paths,
                                 const std::vector<Formulation>& relaxations,
                                 const SolveOptions& options, unsigned jobs) {
  std::vector<GapReport> reports(paths.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < paths.size(); i = next++) {
      std::string name = std::filesystem::path(paths[i]).stem().string();
      try {
        Network net = matpower::lower(matpower::read_file(paths[i]));
        reports[i] = gap_report(name, net, relaxations, options);
      } catch (const std::exception& e) {
        GapReport failed;
        failed.case_name = name;
        failed.error = e.what();
        for (Formulation model : relaxations) {
          ModelResult res;
          res.model = model;
          failed.relaxations.push_back(res);
        }
        reports[i] = std::move(failed);
      }
    }
  };
  unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(paths.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return reports;
}

namespace {

std::string fixed2(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, 2);
  std::string s(buf, end);
  if (s == "-0.00") s = "0.00";
  return s;
}

nlohmann::json result_json(const ModelResult& r) {
  nlohmann::json j;
  j["model"] = std::string(to_string(r.model));
  if (!r.applicable) {
    j["status"] = "not-applicable";
    return j;
  }
  j["status"] = std::string(opt::to_string(r.status));
  j["objective"] = r.objective;
  j["iterations"] = r.iterations;
  if (r.gap) j["gap_percent"] = *r.gap;
  return j;
}

}  // namespace

nlohmann::json to_json(const std::vector<GapReport>& reports,
                       const std::vector<Formulation>& relaxations) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["models"] = nlohmann::json::array();
  for (Formulation m : relaxations) doc["models"].push_back(std::string(to_string(m)));
  doc["cases"] = nlohmann::json::array();
  for (const GapReport& r : reports) {
    nlohmann::json c;
    c["case"] = r.case_name;
    if (!r.error.empty()) {
      c["error"] = r.error;
    } else {
      c["ac"] = result_json(r.ac);
      c["relaxations"] = nlohmann::json::array();
      for (const ModelResult& m : r.relaxations) c["relaxations"].push_back(result_json(m));
    }
    doc["cases"].push_back(std::move(c));
  }
  return doc;
}

std::string to_markdown(const std::vector<GapReport>& reports,
                        const std::vector<Formulation>& relaxations) {
  std::string out = "| Case | AC ($/h) |";
  std::string rule = "|---|---:|";
  for (Formulation m : relaxations) {
    out += " " + std::string(display_name(m)) + " (%) |";
    rule += "---:|";
  }
  out += "\n" + rule + "\n";
  for (const GapReport& r : reports) {
    bool ac_ok = r.error.empty() && r.ac.status == opt::Status::optimal;
    out += "| " + r.case_name + " | " + (ac_ok ? fixed2(r.ac.objective) : "err.") + " |";
    for (const ModelResult& m : r.relaxations) {
      std::string cell = !r.error.empty() ? "err." : !m.applicable ? "---" : m.gap ? fixed2(*m.gap) : "err.";
      out += " " + cell + " |";
    }
    out += "\n";
  }
  return out;
}

}  // namespace gridcase::opf
