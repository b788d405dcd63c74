#include "gridcase/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gridcase::powerflow {

namespace {

using SparseC = Eigen::SparseMatrix<Complex>;

SparseC diagonal(const Eigen::VectorXcd& d) {
  SparseC m(d.size(), d.size());
  m.reserve(Eigen::VectorXi::Constant(d.size(), 1));
  for (Eigen::Index i = 0; i < d.size(); ++i) m.insert(i, i) = d[i];
  return m;
}

struct BusSetPoints {
  std::size_t slack = 0;
  std::vector<std::size_t> pv, pq;
  Eigen::VectorXcd fixed;  // specified net injection per active bus
  Eigen::VectorXd v_set;
};

BusSetPoints classify(const Network& net, const Topology& topo) {
  const std::size_t n = topo.buses.size();
  BusSetPoints sp;
  sp.fixed = Eigen::VectorXcd::Zero(n);
  sp.v_set = Eigen::VectorXd::Zero(n);
  std::vector<long> first_gen(n, -1);
  const auto lookup = net.bus_lookup();
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    auto it = lookup.find(gen.bus);
    if (!gen.in_service || it == lookup.end()) continue;
    long k = topo.index_of[it->second];
    if (k < 0) continue;
    if (first_gen[k] < 0) first_gen[k] = static_cast<long>(g);
  }
  long slack = -1;
  for (std::size_t k = 0; k < n; ++k) {
    const Bus& bus = net.buses[topo.buses[k]];
    sp.fixed[k] = Complex(-bus.pd, -bus.qd);
    sp.v_set[k] = bus.v_init > 0.0 ? bus.v_init : 1.0;
    BusKind kind = bus.kind;
    if (kind == BusKind::slack) {
      if (slack >= 0) throw DataError("more than one slack bus");
      slack = static_cast<long>(k);
    }
    if (kind != BusKind::pq) {
      if (first_gen[k] < 0) {
        if (kind == BusKind::slack) throw DataError("slack bus " + std::to_string(bus.id) + " has no in-service generator");
        throw DataError("PV bus " + std::to_string(bus.id) + " has no in-service generator");
      }
      sp.v_set[k] = net.generators[static_cast<std::size_t>(first_gen[k])].v_set;
    }
    if (kind == BusKind::pv) sp.pv.push_back(k);
    if (kind == BusKind::pq) sp.pq.push_back(k);
  }
  if (slack < 0) throw DataError("no slack bus");
  sp.slack = static_cast<std::size_t>(slack);
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    auto it = lookup.find(gen.bus);
    if (!gen.in_service || it == lookup.end()) continue;
    long k = topo.index_of[it->second];
    if (k < 0) continue;
    BusKind kind = net.buses[it->second].kind;
    if (kind == BusKind::slack) continue;
    sp.fixed[k] += Complex(gen.pg, kind == BusKind::pq ? gen.qg : 0.0);
  }
  return sp;
}

// Splits the reactive output of a bus over its generators in proportion to their ranges.
void split_reactive(const Network& net, const std::vector<std::size_t>& gens, double total,
                    std::vector<double>& gen_q) {
  double range = 0.0;
  double base = 0.0;
  bool finite = true;
  for (std::size_t g : gens) {
    const Generator& gen = net.generators[g];
    if (!std::isfinite(gen.q_min) || !std::isfinite(gen.q_max)) finite = false;
    range += gen.q_max - gen.q_min;
    base += gen.q_min;
  }
  if (!finite || !(range > 1e-12)) {
    for (std::size_t g : gens) gen_q[g] = total / static_cast<double>(gens.size());
    return;
  }
  for (std::size_t g : gens) {
    const Generator& gen = net.generators[g];
    gen_q[g] = gen.q_min + (total - base) * (gen.q_max - gen.q_min) / range;
  }
}

Violation make_violation(Violation::Element element, std::size_t index, const char* kind,
                         std::string message, double magnitude) {
  return {element, index, kind, std::move(message), magnitude};
}

}  // namespace

BranchAdmittance branch_admittance(const Branch& br) {
  Complex ys = 1.0 / Complex(br.r, br.x);
  Complex tap = std::polar(br.tap, br.shift);
  Complex ytt = ys + Complex(0.0, 0.5 * br.b_charge);
  return {ytt / (br.tap * br.tap), -ys / std::conj(tap), -ys / tap, ytt};
}

Topology topology(const Network& net) {
  Topology topo;
  topo.index_of.assign(net.buses.size(), -1);
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    if (net.buses[i].kind == BusKind::inactive) continue;
    topo.index_of[i] = static_cast<long>(topo.buses.size());
    topo.buses.push_back(i);
  }
  const auto lookup = net.bus_lookup();
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const Branch& br = net.branches[k];
    auto f = lookup.find(br.from_bus);
    auto t = lookup.find(br.to_bus);
    if (f == lookup.end() || t == lookup.end()) {
      throw DataError("branch " + std::to_string(k) + " refers to a missing bus");
    }
    if (!br.in_service) continue;
    long fi = topo.index_of[f->second];
    long ti = topo.index_of[t->second];
    if (fi < 0 || ti < 0) continue;
    topo.branches.push_back(k);
    topo.from.push_back(static_cast<std::size_t>(fi));
    topo.to.push_back(static_cast<std::size_t>(ti));
  }
  return topo;
}

YBus build_ybus(const Network& net) {
  YBus out{topology(net), {}};
  const auto n = static_cast<Eigen::Index>(out.topo.buses.size());
  std::vector<Eigen::Triplet<Complex>> entries;
  for (std::size_t e = 0; e < out.topo.branches.size(); ++e) {
    BranchAdmittance y = branch_admittance(net.branches[out.topo.branches[e]]);
    auto f = static_cast<Eigen::Index>(out.topo.from[e]);
    auto t = static_cast<Eigen::Index>(out.topo.to[e]);
    entries.emplace_back(f, f, y.ff);
    entries.emplace_back(f, t, y.ft);
    entries.emplace_back(t, f, y.tf);
    entries.emplace_back(t, t, y.tt);
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const Bus& bus = net.buses[out.topo.buses[static_cast<std::size_t>(k)]];
    entries.emplace_back(k, k, Complex(bus.gs, bus.bs));
  }
  out.matrix.resize(n, n);
  out.matrix.setFromTriplets(entries.begin(), entries.end());
  out.matrix.makeCompressed();
  return out;
}

Eigen::VectorXcd injections(const YBus& ybus, const Eigen::VectorXcd& voltage) {
  Eigen::VectorXcd current = ybus.matrix * voltage;
  return voltage.cwiseProduct(current.conjugate());
}

InjectionJacobian injection_jacobian(const YBus& ybus, const Eigen::VectorXcd& voltage) {
  const SparseC& y = ybus.matrix;
  Eigen::VectorXcd current = y * voltage;
  Eigen::VectorXcd unit = voltage.array() / voltage.array().abs().cast<Complex>();
  SparseC diag_v = diagonal(voltage);
  SparseC diag_i = diagonal(current);
  SparseC diag_unit = diagonal(unit);
  InjectionJacobian jac;
  SparseC y_unit = y * diag_unit;
  jac.d_magnitude = diag_v * SparseC(y_unit.conjugate()) + SparseC(diag_i.conjugate()) * diag_unit;
  SparseC inner = diag_i - y * diag_v;
  jac.d_angle = Complex(0.0, 1.0) * (diag_v * SparseC(inner.conjugate()));
  return jac;
}

std::vector<BranchFlow> branch_flows(const Network& net, const std::vector<double>& v,
                                     const std::vector<double>& theta) {
  std::vector<BranchFlow> flows(net.branches.size());
  Topology topo = topology(net);
  for (std::size_t e = 0; e < topo.branches.size(); ++e) {
    std::size_t k = topo.branches[e];
    std::size_t f = topo.buses[topo.from[e]];
    std::size_t t = topo.buses[topo.to[e]];
    BranchAdmittance y = branch_admittance(net.branches[k]);
    Complex vf = std::polar(v[f], theta[f]);
    Complex vt = std::polar(v[t], theta[t]);
    Complex sf = vf * std::conj(y.ff * vf + y.ft * vt);
    Complex st = vt * std::conj(y.tf * vf + y.tt * vt);
    flows[k] = {sf.real(), sf.imag(), std::abs(sf), st.real(), st.imag(), std::abs(st)};
  }
  return flows;
}

PowerFlowSolution solve_pf(const Network& net, const PowerFlowOptions& options) {
  YBus ybus = build_ybus(net);
  const Topology& topo = ybus.topo;
  const auto n = static_cast<Eigen::Index>(topo.buses.size());
  if (n == 0) throw DataError("network has no active buses");
  BusSetPoints sp = classify(net, topo);

  Eigen::VectorXd vm(n);
  Eigen::VectorXd va(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Bus& bus = net.buses[topo.buses[static_cast<std::size_t>(k)]];
    vm[k] = bus.kind == BusKind::pq ? (bus.v_init > 0.0 ? bus.v_init : 1.0) : sp.v_set[k];
    va[k] = bus.theta_init;
  }
  // The reference angle is zero whatever the initial guess says.
  va.array() -= va[static_cast<Eigen::Index>(sp.slack)];

  std::vector<std::size_t> pvpq = sp.pv;
  pvpq.insert(pvpq.end(), sp.pq.begin(), sp.pq.end());
  std::sort(pvpq.begin(), pvpq.end());
  const auto n_ang = static_cast<Eigen::Index>(pvpq.size());
  const auto n_mag = static_cast<Eigen::Index>(sp.pq.size());
  const Eigen::Index dim = n_ang + n_mag;
  std::vector<long> ang_col(static_cast<std::size_t>(n), -1);
  std::vector<long> mag_col(static_cast<std::size_t>(n), -1);
  for (Eigen::Index i = 0; i < n_ang; ++i) ang_col[pvpq[static_cast<std::size_t>(i)]] = static_cast<long>(i);
  for (Eigen::Index i = 0; i < n_mag; ++i) mag_col[sp.pq[static_cast<std::size_t>(i)]] = static_cast<long>(n_ang + i);

  auto voltage = [&] {
    Eigen::VectorXcd vc(n);
    for (Eigen::Index k = 0; k < n; ++k) vc[k] = std::polar(vm[k], va[k]);
    return vc;
  };
  auto mismatch = [&](const Eigen::VectorXcd& vc) {
    Eigen::VectorXcd s = injections(ybus, vc) - sp.fixed;
    Eigen::VectorXd f(dim);
    for (Eigen::Index i = 0; i < n_ang; ++i) f[i] = s[static_cast<Eigen::Index>(pvpq[static_cast<std::size_t>(i)])].real();
    for (Eigen::Index i = 0; i < n_mag; ++i) f[n_ang + i] = s[static_cast<Eigen::Index>(sp.pq[static_cast<std::size_t>(i)])].imag();
    return f;
  };

  PowerFlowSolution sol;
  Eigen::VectorXcd vc = voltage();
  Eigen::VectorXd f = mismatch(vc);
  double norm = dim > 0 ? f.lpNorm<Eigen::Infinity>() : 0.0;
  while (!(norm <= options.tolerance)) {
    if (!std::isfinite(norm) || sol.iterations >= options.max_iter) {
      throw SolverError("power flow did not converge in " + std::to_string(sol.iterations) +
                        " iterations (mismatch " + std::to_string(norm) + " p.u.)");
    }
    InjectionJacobian jac = injection_jacobian(ybus, vc);
    std::vector<Eigen::Triplet<double>> entries;
    auto scatter = [&](const SparseC& m, const std::vector<long>& cols) {
      for (int c = 0; c < m.outerSize(); ++c) {
        long col = cols[static_cast<std::size_t>(c)];
        if (col < 0) continue;
        for (SparseC::InnerIterator it(m, c); it; ++it) {
          auto r = static_cast<std::size_t>(it.row());
          if (ang_col[r] >= 0) entries.emplace_back(ang_col[r], col, it.value().real());
          if (mag_col[r] >= 0) entries.emplace_back(mag_col[r], col, it.value().imag());
        }
      }
    };
    scatter(jac.d_angle, ang_col);
    scatter(jac.d_magnitude, mag_col);
    Eigen::SparseMatrix<double> j(dim, dim);
    j.setFromTriplets(entries.begin(), entries.end());

    Eigen::VectorXd dx;
    if (dim < 50) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu{Eigen::MatrixXd(j)};
      if (!lu.isInvertible()) throw SolverError("singular power flow Jacobian");
      dx = -lu.solve(f);
    } else {
      j.makeCompressed();
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(j);
      if (lu.info() != Eigen::Success) throw SolverError("singular power flow Jacobian");
      dx = -lu.solve(f);
    }
    if (!dx.allFinite()) throw SolverError("singular power flow Jacobian");
    for (Eigen::Index i = 0; i < n_ang; ++i) va[static_cast<Eigen::Index>(pvpq[static_cast<std::size_t>(i)])] += dx[i];
    for (Eigen::Index i = 0; i < n_mag; ++i) vm[static_cast<Eigen::Index>(sp.pq[static_cast<std::size_t>(i)])] += dx[n_ang + i];
    ++sol.iterations;
    vc = voltage();
    f = mismatch(vc);
    norm = dim > 0 ? f.lpNorm<Eigen::Infinity>() : 0.0;
  }

  sol.converged = true;
  sol.mismatch_inf = norm;
  sol.v.assign(net.buses.size(), 0.0);
  sol.theta.assign(net.buses.size(), 0.0);
  for (Eigen::Index k = 0; k < n; ++k) {
    sol.v[topo.buses[static_cast<std::size_t>(k)]] = vm[k];
    sol.theta[topo.buses[static_cast<std::size_t>(k)]] = va[k];
  }
  sol.flows = branch_flows(net, sol.v, sol.theta);

  sol.gen_p.assign(net.generators.size(), 0.0);
  sol.gen_q.assign(net.generators.size(), 0.0);
  Eigen::VectorXcd s = injections(ybus, vc);
  const auto lookup = net.bus_lookup();
  std::vector<std::vector<std::size_t>> at_bus(static_cast<std::size_t>(n));
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    auto it = lookup.find(gen.bus);
    if (!gen.in_service || it == lookup.end() || topo.index_of[it->second] < 0) continue;
    at_bus[static_cast<std::size_t>(topo.index_of[it->second])].push_back(g);
    sol.gen_p[g] = gen.pg;
    sol.gen_q[g] = gen.qg;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& gens = at_bus[static_cast<std::size_t>(k)];
    if (gens.empty()) continue;
    const Bus& bus = net.buses[topo.buses[static_cast<std::size_t>(k)]];
    Complex total = s[k] + Complex(bus.pd, bus.qd);
    if (bus.kind == BusKind::slack) {
      double others = 0.0;
      for (std::size_t i = 1; i < gens.size(); ++i) others += net.generators[gens[i]].pg;
      sol.gen_p[gens[0]] = total.real() - others;
    }
    if (bus.kind != BusKind::pq) split_reactive(net, gens, total.imag(), sol.gen_q);
  }
  return sol;
}

std::vector<Violation> check_operational(const Network& net, const PowerFlowSolution& sol,
                                         double tolerance) {
  using E = Violation::Element;
  std::vector<Violation> out;
  const Topology topo = topology(net);
  for (std::size_t i : topo.buses) {
    const Bus& bus = net.buses[i];
    double v = sol.v[i];
    if (v > bus.v_max + tolerance) {
      out.push_back(make_violation(E::bus, i, "voltage", "bus " + std::to_string(bus.id) + " above v_max", v - bus.v_max));
    } else if (v < bus.v_min - tolerance) {
      out.push_back(make_violation(E::bus, i, "voltage", "bus " + std::to_string(bus.id) + " below v_min", bus.v_min - v));
    }
  }
  for (std::size_t e = 0; e < topo.branches.size(); ++e) {
    std::size_t k = topo.branches[e];
    const Branch& br = net.branches[k];
    const BranchFlow& flow = sol.flows[k];
    std::string name = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
    double s = std::max(flow.s_from, flow.s_to);
    if (br.rate_a && s > *br.rate_a + tolerance) {
      out.push_back(make_violation(E::branch, k, "thermal", name + " above rate_a", s - *br.rate_a));
    }
    double diff = sol.theta[topo.buses[topo.from[e]]] - sol.theta[topo.buses[topo.to[e]]];
    if (diff > br.angle_max + tolerance) {
      out.push_back(make_violation(E::branch, k, "angle", name + " angle difference above bound", diff - br.angle_max));
    } else if (diff < br.angle_min - tolerance) {
      out.push_back(make_violation(E::branch, k, "angle", name + " angle difference below bound", br.angle_min - diff));
    }
  }
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    if (!gen.in_service) continue;
    std::string name = "generator " + std::to_string(g);
    double p = sol.gen_p[g];
    double q = sol.gen_q[g];
    if (p > gen.p_max + tolerance) out.push_back(make_violation(E::generator, g, "gen_p", name + " above p_max", p - gen.p_max));
    if (p < gen.p_min - tolerance) out.push_back(make_violation(E::generator, g, "gen_p", name + " below p_min", gen.p_min - p));
    if (q > gen.q_max + tolerance) out.push_back(make_violation(E::generator, g, "gen_q", name + " above q_max", q - gen.q_max));
    if (q < gen.q_min - tolerance) out.push_back(make_violation(E::generator, g, "gen_q", name + " below q_min", gen.q_min - q));
  }
  return out;
}

}  // namespace gridcase::powerflow
