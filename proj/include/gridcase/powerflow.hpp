#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gridcase/network.hpp"

namespace gridcase::powerflow {

using Complex = std::complex<double>;

/// Two-port admittances of the Π-model with off-nominal tap and phase shift.
struct BranchAdmittance {
  Complex ff, ft, tf, tt;
};
BranchAdmittance branch_admittance(const Branch& branch);

/// Active buses and the branches that connect two of them.
struct Topology {
  std::vector<std::size_t> buses;        // positions in net.buses
  std::vector<long> index_of;            // net bus position -> active index, -1 if inactive
  std::vector<std::size_t> branches;     // in-service branches between active buses
  std::vector<std::size_t> from, to;     // active indices per entry of `branches`
};
/// Throws DataError on a dangling bus reference.
Topology topology(const Network& net);

struct YBus {
  Topology topo;
  Eigen::SparseMatrix<Complex> matrix;
};
YBus build_ybus(const Network& net);

/// Complex bus injections V .* conj(Y V).
Eigen::VectorXcd injections(const YBus& ybus, const Eigen::VectorXcd& voltage);

/// Partial derivatives of the injections with respect to angles and magnitudes.
struct InjectionJacobian {
  Eigen::SparseMatrix<Complex> d_angle;
  Eigen::SparseMatrix<Complex> d_magnitude;
};
InjectionJacobian injection_jacobian(const YBus& ybus, const Eigen::VectorXcd& voltage);

struct BranchFlow {
  double p_from = 0.0, q_from = 0.0, s_from = 0.0;
  double p_to = 0.0, q_to = 0.0, s_to = 0.0;
};

/// Flows for every branch; `v` and `theta` are indexed like net.buses.
/// Out-of-service branches and branches touching inactive buses carry zero flow.
std::vector<BranchFlow> branch_flows(const Network& net, const std::vector<double>& v,
                                     const std::vector<double>& theta);

struct PowerFlowOptions {
  double tolerance = 1e-8;
  int max_iter = 30;
};

struct PowerFlowSolution {
  std::vector<double> v;      // per net bus
  std::vector<double> theta;  // rad, slack at 0
  std::vector<BranchFlow> flows;
  std::vector<double> gen_p;  // per generator, 0 when out of service
  std::vector<double> gen_q;
  double mismatch_inf = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Newton-Raphson from (v_init, theta_init). PV and slack buses hold the
/// set-point of their first in-service generator. Throws SolverError on a
/// singular Jacobian or when the iteration cap is reached, DataError when the
/// slack bus is missing or duplicated.
PowerFlowSolution solve_pf(const Network& net, const PowerFlowOptions& options = {});

/// Thermal, voltage, generator and angle-difference violations beyond `tolerance`.
std::vector<Violation> check_operational(const Network& net, const PowerFlowSolution& sol,
                                         double tolerance = 1e-6);

}  // namespace gridcase::powerflow
