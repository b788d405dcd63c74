#include "gridcase/opt/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include <Eigen/SparseCholesky>
#include <lapacke.h>

namespace gridcase::opt {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Reduced problem: fixed variables removed, a slack per inequality row, and
// gradient-based scaling of the objective and rows.
struct Reduced {
  const Model& model;
  std::vector<int> free_vars;
  std::vector<long> column_of;  // model variable -> reduced column or -1
  std::vector<int> slack_row;   // slack index -> row
  std::vector<long> row_slack;  // row -> slack index or -1
  Eigen::VectorXd fixed_x;      // full vector holding fixed values
  Eigen::VectorXd lower, upper; // bounds of z = (x_free, s)
  Eigen::VectorXd eq_target;    // scaled right-hand side of equality rows
  Eigen::VectorXd row_scale;
  double obj_scale = 1.0;
  Eigen::Index nx = 0, ns = 0, n = 0, m = 0;

  explicit Reduced(const Model& mdl) : model(mdl) {
    const auto& xl = model.var_lower();
    const auto& xu = model.var_upper();
    column_of.assign(xl.size(), -1);
    fixed_x = Eigen::Map<const Eigen::VectorXd>(model.initial().data(), static_cast<Eigen::Index>(xl.size()));
    for (std::size_t j = 0; j < xl.size(); ++j) {
      if (xl[j] == xu[j]) {
        fixed_x[static_cast<Eigen::Index>(j)] = xl[j];
      } else {
        column_of[j] = static_cast<long>(free_vars.size());
        free_vars.push_back(static_cast<int>(j));
      }
    }
    const auto& gl = model.row_lower();
    const auto& gu = model.row_upper();
    row_slack.assign(gl.size(), -1);
    for (std::size_t i = 0; i < gl.size(); ++i) {
      if (gl[i] != gu[i]) {
        row_slack[i] = static_cast<long>(slack_row.size());
        slack_row.push_back(static_cast<int>(i));
      }
    }
    nx = static_cast<Eigen::Index>(free_vars.size());
    ns = static_cast<Eigen::Index>(slack_row.size());
    n = nx + ns;
    m = static_cast<Eigen::Index>(gl.size());
    row_scale = Eigen::VectorXd::Ones(m);
  }

  void set_scaling(const Model::FirstOrder& d) {
    double gmax = 0.0;
    for (Eigen::Index k = 0; k < nx; ++k) gmax = std::max(gmax, std::abs(d.grad[free_vars[static_cast<std::size_t>(k)]]));
    obj_scale = gmax > 100.0 ? 100.0 / gmax : 1.0;
    Eigen::VectorXd rmax = Eigen::VectorXd::Zero(m);
    for (int c = 0; c < d.jac.outerSize(); ++c) {
      if (column_of[static_cast<std::size_t>(c)] < 0) continue;
      for (Eigen::SparseMatrix<double>::InnerIterator it(d.jac, c); it; ++it) {
        rmax[it.row()] = std::max(rmax[it.row()], std::abs(it.value()));
      }
    }
    for (Eigen::Index i = 0; i < m; ++i) row_scale[i] = rmax[i] > 100.0 ? 100.0 / rmax[i] : 1.0;

    lower.resize(n);
    upper.resize(n);
    const auto& xl = model.var_lower();
    const auto& xu = model.var_upper();
    for (Eigen::Index k = 0; k < nx; ++k) {
      lower[k] = xl[static_cast<std::size_t>(free_vars[static_cast<std::size_t>(k)])];
      upper[k] = xu[static_cast<std::size_t>(free_vars[static_cast<std::size_t>(k)])];
    }
    const auto& gl = model.row_lower();
    const auto& gu = model.row_upper();
    for (Eigen::Index k = 0; k < ns; ++k) {
      auto row = static_cast<std::size_t>(slack_row[static_cast<std::size_t>(k)]);
      lower[nx + k] = gl[row] * row_scale[static_cast<Eigen::Index>(row)];
      upper[nx + k] = gu[row] * row_scale[static_cast<Eigen::Index>(row)];
    }
    eq_target = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (row_slack[static_cast<std::size_t>(i)] < 0) eq_target[i] = gl[static_cast<std::size_t>(i)] * row_scale[i];
    }
  }

  Eigen::VectorXd full(const Eigen::VectorXd& z) const {
    Eigen::VectorXd x = fixed_x;
    for (Eigen::Index k = 0; k < nx; ++k) x[free_vars[static_cast<std::size_t>(k)]] = z[k];
    return x;
  }

  // Scaled residual of the equality form c(z) = 0.
  Eigen::VectorXd residual(const Eigen::VectorXd& g_unscaled, const Eigen::VectorXd& z) const {
    Eigen::VectorXd c = g_unscaled.cwiseProduct(row_scale) - eq_target;
    for (Eigen::Index k = 0; k < ns; ++k) c[slack_row[static_cast<std::size_t>(k)]] -= z[nx + k];
    return c;
  }

  struct Eval {
    double f = 0.0;
    Eigen::VectorXd grad;
    Eigen::VectorXd c;
    Eigen::SparseMatrix<double> jac;  // m x n
  };

  Eval evaluate(const Eigen::VectorXd& z) const {
    Model::FirstOrder d = model.first_order(full(z));
    Eval e;
    e.f = obj_scale * d.f;
    e.grad = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < nx; ++k) e.grad[k] = obj_scale * d.grad[free_vars[static_cast<std::size_t>(k)]];
    e.c = residual(d.g, z);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(d.jac.nonZeros() + ns));
    for (int c = 0; c < d.jac.outerSize(); ++c) {
      long col = column_of[static_cast<std::size_t>(c)];
      if (col < 0) continue;
      for (Eigen::SparseMatrix<double>::InnerIterator it(d.jac, c); it; ++it) {
        t.emplace_back(it.row(), col, it.value() * row_scale[it.row()]);
      }
    }
    for (Eigen::Index k = 0; k < ns; ++k) t.emplace_back(slack_row[static_cast<std::size_t>(k)], nx + k, -1.0);
    e.jac.resize(m, n);
    e.jac.setFromTriplets(t.begin(), t.end());
    return e;
  }

  std::pair<double, Eigen::VectorXd> value(const Eigen::VectorXd& z) const {
    Eigen::VectorXd x = full(z);
    return {obj_scale * model.objective(x), residual(model.constraints(x), z)};
  }

  // Lower triangle of the scaled Lagrangian Hessian on z.
  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& lambda) const {
    Eigen::SparseMatrix<double> h = model.hessian(full(z), obj_scale, lambda.cwiseProduct(row_scale));
    std::vector<Eigen::Triplet<double>> t;
    for (int c = 0; c < h.outerSize(); ++c) {
      long col = column_of[static_cast<std::size_t>(c)];
      if (col < 0) continue;
      for (Eigen::SparseMatrix<double>::InnerIterator it(h, c); it; ++it) {
        long row = column_of[static_cast<std::size_t>(it.row())];
        if (row < 0) continue;
        t.emplace_back(std::max(row, col), std::min(row, col), it.value());
      }
    }
    Eigen::SparseMatrix<double> out(n, n);
    out.setFromTriplets(t.begin(), t.end());
    return out;
  }
};

// Pivots at or below this size count as zero. Regularized pivots are bounded
// away from zero by dw or dc, so the threshold never exceeds half of them.
double zero_pivot(double scale, double dw, double dc) {
  double small = 1e-20 * std::max(1.0, scale);
  if (dw > 0.0) small = std::min(small, 0.5 * dw);
  if (dc > 0.0) small = std::min(small, 0.5 * dc);
  return small;
}

struct Inertia {
  Eigen::Index positive = 0, negative = 0, zero = 0;
};

// Factorization of [H + D + dw I, J'; J, -dc I].
class KktSolver {
 public:
  KktSolver(Eigen::Index n, Eigen::Index m, bool dense) : n_(n), m_(m), dense_(dense) {}

  Inertia factor(const Eigen::SparseMatrix<double>& h, const Eigen::VectorXd& diag,
                 const Eigen::SparseMatrix<double>& jac, double dw, double dc) {
    const Eigen::Index dim = n_ + m_;
    Inertia inertia;
    if (dense_) {
      k_.setZero(dim, dim);
      for (int c = 0; c < h.outerSize(); ++c) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(h, c); it; ++it) k_(it.row(), it.col()) += it.value();
      }
      for (Eigen::Index i = 0; i < n_; ++i) k_(i, i) += diag[i] + dw;
      for (int c = 0; c < jac.outerSize(); ++c) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(jac, c); it; ++it) k_(n_ + it.row(), it.col()) += it.value();
      }
      for (Eigen::Index i = 0; i < m_; ++i) k_(n_ + i, n_ + i) = -dc;
      ipiv_.assign(static_cast<std::size_t>(dim), 0);
      lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', static_cast<lapack_int>(dim), k_.data(),
                                       static_cast<lapack_int>(dim), ipiv_.data());
      if (info < 0) {
        inertia.zero = dim;
        return inertia;
      }
      double scale = 0.0;
      for (Eigen::Index i = 0; i < dim; ++i) scale = std::max(scale, std::abs(k_(i, i)));
      const double small = zero_pivot(scale, dw, dc);
      for (Eigen::Index i = 0; i < dim; ++i) {
        if (ipiv_[static_cast<std::size_t>(i)] > 0 || i + 1 == dim) {
          double d = k_(i, i);
          if (std::abs(d) <= small) {
            ++inertia.zero;
          } else if (d > 0) {
            ++inertia.positive;
          } else {
            ++inertia.negative;
          }
        } else {
          double a = k_(i, i), b = k_(i + 1, i), c = k_(i + 1, i + 1);
          double det = a * c - b * b;
          if (std::abs(det) <= small * small) {
            inertia.zero += 2;
          } else if (det < 0) {
            ++inertia.positive;
            ++inertia.negative;
          } else if (a + c > 0) {
            inertia.positive += 2;
          } else {
            inertia.negative += 2;
          }
          ++i;
        }
      }
      return inertia;
    }

    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(h.nonZeros() + jac.nonZeros() + dim));
    for (int c = 0; c < h.outerSize(); ++c) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(h, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    }
    for (Eigen::Index i = 0; i < n_; ++i) t.emplace_back(i, i, diag[i] + dw);
    for (int c = 0; c < jac.outerSize(); ++c) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(jac, c); it; ++it) t.emplace_back(n_ + it.row(), it.col(), it.value());
    }
    for (Eigen::Index i = 0; i < m_; ++i) t.emplace_back(n_ + i, n_ + i, -dc);
    Eigen::SparseMatrix<double> k(dim, dim);
    k.setFromTriplets(t.begin(), t.end());
    ldlt_.compute(k);
    if (ldlt_.info() != Eigen::Success) {
      inertia.zero = dim;
      return inertia;
    }
    const Eigen::VectorXd d = ldlt_.vectorD();
    const double small = zero_pivot(d.cwiseAbs().maxCoeff(), dw, dc);
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (std::abs(d[i]) <= small) {
        ++inertia.zero;
      } else if (d[i] > 0) {
        ++inertia.positive;
      } else {
        ++inertia.negative;
      }
    }
    return inertia;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) {
    if (dense_) {
      Eigen::VectorXd x = rhs;
      const auto dim = static_cast<lapack_int>(n_ + m_);
      LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', dim, 1, k_.data(), dim, ipiv_.data(), x.data(), dim);
      return x;
    }
    return ldlt_.solve(rhs);
  }

 private:
  Eigen::Index n_, m_;
  bool dense_;
  Eigen::MatrixXd k_;
  std::vector<lapack_int> ipiv_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

// Moves a start point strictly inside its bounds.
double push_inside(double v, double l, double u) {
  const double k1 = 1e-2, k2 = 1e-2;
  if (std::isfinite(l) && std::isfinite(u)) {
    double pl = std::min(k1 * std::max(1.0, std::abs(l)), k2 * (u - l));
    double pu = std::min(k1 * std::max(1.0, std::abs(u)), k2 * (u - l));
    return std::clamp(v, l + pl, u - pu);
  }
  if (std::isfinite(l)) return std::max(v, l + k1 * std::max(1.0, std::abs(l)));
  if (std::isfinite(u)) return std::min(v, u - k1 * std::max(1.0, std::abs(u)));
  return v;
}

struct FilterEntry {
  double theta, phi;
};

}  // namespace

std::string_view to_string(Status status) {
  switch (status) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::iteration_limit: return "iteration-limit";
    case Status::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

IpmResult solve(const Model& model, const IpmOptions& options) {
  Reduced p(model);
  const Eigen::Index n = p.n;
  const Eigen::Index m = p.m;
  IpmResult result;

  auto finish = [&](Status status, const Eigen::VectorXd& z, const Eigen::VectorXd& lambda, int iterations) {
    result.status = status;
    result.x = p.full(z);
    result.objective = model.objective(result.x);
    result.lambda = lambda.cwiseProduct(p.row_scale) / p.obj_scale;
    Eigen::VectorXd g = model.constraints(result.x);
    double viol = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      viol = std::max(viol, model.row_lower()[static_cast<std::size_t>(i)] - g[i]);
      viol = std::max(viol, g[i] - model.row_upper()[static_cast<std::size_t>(i)]);
    }
    result.max_violation = viol;
    result.iterations = iterations;
    if (!std::isfinite(result.objective) || !result.x.allFinite()) result.status = Status::numerical_failure;
    return result;
  };

  // Start point and scaling.
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < p.nx; ++k) {
    auto j = static_cast<std::size_t>(p.free_vars[static_cast<std::size_t>(k)]);
    z0[k] = push_inside(model.initial()[j], model.var_lower()[j], model.var_upper()[j]);
  }
  {
    Eigen::VectorXd x0 = p.fixed_x;
    for (Eigen::Index k = 0; k < p.nx; ++k) x0[p.free_vars[static_cast<std::size_t>(k)]] = z0[k];
    Model::FirstOrder d = model.first_order(x0);
    p.set_scaling(d);
    for (Eigen::Index k = 0; k < p.ns; ++k) {
      Eigen::Index row = p.slack_row[static_cast<std::size_t>(k)];
      z0[p.nx + k] = push_inside(d.g[row] * p.row_scale[row], p.lower[p.nx + k], p.upper[p.nx + k]);
    }
  }
  Eigen::VectorXd z = z0;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd has_l(n), has_u(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    has_l[i] = std::isfinite(p.lower[i]) ? 1.0 : 0.0;
    has_u[i] = std::isfinite(p.upper[i]) ? 1.0 : 0.0;
  }
  Eigen::VectorXd zl = has_l;
  Eigen::VectorXd zu = has_u;
  const double n_bounds = has_l.sum() + has_u.sum();

  if (n == 0) {
    auto [f, c] = p.value(z);
    (void)f;
    Status s = c.size() == 0 || c.lpNorm<Eigen::Infinity>() <= options.constraint_tolerance ? Status::optimal : Status::infeasible;
    return finish(s, z, lambda, 0);
  }

  const bool dense = static_cast<std::size_t>(n + m) <= options.dense_limit;
  KktSolver kkt(n, m, dense);

  double mu = 0.1;
  const double mu_min = options.tolerance / 10.0;
  double tau = std::max(0.99, 1.0 - mu);
  std::vector<FilterEntry> filter;
  double theta_max = 0.0, theta_min = 0.0;
  double last_dw = 0.0;
  int acceptable_count = 0;
  int failures = 0;

  auto slack_l = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) d[i] = has_l[i] > 0 ? v[i] - p.lower[i] : 1.0;
    return d;
  };
  auto slack_u = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) d[i] = has_u[i] > 0 ? p.upper[i] - v[i] : 1.0;
    return d;
  };
  auto barrier = [&](double f, const Eigen::VectorXd& v) {
    double phi = f;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (has_l[i] > 0) {
        double d = v[i] - p.lower[i];
        if (!(d > 0)) return kInfinity;
        phi -= mu * std::log(d);
      }
      if (has_u[i] > 0) {
        double d = p.upper[i] - v[i];
        if (!(d > 0)) return kInfinity;
        phi -= mu * std::log(d);
      }
    }
    return phi;
  };

  for (int iter = 0;; ++iter) {
    Reduced::Eval e = p.evaluate(z);
    if (!std::isfinite(e.f) || !e.c.allFinite() || !e.grad.allFinite()) {
      if (options.verbose) std::fprintf(stderr, "non-finite evaluation\n");
      return finish(Status::numerical_failure, z, lambda, iter);
    }
    Eigen::VectorXd dl = slack_l(z);
    Eigen::VectorXd du = slack_u(z);

    Eigen::VectorXd dual = e.grad + e.jac.transpose() * lambda - zl + zu;
    double s_d = std::max(100.0, (lambda.lpNorm<1>() + zl.lpNorm<1>() + zu.lpNorm<1>()) /
                                     std::max(1.0, static_cast<double>(m) + n_bounds)) / 100.0;
    double s_c = std::max(100.0, (zl.lpNorm<1>() + zu.lpNorm<1>()) / std::max(1.0, n_bounds)) / 100.0;
    auto kkt_error = [&](double target) {
      double comp = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (has_l[i] > 0) comp = std::max(comp, std::abs(dl[i] * zl[i] - target));
        if (has_u[i] > 0) comp = std::max(comp, std::abs(du[i] * zu[i] - target));
      }
      double primal = m > 0 ? e.c.lpNorm<Eigen::Infinity>() : 0.0;
      return std::max({dual.lpNorm<Eigen::Infinity>() / s_d, primal, comp / s_c});
    };
    double unscaled_viol = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) unscaled_viol = std::max(unscaled_viol, std::abs(e.c[i]) / p.row_scale[i]);

    double e0 = kkt_error(0.0);
    if (options.verbose) {
      std::fprintf(stderr, "%4d f=% .8e err=%.2e viol=%.2e mu=%.1e dw=%.1e\n", iter, e.f / p.obj_scale, e0,
                   unscaled_viol, mu, last_dw);
    }
    if (e0 <= options.tolerance && unscaled_viol <= options.constraint_tolerance) {
      return finish(Status::optimal, z, lambda, iter);
    }
    if (e0 <= options.acceptable_tolerance && unscaled_viol <= options.constraint_tolerance) {
      if (++acceptable_count >= options.acceptable_iterations) return finish(Status::optimal, z, lambda, iter);
    } else {
      acceptable_count = 0;
    }
    if (iter >= options.max_iter) {
      Status s = Status::iteration_limit;
      if (lambda.lpNorm<Eigen::Infinity>() > 1e10 && unscaled_viol > options.constraint_tolerance) s = Status::infeasible;
      return finish(s, z, lambda, iter);
    }

    const double theta = m > 0 ? e.c.lpNorm<1>() : 0.0;
    if (iter == 0) {
      theta_max = 1e4 * std::max(1.0, theta);
      theta_min = 1e-4 * std::max(1.0, theta);
    }
    while (mu > mu_min && kkt_error(mu) <= 10.0 * mu) {
      double next = std::max(mu_min, std::min(0.2 * mu, std::pow(mu, 1.5)));
      if (next >= mu) break;
      mu = next;
      tau = std::max(0.99, 1.0 - mu);
      filter.clear();
    }

    // Newton system with inertia correction.
    Eigen::VectorXd sigma = zl.cwiseQuotient(dl).cwiseProduct(has_l) + zu.cwiseQuotient(du).cwiseProduct(has_u);
    Eigen::SparseMatrix<double> h = p.hessian(z, lambda);
    double dw = 0.0;
    double dc = 0.0;
    bool factored = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      Inertia in = kkt.factor(h, sigma, e.jac, dw, dc);
      if (in.zero == 0 && in.positive == n && in.negative == m) {
        factored = true;
        break;
      }
      if (in.zero > 0 && dc == 0.0 && m > 0) {
        dc = 1e-8 * std::pow(mu, 0.25);
        continue;
      }
      if (dw == 0.0) {
        dw = last_dw == 0.0 ? 1e-4 : std::max(1e-20, last_dw / 3.0);
      } else {
        dw *= last_dw == 0.0 ? 100.0 : 8.0;
      }
      if (dw > 1e40) break;
    }
    if (!factored) {
      if (options.verbose) std::fprintf(stderr, "KKT factorization failed\n");
      return finish(Status::numerical_failure, z, lambda, iter);
    }
    if (dw > 0.0) last_dw = dw;

    Eigen::VectorXd gphi = e.grad;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (has_l[i] > 0) gphi[i] -= mu / dl[i];
      if (has_u[i] > 0) gphi[i] += mu / du[i];
    }
    Eigen::VectorXd rhs(n + m);
    rhs.head(n) = -(gphi + e.jac.transpose() * lambda);
    rhs.tail(m) = -e.c;
    Eigen::VectorXd sol = kkt.solve(rhs);
    if (!sol.allFinite()) return finish(Status::numerical_failure, z, lambda, iter);
    Eigen::VectorXd dz = sol.head(n);
    Eigen::VectorXd dlam = sol.tail(m);

    auto step_to_boundary = [&](const Eigen::VectorXd& d) {
      double a = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (has_l[i] > 0 && d[i] < 0) a = std::min(a, -tau * dl[i] / d[i]);
        if (has_u[i] > 0 && d[i] > 0) a = std::min(a, tau * du[i] / d[i]);
      }
      return a;
    };
    Eigen::VectorXd dzl(n), dzu(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      dzl[i] = has_l[i] > 0 ? mu / dl[i] - zl[i] - zl[i] / dl[i] * dz[i] : 0.0;
      dzu[i] = has_u[i] > 0 ? mu / du[i] - zu[i] + zu[i] / du[i] * dz[i] : 0.0;
    }
    double alpha_z = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (dzl[i] < 0) alpha_z = std::min(alpha_z, -tau * zl[i] / dzl[i]);
      if (dzu[i] < 0) alpha_z = std::min(alpha_z, -tau * zu[i] / dzu[i]);
    }
    const double alpha_max = step_to_boundary(dz);

    // Filter line search.
    const double phi = barrier(e.f, z);
    const double gd = gphi.dot(dz);
    const double gamma_theta = 1e-5, gamma_phi = 1e-8, eta = 1e-8;
    double alpha_min = gd < 0 ? 0.05 * std::min({gamma_theta, gamma_phi * theta / -gd,
                                                std::pow(theta, 1.1) / std::pow(-gd, 2.3)})
                              : 0.05 * gamma_theta;
    alpha_min = std::max(alpha_min, 1e-14);
    bool switching_region = theta <= theta_min;

    auto acceptable = [&](double alpha, double theta_t, double phi_t, bool& f_type) {
      if (!std::isfinite(phi_t) || !std::isfinite(theta_t) || theta_t > theta_max) return false;
      for (const FilterEntry& fe : filter) {
        if (theta_t >= fe.theta && phi_t >= fe.phi) return false;
      }
      bool switching = gd < 0 && alpha * std::pow(-gd, 2.3) > std::pow(theta, 1.1);
      if (switching_region && switching) {
        f_type = true;
        return phi_t <= phi + eta * alpha * gd;
      }
      f_type = false;
      return theta_t <= (1.0 - gamma_theta) * theta || phi_t <= phi - gamma_phi * theta;
    };

    double alpha = alpha_max;
    bool accepted = false;
    bool f_type = false;
    bool soc_tried = false;
    Eigen::VectorXd step = dz;
    Eigen::VectorXd lam_step = dlam;
    double step_alpha = alpha;
    while (alpha >= alpha_min * alpha_max || alpha == alpha_max) {
      Eigen::VectorXd zt = z + alpha * dz;
      auto [ft, ct] = p.value(zt);
      double theta_t = m > 0 ? ct.lpNorm<1>() : 0.0;
      double phi_t = barrier(ft, zt);
      if (acceptable(alpha, theta_t, phi_t, f_type)) {
        accepted = true;
        step_alpha = alpha;
        break;
      }
      if (!soc_tried && alpha == alpha_max && theta_t >= theta && m > 0) {
        soc_tried = true;
        Eigen::VectorXd rhs_soc = rhs;
        rhs_soc.tail(m) = -(alpha * e.c + ct);
        Eigen::VectorXd sol_soc = kkt.solve(rhs_soc);
        if (sol_soc.allFinite()) {
          Eigen::VectorXd dz_soc = sol_soc.head(n);
          double a_soc = step_to_boundary(dz_soc);
          Eigen::VectorXd zs = z + a_soc * dz_soc;
          auto [fs, cs] = p.value(zs);
          double theta_s = cs.lpNorm<1>();
          double phi_s = barrier(fs, zs);
          if (acceptable(alpha, theta_s, phi_s, f_type)) {
            accepted = true;
            step = dz_soc;
            lam_step = sol_soc.tail(m);
            step_alpha = a_soc;
            break;
          }
        }
      }
      alpha *= 0.5;
    }
    if (accepted) {
      failures = 0;
      if (!f_type) filter.push_back({(1.0 - gamma_theta) * theta, phi - gamma_phi * theta});
    } else {
      // Take the full step and start a fresh filter.
      if (++failures > 10) {
        if (options.verbose) std::fprintf(stderr, "line search failed repeatedly\n");
        Status s = unscaled_viol > options.constraint_tolerance ? Status::infeasible : Status::numerical_failure;
        return finish(s, z, lambda, iter);
      }
      filter.clear();
      step = dz;
      lam_step = dlam;
      step_alpha = alpha_max;
    }

    z += step_alpha * step;
    lambda += step_alpha * lam_step;
    zl += alpha_z * dzl;
    zu += alpha_z * dzu;
    Eigen::VectorXd ndl = slack_l(z);
    Eigen::VectorXd ndu = slack_u(z);
    const double kappa = 1e10;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (has_l[i] > 0) zl[i] = std::clamp(zl[i], mu / (kappa * ndl[i]), kappa * mu / ndl[i]);
      if (has_u[i] > 0) zu[i] = std::clamp(zu[i], mu / (kappa * ndu[i]), kappa * mu / ndu[i]);
    }
  }
}

}  // namespace gridcase::opt
