#include "gridcase/opt/model.hpp"

#include <string>

namespace gridcase::opt {

int Model::add_variable(double lb, double ub, double init) {
  if (std::isnan(lb) || std::isnan(ub) || lb > ub) throw std::invalid_argument("variable bounds out of order");
  if (!std::isfinite(init)) throw std::invalid_argument("variable start must be finite");
  xl_.push_back(lb);
  xu_.push_back(ub);
  x0_.push_back(init);
  return static_cast<int>(xl_.size() - 1);
}

int Model::add_constraint(double lb, double ub) {
  if (std::isnan(lb) || std::isnan(ub) || lb > ub) throw std::invalid_argument("constraint bounds out of order");
  gl_.push_back(lb);
  gu_.push_back(ub);
  constant_.push_back(0.0);
  return static_cast<int>(gl_.size() - 1);
}

void Model::set_initial(int var, double value) {
  check_var(var);
  x0_[static_cast<std::size_t>(var)] = value;
}

void Model::check_row(int row) const {
  if (row < kObjective || row >= static_cast<int>(gl_.size())) {
    throw std::out_of_range("constraint row " + std::to_string(row) + " does not exist");
  }
}

void Model::check_var(int var) const {
  if (var < 0 || var >= static_cast<int>(xl_.size())) {
    throw std::out_of_range("variable " + std::to_string(var) + " does not exist");
  }
}

void Model::add_linear(int row, int var, double coef) {
  check_row(row);
  check_var(var);
  linear_.emplace_back(row, var, coef);
}

void Model::add_constant(int row, double value) {
  check_row(row);
  if (row == kObjective) {
    objective_constant_ += value;
  } else {
    constant_[static_cast<std::size_t>(row)] += value;
  }
}

double Model::objective(const Eigen::VectorXd& x) const {
  double f = objective_constant_;
  for (const auto& t : linear_) {
    if (t.row() == kObjective) f += t.value() * x[t.col()];
  }
  std::array<double, 16> local{};
  for (const Term& term : terms_) {
    if (term.row != kObjective) continue;
    for (std::size_t i = 0; i < term.vars.size(); ++i) local[i] = x[term.vars[i]];
    f += term.value(local.data());
  }
  return f;
}

Eigen::VectorXd Model::constraints(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(constant_.data(), static_cast<Eigen::Index>(constant_.size()));
  for (const auto& t : linear_) {
    if (t.row() != kObjective) g[t.row()] += t.value() * x[t.col()];
  }
  std::array<double, 16> local{};
  for (const Term& term : terms_) {
    if (term.row == kObjective) continue;
    for (std::size_t i = 0; i < term.vars.size(); ++i) local[i] = x[term.vars[i]];
    g[term.row] += term.value(local.data());
  }
  return g;
}

Model::FirstOrder Model::first_order(const Eigen::VectorXd& x) const {
  const auto n = static_cast<Eigen::Index>(xl_.size());
  const auto m = static_cast<Eigen::Index>(gl_.size());
  FirstOrder out;
  out.f = objective_constant_;
  out.grad = Eigen::VectorXd::Zero(n);
  out.g = Eigen::Map<const Eigen::VectorXd>(constant_.data(), m);
  std::vector<Eigen::Triplet<double>> jac;
  jac.reserve(linear_.size() + 4 * terms_.size());
  for (const auto& t : linear_) {
    if (t.row() == kObjective) {
      out.f += t.value() * x[t.col()];
      out.grad[t.col()] += t.value();
    } else {
      out.g[t.row()] += t.value() * x[t.col()];
      jac.push_back(t);
    }
  }
  std::array<double, 16> local{};
  std::array<double, 16> grad{};
  std::array<double, 136> hess{};
  for (const Term& term : terms_) {
    const std::size_t k = term.vars.size();
    for (std::size_t i = 0; i < k; ++i) local[i] = x[term.vars[i]];
    double v = term.derivatives(local.data(), grad.data(), hess.data());
    if (term.row == kObjective) {
      out.f += v;
      for (std::size_t i = 0; i < k; ++i) out.grad[term.vars[i]] += grad[i];
    } else {
      out.g[term.row] += v;
      for (std::size_t i = 0; i < k; ++i) jac.emplace_back(term.row, term.vars[i], grad[i]);
    }
  }
  out.jac.resize(m, n);
  out.jac.setFromTriplets(jac.begin(), jac.end());
  return out;
}

Eigen::SparseMatrix<double> Model::hessian(const Eigen::VectorXd& x, double sigma,
                                           const Eigen::VectorXd& lambda) const {
  const auto n = static_cast<Eigen::Index>(xl_.size());
  std::vector<Eigen::Triplet<double>> entries;
  std::array<double, 16> local{};
  std::array<double, 16> grad{};
  std::array<double, 136> hess{};
  for (const Term& term : terms_) {
    double weight = term.row == kObjective ? sigma : lambda[term.row];
    if (weight == 0.0) continue;
    const std::size_t k = term.vars.size();
    for (std::size_t i = 0; i < k; ++i) local[i] = x[term.vars[i]];
    term.derivatives(local.data(), grad.data(), hess.data());
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double h = weight * hess[i * (i + 1) / 2 + j];
        if (h == 0.0) continue;
        int a = term.vars[i];
        int b = term.vars[j];
        entries.emplace_back(std::max(a, b), std::min(a, b), h);
      }
    }
  }
  Eigen::SparseMatrix<double> h(n, n);
  h.setFromTriplets(entries.begin(), entries.end());
  return h;
}

}  // namespace gridcase::opt
