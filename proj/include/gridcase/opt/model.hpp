#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gridcase/opt/dual2.hpp"

namespace gridcase::opt {

inline double sin(double a) { return std::sin(a); }
inline double cos(double a) { return std::cos(a); }
inline double sqrt(double a) { return std::sqrt(a); }
inline double exp(double a) { return std::exp(a); }
inline double log(double a) { return std::log(a); }

/// Row index of the objective in the builder calls.
inline constexpr int kObjective = -1;

/// Smooth NLP  min f(x)  s.t.  gl <= g(x) <= gu,  xl <= x <= xu.
///
/// Every row (and the objective) is a constant plus linear terms plus small
/// nonlinear terms over at most a handful of variables. A nonlinear term is a
/// generic callable taking `const std::array<T, N>&`; it is evaluated with
/// `double` for values and with `Dual2<N>` for first and second derivatives.
class Model {
 public:
  int add_variable(double lb, double ub, double init);
  int add_constraint(double lb, double ub);

  void add_linear(int row, int var, double coef);
  void add_constant(int row, double value);

  template <std::size_t N, class F>
  void add_term(int row, const std::array<int, N>& vars, F f);

  std::size_t num_variables() const { return xl_.size(); }
  std::size_t num_constraints() const { return gl_.size(); }
  const std::vector<double>& var_lower() const { return xl_; }
  const std::vector<double>& var_upper() const { return xu_; }
  const std::vector<double>& initial() const { return x0_; }
  const std::vector<double>& row_lower() const { return gl_; }
  const std::vector<double>& row_upper() const { return gu_; }
  void set_initial(int var, double value);

  double objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd constraints(const Eigen::VectorXd& x) const;

  struct FirstOrder {
    double f = 0.0;
    Eigen::VectorXd grad;
    Eigen::VectorXd g;
    Eigen::SparseMatrix<double> jac;  // rows x variables
  };
  FirstOrder first_order(const Eigen::VectorXd& x) const;

  /// Lower triangle of  sigma * Hess f + sum_i lambda_i * Hess g_i.
  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x, double sigma,
                                      const Eigen::VectorXd& lambda) const;

 private:
  struct Term {
    int row = kObjective;
    std::vector<int> vars;
    std::function<double(const double*)> value;
    // Writes gradient (vars.size()) and packed lower Hessian.
    std::function<double(const double*, double*, double*)> derivatives;
  };

  void check_row(int row) const;
  void check_var(int var) const;

  std::vector<double> xl_, xu_, x0_;
  std::vector<double> gl_, gu_;
  std::vector<double> constant_;  // per constraint row
  double objective_constant_ = 0.0;
  std::vector<Eigen::Triplet<double>> linear_;  // (row, var, coef); objective row = -1
  std::vector<Term> terms_;
};

template <std::size_t N, class F>
void Model::add_term(int row, const std::array<int, N>& vars, F f) {
  static_assert(N >= 1 && N <= 16, "terms take between 1 and 16 variables");
  check_row(row);
  for (std::size_t i = 0; i < N; ++i) {
    check_var(vars[i]);
    for (std::size_t j = 0; j < i; ++j) {
      if (vars[i] == vars[j]) throw std::invalid_argument("term repeats a variable");
    }
  }
  Term term;
  term.row = row;
  term.vars.assign(vars.begin(), vars.end());
  term.value = [f](const double* x) {
    std::array<double, N> a;
    for (std::size_t i = 0; i < N; ++i) a[i] = x[i];
    return static_cast<double>(f(a));
  };
  term.derivatives = [f](const double* x, double* grad, double* hess) {
    std::array<Dual2<N>, N> a;
    for (std::size_t i = 0; i < N; ++i) a[i] = Dual2<N>::variable(x[i], i);
    Dual2<N> r = f(a);
    for (std::size_t i = 0; i < N; ++i) grad[i] = r.g[i];
    for (std::size_t k = 0; k < Dual2<N>::kPacked; ++k) hess[k] = r.h[k];
    return r.v;
  };
  terms_.push_back(std::move(term));
}

}  // namespace gridcase::opt
