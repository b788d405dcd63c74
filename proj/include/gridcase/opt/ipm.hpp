#pragma once

#include <cstddef>
#include <string_view>

#include <Eigen/Dense>

#include "gridcase/opt/model.hpp"

namespace gridcase::opt {

enum class Status { optimal, infeasible, iteration_limit, numerical_failure };

std::string_view to_string(Status status);

struct IpmOptions {
  double tolerance = 1e-8;         // scaled KKT error
  double constraint_tolerance = 1e-6;  // unscaled max violation
  double acceptable_tolerance = 1e-6;
  int acceptable_iterations = 10;
  int max_iter = 200;
  std::size_t dense_limit = 600;   // KKT dimension up to which the dense factorization is used
  bool verbose = false;
};

struct IpmResult {
  Status status = Status::numerical_failure;
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;  // constraint multipliers of  f + lambda' g
  double objective = 0.0;
  double max_violation = 0.0;
  int iterations = 0;
};

/// Primal-dual interior point method with a filter line search.
IpmResult solve(const Model& model, const IpmOptions& options = {});

}  // namespace gridcase::opt
