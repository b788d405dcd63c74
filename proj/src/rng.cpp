#include "gridcase/rng.hpp"

#include <cmath>

namespace gridcase {

double RandomStream::exponential(double rate) { return -std::log1p(-uniform()) / rate; }

double RandomStream::normal(double mean, double stddev) {
  double u1 = uniform();
  double u2 = uniform();
  // 1 - u1 lies in (0, 1], so the log is finite
  double radius = std::sqrt(-2.0 * std::log1p(-u1));
  return mean + stddev * radius * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace gridcase
