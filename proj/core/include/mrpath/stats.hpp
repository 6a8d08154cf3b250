#pragma once

#include <span>
#include <vector>

namespace mrpath::stats {

/// Standard normal quantile, Phi^{-1}(p).
double normal_quantile(double p);

/// z such that P(Z > z) = alpha.
inline double upper_z(double alpha) { return normal_quantile(1.0 - alpha); }

double normal_cdf(double x);

/// Type-7 (linear interpolation) quantile of unsorted data.
double quantile(std::vector<double> values, double q);

double mean(std::span<const double> values);

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> values);

}  // namespace mrpath::stats
