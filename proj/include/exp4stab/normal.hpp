#pragma once

namespace exp4stab {

/// Standard normal CDF, 0.5 * erfc(-x / sqrt(2)).
double normal_cdf(double x);

/// Inverse standard normal CDF. Acklam's rational approximation (relative
/// error below 1.15e-9) followed by one Halley correction against
/// normal_cdf, which brings the result to near machine precision.
/// Throws std::domain_error outside (0, 1).
double normal_quantile(double p);

/// z_{1 - alpha/2}.
double two_sided_critical(double alpha);

}  // namespace exp4stab
