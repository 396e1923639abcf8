#pragma once

// Scalar distribution functions used by the data-generating processes and
// the likelihoods.

namespace ib::special {

double normal_cdf(double x);
double normal_quantile(double p);

double student_t_cdf(double t, double nu);
double student_t_log_pdf(double t, double nu);
/// Quantile of Student's t with nu > 0 degrees of freedom (nu need not be an
/// integer). Inverse regularized incomplete beta followed by Newton polish
/// on the CDF to 1e-12 relative tolerance.
double student_t_quantile(double p, double nu);

/// Upper quantile of the chi-square distribution with k degrees of freedom.
double chi_square_quantile(double p, double k);

double digamma(double x);

}  // namespace ib::special
