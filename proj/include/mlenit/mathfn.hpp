#pragma once

namespace mlenit {

double normal_pdf(double z);
double normal_cdf(double z);

// Numerically stable standard logistic 1/(1+exp(-z)), clamped to the open
// interval (0, 1) so downstream logs never hit exactly 0 or 1.
double logistic(double z);

// Regularized incomplete beta I_x(a, b) via the modified Lentz continued
// fraction; |error| well below 1e-12 over the arguments used here.
double betainc_reg(double a, double b, double x);

// CDF of Student's t with df degrees of freedom.
double t_cdf(double t, double df);

}  // namespace mlenit
