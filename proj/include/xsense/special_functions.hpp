#pragma once

// Distribution tails used by the significance tests.

namespace xsense {

// P(X > x) for X ~ chi-square with `dof` degrees of freedom.
double chi2_sf(double x, double dof);

// P(T > t) for T ~ Student t with `dof` degrees of freedom (dof may be
// fractional).
double student_t_sf(double t, double dof);

// P(|T| >= |t|).
double student_t_two_sided(double t, double dof);

}  // namespace xsense
