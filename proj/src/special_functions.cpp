#include "xsense/special_functions.hpp"

#include <cmath>
#include <string>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "xsense/error.hpp"

namespace xsense {

namespace {

void require_dof(double dof) {
  if (!(dof > 0.0) || !std::isfinite(dof))
    throw Error(ErrorCode::InvalidArgument, "degrees of freedom must be positive, got " + std::to_string(dof));
}

}  // namespace

double chi2_sf(double x, double dof) {
  require_dof(dof);
  if (std::isnan(x)) throw Error(ErrorCode::InvalidArgument, "chi2_sf of NaN");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

double student_t_two_sided(double t, double dof) {
  require_dof(dof);
  if (std::isnan(t)) throw Error(ErrorCode::InvalidArgument, "student_t of NaN");
  if (std::isinf(t)) return 0.0;
  // P(|T| >= t) = I_{dof/(dof+t^2)}(dof/2, 1/2); t = 0 gives I_1 = 1.
  const double z = dof / (dof + t * t);
  if (z >= 1.0) return 1.0;
  return boost::math::ibeta(dof / 2.0, 0.5, z);
}

double student_t_sf(double t, double dof) {
  const double two = student_t_two_sided(t, dof);
  return t >= 0.0 ? 0.5 * two : 1.0 - 0.5 * two;
}

}  // namespace xsense
