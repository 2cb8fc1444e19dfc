#ifndef ODL_NORMAL_HPP_
#define ODL_NORMAL_HPP_

namespace odl {

/// Standard normal CDF via the complementary error function.
double normal_cdf(double x);

/// Upper tail 1 - Phi(x) without cancellation for large x.
double normal_upper_tail(double x);

/// Standard normal quantile for p in (0, 1). Acklam's rational approximation
/// (relative error about 1e-9) followed by one Halley step against erfc,
/// which brings the error to roughly machine precision.
double normal_quantile(double p);

}  // namespace odl

#endif  // ODL_NORMAL_HPP_
