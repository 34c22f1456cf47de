#ifndef LEBEX_QUADRATURE_HPP
#define LEBEX_QUADRATURE_HPP

#include <functional>
#include <vector>

#include "lebex/numeric.hpp"

namespace lebex {

/// Result of an adaptive integration. `divergent` is set when the running
/// integral exceeds the divergence cap or the integrand is non-finite on a
/// panel that refinement cannot shrink away.
struct QuadResult {
  double value = 0.0;
  double est_error = 0.0;
  bool divergent = false;
};

/// Adaptive composite Gauss-Legendre on [a,b]. Panels are pre-split
/// geometrically toward both endpoints (quantile integrands typically blow
/// up at t=0 or t=1), then refined by bisection until the per-panel error
/// estimate (GL-7 vs GL-15) meets the tolerance budget.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol = default_policy().quad_abs_tol,
                     double divergence_cap = default_policy().divergence_cap);

/// Plain (non-composite) Gauss-Legendre of fixed order on [a,b].
double gauss_legendre(const std::function<double(double)>& f, double a, double b, int order);

}  // namespace lebex

#endif
