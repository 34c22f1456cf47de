#ifndef LEBEX_LOSS_HPP
#define LEBEX_LOSS_HPP

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lebex/numeric.hpp"

namespace lebex {

/// Increasing convex loss with l(0) > inf l, together with its Legendre
/// conjugate l*(y) = sup_x (xy - l(x)) (dom l* in R+) and a witness point
/// x0 with l(x0) < l(0) feeding the lambda-bracket of the shortfall
/// conjugate search.
struct LossFunction {
  std::string name;
  std::function<double(double)> l;
  std::function<double(double)> conj;  // +inf outside dom l*
  double x0 = -1.0;
  nlohmann::json descriptor;
};

LossFunction exp_loss();                       // e^x
LossFunction power_loss(double p);             // ((x+1)^+)^p, p > 1
LossFunction linexp_loss();                    // e^x for x>=0, 1+x below
LossFunction quad_plus_linear_loss();          // (x^+)^2 + x
/// Convex increasing piecewise-linear interpolant through (xs, ys),
/// extended linearly with the end slopes.
LossFunction table_loss(std::vector<double> xs, std::vector<double> ys);

/// Even convex Phi with Phi(0)=0, Phi(x) -> inf; conj may be empty for
/// derived instances (only Phi values are needed for heart tests).
struct YoungFunction {
  std::string name;
  std::function<double(double)> phi;
  std::function<double(double)> conj;
  nlohmann::json descriptor;
};

YoungFunction exp_young();                     // e^|x| - 1
YoungFunction power_young(double p);           // |x|^p / p
/// Phi_l(x) := l(|x|) - l(0), the Young function attached to a loss.
YoungFunction young_from_loss(const LossFunction& l);

LossFunction loss_from_json(const nlohmann::json& j);
YoungFunction young_from_json(const nlohmann::json& j);

}  // namespace lebex

#endif
