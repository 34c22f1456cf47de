#include "lebex/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lebex {

LossFunction exp_loss() {
  LossFunction f;
  f.name = "exp";
  f.l = [](double x) { return std::exp(x); };
  // l*(y) = y log y - y (y > 0), 0 at y = 0
  f.conj = [](double y) {
    if (y < 0) return kInf;
    if (y == 0) return 0.0;
    return y * std::log(y) - y;
  };
  f.x0 = -1.0;
  f.descriptor = {{"loss", "exp"}};
  return f;
}

LossFunction power_loss(double p) {
  if (!(p > 1)) throw std::invalid_argument("power loss: exponent must exceed 1");
  LossFunction f;
  f.name = "power";
  f.l = [p](double x) { return x <= -1 ? 0.0 : std::pow(x + 1.0, p); };
  // stationary point x+1 = (y/p)^{1/(p-1)} on the curved branch
  f.conj = [p](double y) {
    if (y < 0) return kInf;
    if (y == 0) return 0.0;
    double t = std::pow(y / p, 1.0 / (p - 1.0));
    return y * t - std::pow(t, p) - y;
  };
  f.x0 = -1.0;
  f.descriptor = {{"loss", "power"}, {"p", p}};
  return f;
}

LossFunction linexp_loss() {
  LossFunction f;
  f.name = "linexp";
  f.l = [](double x) { return x >= 0 ? std::exp(x) : 1.0 + x; };
  // the linear branch makes sup_x(xy - l(x)) blow up for slopes below 1
  f.conj = [](double y) {
    if (y < 1) return kInf;
    return y * std::log(y) - y;
  };
  f.x0 = -1.0;
  f.descriptor = {{"loss", "linexp"}};
  return f;
}

LossFunction quad_plus_linear_loss() {
  LossFunction f;
  f.name = "quad_plus_linear";
  f.l = [](double x) { return (x > 0 ? x * x : 0.0) + x; };
  f.conj = [](double y) {
    if (y < 1) return kInf;  // the linear branch escapes for slopes below 1
    return (y - 1.0) * (y - 1.0) / 4.0;
  };
  f.x0 = -1.0;
  f.descriptor = {{"loss", "quad_plus_linear"}};
  return f;
}

LossFunction table_loss(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() < 2 || xs.size() != ys.size())
    throw std::invalid_argument("table loss: need at least two knots");
  std::vector<double> slopes;
  for (size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) throw std::invalid_argument("table loss: x must increase");
    slopes.push_back((ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]));
    if (slopes.back() < 0 || (i > 1 && slopes[i - 1] < slopes[i - 2] - 1e-12))
      throw std::invalid_argument("table loss: knots must be convex increasing");
  }
  LossFunction f;
  f.name = "table";
  f.l = [xs, ys, slopes](double x) {
    if (x <= xs.front()) return ys.front() + slopes.front() * (x - xs.front());
    if (x >= xs.back()) return ys.back() + slopes.back() * (x - xs.back());
    size_t i = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin();
    return ys[i - 1] + slopes[i - 1] * (x - xs[i - 1]);
  };
  // conjugate of a piecewise-linear map: finite exactly on the slope range,
  // attained at a knot
  f.conj = [xs, ys, slopes](double y) {
    if (y < slopes.front() - 1e-12 || y > slopes.back() + 1e-12) return kInf;
    double best = -kInf;
    for (size_t i = 0; i < xs.size(); ++i) best = std::max(best, xs[i] * y - ys[i]);
    return best;
  };
  // a point strictly below l(0); with slope >= 0 everywhere any x < 0 works
  // only if the left slope is positive — find one by scanning
  double l0 = f.l(0.0);
  f.x0 = 0.0;
  for (double x = -1.0; x >= -1e6; x *= 4.0)
    if (f.l(x) < l0) {
      f.x0 = x;
      break;
    }
  if (f.x0 == 0.0) throw std::invalid_argument("table loss: l(0) must exceed inf l");
  f.descriptor = {{"loss", "table"}, {"x", xs}, {"y", ys}};
  return f;
}

YoungFunction exp_young() {
  YoungFunction y;
  y.name = "exp";
  y.phi = [](double x) { return std::expm1(std::abs(x)); };
  y.conj = [](double v) {
    if (v < 0) return kInf;
    if (v <= 1) return 0.0;
    return v * std::log(v) - v + 1.0;
  };
  y.descriptor = {{"young", "exp"}};
  return y;
}

YoungFunction power_young(double p) {
  if (!(p > 1)) throw std::invalid_argument("power young: exponent must exceed 1");
  double q = p / (p - 1.0);
  YoungFunction y;
  y.name = "power";
  y.phi = [p](double x) { return std::pow(std::abs(x), p) / p; };
  y.conj = [q](double v) { return std::pow(std::abs(v), q) / q; };
  y.descriptor = {{"young", "power"}, {"p", p}};
  return y;
}

YoungFunction young_from_loss(const LossFunction& l) {
  YoungFunction y;
  y.name = "from_loss:" + l.name;
  double l0 = l.l(0.0);
  auto lf = l.l;
  y.phi = [lf, l0](double x) { return lf(std::abs(x)) - l0; };
  y.descriptor = {{"young", "from_loss"}, {"loss", l.descriptor}};
  return y;
}

LossFunction loss_from_json(const nlohmann::json& j) {
  std::string name = j.at("loss");
  if (name == "exp") return exp_loss();
  if (name == "power") return power_loss(j.at("p"));
  if (name == "linexp") return linexp_loss();
  if (name == "quad_plus_linear") return quad_plus_linear_loss();
  if (name == "table")
    return table_loss(j.at("x").get<std::vector<double>>(),
                      j.at("y").get<std::vector<double>>());
  throw std::invalid_argument("unknown loss '" + name + "'");
}

YoungFunction young_from_json(const nlohmann::json& j) {
  std::string name = j.at("young");
  if (name == "exp") return exp_young();
  if (name == "power") return power_young(j.at("p"));
  if (name == "from_loss") return young_from_loss(loss_from_json(j.at("loss")));
  throw std::invalid_argument("unknown young function '" + name + "'");
}

}  // namespace lebex
