#include "dcoh/engine.hpp"

#include <algorithm>
#include <cmath>

namespace dcoh {

MarginLoss margin_ranking_loss(double x1, double x2, double margin, double y) {
  const double v = -y * (x1 - x2) + margin;
  if (v <= 0.0) return {0.0, 0.0, 0.0};
  return {v, -y, y};
}

GradCheckReport grad_check(const ScalarFn& f, const GradFn& grad,
                           std::span<const double> theta, const GradCheckOptions& opt,
                           const std::function<bool(std::span<const double>)>& kink) {
  if (!(opt.step > 0.0)) throw std::invalid_argument("grad_check: step must be > 0");
  GradCheckReport rep;
  if (kink && kink(theta)) {
    rep.excluded = true;
    return rep;
  }
  const auto analytic = grad(theta);
  if (analytic.size() != theta.size())
    throw std::invalid_argument("grad_check: gradient size mismatch");
  std::vector<std::size_t> coords = opt.coordinates;
  if (coords.empty()) {
    coords.resize(theta.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  }
  std::vector<double> x(theta.begin(), theta.end());
  for (auto i : coords) {
    const double saved = x[i];
    x[i] = saved + opt.step;
    const double fp = f(x);
    x[i] = saved - opt.step;
    const double fm = f(x);
    x[i] = saved;
    const double numeric = (fp - fm) / (2.0 * opt.step);
    const double a = analytic[i];
    if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(a))
      throw NumericError("grad_check: non-finite evaluation at coordinate " +
                         std::to_string(i));
    const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel >= rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_index = i;
      rep.analytic_at_worst = a;
      rep.numeric_at_worst = numeric;
    }
  }
  rep.passed = rep.max_rel_error < opt.tol;
  return rep;
}

}  // namespace dcoh
