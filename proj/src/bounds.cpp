#include "riskbo/bounds.hpp"

#include <cmath>

namespace riskbo {

double beta_practical(int t) {
  if (t < 1) throw std::invalid_argument("beta_practical: t >= 1");
  const double td = static_cast<double>(t);
  return 2.0 * std::log(td * td * M_PI * M_PI / 0.6);
}

double beta_theoretical(int t, const BetaSchedule& s) {
  if (t < 1) throw std::invalid_argument("beta_theoretical: t >= 1");
  if (!(s.delta > 0.0 && s.delta < 1.0) || !(s.rkhs_bound > 0.0)) {
    throw std::invalid_argument("beta_theoretical: need delta in (0,1), B > 0");
  }
  double gamma = 0.0;
  if (s.gamma_fn) {
    gamma = s.gamma_fn(t - 1);
    if (gamma < 0.0) {
      throw std::invalid_argument("beta_theoretical: gamma estimate < 0");
    }
  }
  const double rad =
      std::sqrt(2.0 * (gamma + 1.0 + std::log(1.0 / s.delta)));
  const double root = s.rkhs_bound + s.sigma_n * rad;
  return root * root;
}

double BetaSchedule::beta(int t) const {
  return kind == Kind::Practical ? beta_practical(t)
                                 : beta_theoretical(t, *this);
}

Interval ConfidenceField::bounds_at(const Vec& p) const {
  const Prediction pr = posterior->predict(p);
  const double w = std::sqrt(beta) * pr.sigma;
  return {pr.mu - w, pr.mu + w};
}

void ConfidenceField::bounds_at_atoms(const AtomPredictor& pred, const Vec& x,
                                      Vec& l, Vec& u) const {
  Vec mu, sigma;
  pred.predict(x, mu, sigma);
  const double rb = std::sqrt(beta);
  l = mu - rb * sigma;
  u = mu + rb * sigma;
}

}  // namespace riskbo
