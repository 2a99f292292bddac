#pragma once

#include "riskbo/bounds.hpp"
#include "riskbo/env.hpp"

#include <functional>

namespace riskbo {

// Value-at-risk of a finite law: the smallest value v (atoms sorted
// ascending, exact-equal values merged first) whose cumulative mass
// reaches alpha. Throws if alpha lies outside (0,1).
double var_discrete(const Vec& values, const Vec& masses, double alpha);

// Tilted absolute value: alpha*w for w >= 0, (alpha-1)*w otherwise.
double pinball(double w, double alpha);

struct PinballConfig {
  int batch = 64;
  int iters = 1500;
  double step_scale = 0.0;  // <= 0: scaled from a pilot draw
  double init_nu = std::numeric_limits<double>::quiet_NaN();  // NaN: pilot quantile
  int pilot = 256;
};

// Stochastic subgradient descent on E[pinball(value(z) - nu)] with
// step c/sqrt(k) and tail averaging over the last half of iterates.
double estimate_var_pinball(const std::function<double(const Vec&)>& value_fn,
                            const EnvDistribution& env, double alpha,
                            const PinballConfig& cfg, Rng& rng);

enum class BoundSide { Lower, Upper };

// VaR of the chosen confidence bound at x: exact over atoms for
// discrete Z, pinball estimation otherwise.
double var_of_bound(const ConfidenceField& field, const Vec& x,
                    BoundSide side, const EnvDistribution& env, double alpha,
                    const PinballConfig& cfg, Rng& rng);

struct VaRInterval {
  double lo;
  double hi;
  double alpha;
  Vec x;
};

VaRInterval var_interval(const ConfidenceField& field, const Vec& x,
                         const EnvDistribution& env, double alpha,
                         const PinballConfig& cfg, Rng& rng);

}  // namespace riskbo
