#include "riskbo/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace riskbo {

double var_discrete(const Vec& values, const Vec& masses, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("var_discrete: alpha must be in (0,1)");
  }
  const int n = static_cast<int>(values.size());
  if (n == 0 || masses.size() != n) {
    throw std::invalid_argument("var_discrete: values/masses mismatch");
  }
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(values[i])) {
      throw std::invalid_argument("var_discrete: non-finite value");
    }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return values[a] < values[b]; });
  // merge exact ties (1e-12) before cumulating
  double cum = 0.0;
  int i = 0;
  while (i < n) {
    const double v = values[order[i]];
    double mass = 0.0;
    int j = i;
    while (j < n && values[order[j]] - v <= 1e-12) {
      mass += masses[order[j]];
      ++j;
    }
    cum += mass;
    if (cum + 1e-12 >= alpha) return v;
    i = j;
  }
  return values[order[n - 1]];
}

double pinball(double w, double alpha) {
  return w >= 0.0 ? alpha * w : (alpha - 1.0) * w;
}

double estimate_var_pinball(const std::function<double(const Vec&)>& value_fn,
                            const EnvDistribution& env, double alpha,
                            const PinballConfig& cfg, Rng& rng) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("estimate_var_pinball: alpha in (0,1)");
  }
  if (cfg.batch < 1 || cfg.iters < 1) {
    throw std::invalid_argument("estimate_var_pinball: bad config");
  }
  auto eval = [&](const Vec& z) {
    const double v = value_fn(z);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "estimate_var_pinball: non-finite value at z = ["
         << z.transpose() << "]";
      throw std::runtime_error(os.str());
    }
    return v;
  };

  // pilot draw fixes the initial point and the step scale
  const int pilot_n = std::max(cfg.pilot, 8);
  Vec pilot(pilot_n);
  for (int i = 0; i < pilot_n; ++i) pilot[i] = eval(env.sample_one(rng));
  double nu = cfg.init_nu;
  if (!std::isfinite(nu)) {
    nu = var_discrete(pilot, Vec::Constant(pilot_n, 1.0 / pilot_n), alpha);
  }
  double scale = cfg.step_scale;
  if (!(scale > 0.0)) {
    const double spread = percentile({pilot.data(), pilot.data() + pilot_n}, 0.9) -
                          percentile({pilot.data(), pilot.data() + pilot_n}, 0.1);
    scale = std::max(spread, 1e-8);
  }

  double avg = 0.0;
  int avg_count = 0;
  const int avg_from = cfg.iters / 2;
  for (int k = 1; k <= cfg.iters; ++k) {
    int below = 0;
    for (int b = 0; b < cfg.batch; ++b) {
      if (eval(env.sample_one(rng)) < nu) ++below;
    }
    const double grad =
        static_cast<double>(below) / static_cast<double>(cfg.batch) - alpha;
    nu -= scale / std::sqrt(static_cast<double>(k)) * grad;
    if (k > avg_from) {
      avg += nu;
      ++avg_count;
    }
  }
  return avg_count > 0 ? avg / avg_count : nu;
}

double var_of_bound(const ConfidenceField& field, const Vec& x,
                    BoundSide side, const EnvDistribution& env, double alpha,
                    const PinballConfig& cfg, Rng& rng) {
  const int d_x = field.posterior->data().d_x;
  if (x.size() != d_x) {
    throw std::invalid_argument("var_of_bound: x dimension mismatch");
  }
  if (env.kind() == EnvKind::Discrete) {
    AtomPredictor pred(*field.posterior, env.atoms());
    Vec l, u;
    field.bounds_at_atoms(pred, x, l, u);
    return var_discrete(side == BoundSide::Lower ? l : u, env.masses(), alpha);
  }
  auto value_fn = [&](const Vec& z) {
    Vec p(x.size() + z.size());
    p << x, z;
    const Interval b = field.bounds_at(p);
    return side == BoundSide::Lower ? b.lo : b.hi;
  };
  return estimate_var_pinball(value_fn, env, alpha, cfg, rng);
}

VaRInterval var_interval(const ConfidenceField& field, const Vec& x,
                         const EnvDistribution& env, double alpha,
                         const PinballConfig& cfg, Rng& rng) {
  VaRInterval out;
  out.alpha = alpha;
  out.x = x;
  out.lo = var_of_bound(field, x, BoundSide::Lower, env, alpha, cfg, rng);
  out.hi = var_of_bound(field, x, BoundSide::Upper, env, alpha, cfg, rng);
  if (out.lo > out.hi) {
    if (env.kind() == EnvKind::Discrete) {
      throw std::logic_error("var_interval: lo > hi on the exact path");
    }
    // continuous endpoints carry estimator noise; a crossing signals a
    // fault upstream only when it exceeds that noise
    throw std::runtime_error("var_interval: estimator produced lo > hi");
  }
  return out;
}

}  // namespace riskbo
