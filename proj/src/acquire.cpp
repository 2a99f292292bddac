#include "riskbo/acquire.hpp"

#include "riskbo/surrogate.hpp"

#include <algorithm>
#include <cmath>

namespace riskbo {

namespace {

constexpr double kTieMargin = 1e-9;

// Shared evaluation state for one acquisition problem: the z-part
// correlations are precomputed once and reused for every candidate x.
struct AcqEval {
  const ConfidenceField& field;
  const EnvDistribution& env;
  double alpha;
  AtomPredictor pred;

  AcqEval(const AcquisitionProblem& prob)
      : field(prob.field),
        env(*prob.env),
        alpha(prob.alpha),
        pred(*prob.field.posterior, prob.env->atoms()) {}

  double value(const Vec& x) const {
    Vec l, u;
    field.bounds_at_atoms(pred, x, l, u);
    return var_discrete(u, env.masses(), alpha);
  }

  double min_upper(const Vec& x) const {
    Vec l, u;
    field.bounds_at_atoms(pred, x, l, u);
    return u.minCoeff();
  }

  // atom whose upper bound attains `attained` (within the tie margin);
  // ties resolved to the larger mass, then the lower index
  int attaining_atom(const Vec& u, double attained, bool* tied) const {
    int best = -1;
    int within = 0;
    const Vec& m = env.masses();
    for (int j = 0; j < u.size(); ++j) {
      if (std::abs(u[j] - attained) <= kTieMargin) {
        ++within;
        if (best < 0 || m[j] > m[best]) best = j;
      }
    }
    if (tied) *tied = within > 1;
    if (best < 0) {
      // fp drift between the sort-based VaR and raw values; fall back
      // to the nearest atom
      (u.array() - attained).abs().minCoeff(&best);
      if (tied) *tied = false;
    }
    return best;
  }

  AcqGrad grad_at(const Vec& x, bool use_min) const {
    Vec l, u;
    field.bounds_at_atoms(pred, x, l, u);
    const double attained =
        use_min ? u.minCoeff() : var_discrete(u, env.masses(), alpha);
    AcqGrad out;
    const int j = attaining_atom(u, attained, &out.degenerate);
    Vec p(x.size() + env.atoms().cols());
    p << x, env.atoms().row(j).transpose();
    const Gradient g = field.posterior->predict_grad_x(p);
    out.grad = g.dmu + std::sqrt(field.beta) * g.dsigma;
    return out;
  }
};

struct MaximizeResult {
  Vec x;
  double value;
};

// Sweep + multi-start projected gradient ascent. With a finite
// candidate set the sweep is the whole search.
template <typename ValueFn, typename GradFn>
MaximizeResult maximize_over_box(const ValueFn& value_fn, const GradFn& grad_fn,
                                 const Box& domain, const OptimKnobs& knobs,
                                 Rng& rng,
                                 const std::optional<Mat>& candidates) {
  Mat sweep = candidates ? *candidates
                         : halton_points(knobs.sweep_points, domain);
  const int m = static_cast<int>(sweep.rows());
  Vec vals(m);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    vals[i] = value_fn(sweep.row(i).transpose());
  }
  int best_i = 0;
  vals.maxCoeff(&best_i);
  MaximizeResult best{sweep.row(best_i).transpose(), vals[best_i]};
  if (candidates) return best;

  for (int s = 0; s < knobs.multistart; ++s) {
    Vec x = s == 0 ? best.x : domain.sample(rng);
    double fx = s == 0 ? best.value : value_fn(x);
    double step = knobs.step;
    for (int it = 0; it < knobs.ascent_steps; ++it) {
      const Vec g = grad_fn(x);
      if (g.cwiseAbs().maxCoeff() < 1e-12) break;
      bool moved = false;
      double st = step;
      for (int half = 0; half < 6; ++half) {
        const Vec xt = domain.clamp(x + st * g);
        const double ft = value_fn(xt);
        if (ft > fx + 1e-12 * std::abs(fx)) {
          x = xt;
          fx = ft;
          step = std::min(st * 1.3, 4.0 * knobs.step);
          moved = true;
          break;
        }
        st *= 0.5;
      }
      if (!moved) break;
    }
    if (fx > best.value) best = {x, fx};
  }
  return best;
}

}  // namespace

double acq_value(const AcquisitionProblem& prob, const Vec& x) {
  if (prob.env->kind() != EnvKind::Discrete) {
    throw std::invalid_argument("acq_value: exact path needs discrete Z");
  }
  AcqEval eval(prob);
  return eval.value(x);
}

Vec acq_values_batch(const AcquisitionProblem& prob, const Mat& xs) {
  AcqEval eval(prob);
  const int m = static_cast<int>(xs.rows());
  Vec out(m);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    out[i] = eval.value(xs.row(i).transpose());
  }
  return out;
}

Vec acq_values_batch_serial(const AcquisitionProblem& prob, const Mat& xs) {
  AcqEval eval(prob);
  const int m = static_cast<int>(xs.rows());
  Vec out(m);
  for (int i = 0; i < m; ++i) {
    out[i] = eval.value(xs.row(i).transpose());
  }
  return out;
}

AcqGrad acq_grad(const AcquisitionProblem& prob, const Vec& x) {
  if (prob.env->kind() != EnvKind::Discrete) {
    throw std::invalid_argument("acq_grad: exact path needs discrete Z");
  }
  AcqEval eval(prob);
  return eval.grad_at(x, /*use_min=*/false);
}

Vec select_x(const AcquisitionProblem& prob, Rng& rng) {
  if (prob.env->kind() == EnvKind::Continuous) {
    const ConfidenceField& field = prob.field;
    TargetFn upper = [&field](const Vec& x, const Vec& z) {
      Vec p(x.size() + z.size());
      p << x, z;
      return field.bounds_at(p).hi;
    };
    const Vec x0 = prob.domain.sample(rng);
    return lnso_maximize(upper, *prob.env, prob.alpha, prob.domain, x0,
                         prob.lnso, rng)
        .x;
  }
  AcqEval eval(prob);
  auto value_fn = [&eval](const Vec& x) { return eval.value(x); };
  auto grad_fn = [&eval](const Vec& x) {
    return eval.grad_at(x, /*use_min=*/false).grad;
  };
  return maximize_over_box(value_fn, grad_fn, prob.domain, prob.knobs, rng,
                           prob.x_candidates)
      .x;
}

StableOptResult stableopt_select(const ConfidenceField& field,
                                 const Box& domain_x, const Mat& z_atoms,
                                 const OptimKnobs& knobs, Rng& rng,
                                 const std::optional<Mat>& x_candidates) {
  AtomPredictor pred(*field.posterior, z_atoms);
  auto value_fn = [&](const Vec& x) {
    Vec l, u;
    field.bounds_at_atoms(pred, x, l, u);
    return u.minCoeff();
  };
  auto grad_fn = [&](const Vec& x) {
    Vec l, u;
    field.bounds_at_atoms(pred, x, l, u);
    const double attained = u.minCoeff();
    // same near-tie resolution as the VaR route (uniform mass ties fall
    // back to the lowest index)
    int best = -1;
    for (int j = 0; j < u.size(); ++j) {
      if (std::abs(u[j] - attained) <= kTieMargin && best < 0) best = j;
    }
    Vec p(x.size() + z_atoms.cols());
    p << x, z_atoms.row(best).transpose();
    const Gradient g = field.posterior->predict_grad_x(p);
    return (g.dmu + std::sqrt(field.beta) * g.dsigma).eval();
  };
  const MaximizeResult r = maximize_over_box(value_fn, grad_fn, domain_x,
                                             knobs, rng, x_candidates);
  StableOptResult out;
  out.x = r.x;
  out.value = r.value;
  Vec l, u;
  field.bounds_at_atoms(pred, out.x, l, u);
  int zmin = 0;
  l.minCoeff(&zmin);
  out.z = z_atoms.row(zmin).transpose();
  return out;
}

}  // namespace riskbo
