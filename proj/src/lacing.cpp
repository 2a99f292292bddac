#include "riskbo/lacing.hpp"

#include <algorithm>
#include <cmath>

namespace riskbo {

namespace {
constexpr double kDiscreteSlack = 1e-9;

bool lex_less(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}
}  // namespace

std::vector<int> lv_candidate_indices(const Vec& l_vals, const Vec& u_vals,
                                      const Vec& masses, double alpha) {
  const double var_l = var_discrete(l_vals, masses, alpha);
  const double var_u = var_discrete(u_vals, masses, alpha);
  std::vector<int> out;
  for (int j = 0; j < l_vals.size(); ++j) {
    if (l_vals[j] <= var_l + kDiscreteSlack &&
        u_vals[j] >= var_u - kDiscreteSlack) {
      out.push_back(j);
    }
  }
  return out;
}

std::vector<int> lv_candidates_discrete(const ConfidenceField& field,
                                        const Vec& x,
                                        const EnvDistribution& env,
                                        double alpha) {
  AtomPredictor pred(*field.posterior, env.atoms());
  Vec l, u;
  field.bounds_at_atoms(pred, x, l, u);
  std::vector<int> out = lv_candidate_indices(l, u, env.masses(), alpha);
  if (out.empty()) {
    throw std::logic_error(
        "lv_candidates_discrete: empty candidate set; existence is "
        "guaranteed, so the VaR computation is inconsistent");
  }
  return out;
}

int select_lv_index(const std::vector<int>& candidates,
                    const EnvDistribution& env, LvMode mode, Rng& rng) {
  if (candidates.empty()) {
    throw std::invalid_argument("select_lv: empty candidate set");
  }
  if (mode == LvMode::Uniform) {
    return candidates[uniform_index(rng, candidates.size())];
  }
  const Vec& m = env.masses();
  int best = candidates[0];
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const int c = candidates[i];
    if (m[c] > m[best] ||
        (m[c] == m[best] && lex_less(env.atoms().row(c), env.atoms().row(best)))) {
      best = c;
    }
  }
  return best;
}

Vec select_lv(const std::vector<int>& candidates, const EnvDistribution& env,
              LvMode mode, Rng& rng) {
  return env.atoms().row(select_lv_index(candidates, env, mode, rng))
      .transpose();
}

namespace {

struct BandEval {
  const ConfidenceField* field;
  const Vec* x;

  Interval bounds(const Vec& z) const {
    Vec p(x->size() + z.size());
    p << *x, z;
    return field->bounds_at(p);
  }
  // joint-gradient z-blocks of l and u
  void grads(const Vec& z, Vec& dl, Vec& du) const {
    Vec p(x->size() + z.size());
    p << *x, z;
    const Gradient g = field->posterior->predict_grad(p);
    const double rb = std::sqrt(field->beta);
    const int dx = static_cast<int>(x->size());
    const int dz = static_cast<int>(z.size());
    dl = g.dmu.segment(dx, dz) - rb * g.dsigma.segment(dx, dz);
    du = g.dmu.segment(dx, dz) + rb * g.dsigma.segment(dx, dz);
  }
};

}  // namespace

double lv_loss(const Vec& z, const ConfidenceField& field, const Vec& x,
               const VarEndpoints& ep) {
  BandEval be{&field, &x};
  const Interval b = be.bounds(z);
  const double d_u = b.hi - ep.var_upper;
  const double d_l = ep.var_lower - b.lo;
  return std::max(-d_u, 0.0) + std::max(-d_l, 0.0);
}

LVResult find_lv_continuous(const ConfidenceField& field, const Vec& x,
                            const EnvDistribution& env, double alpha,
                            const PinballConfig& pinball,
                            const LvSearchConfig& cfg, Rng& rng) {
  if (env.kind() != EnvKind::Continuous) {
    throw std::invalid_argument("find_lv_continuous: env must be continuous");
  }
  VarEndpoints ep;
  ep.var_lower =
      var_of_bound(field, x, BoundSide::Lower, env, alpha, pinball, rng);
  ep.var_upper =
      var_of_bound(field, x, BoundSide::Upper, env, alpha, pinball, rng);
  const Box& box = env.support();
  BandEval be{&field, &x};

  auto deficits = [&](const Vec& z, double& d_u, double& d_l) {
    const Interval b = be.bounds(z);
    d_u = b.hi - ep.var_upper;
    d_l = ep.var_lower - b.lo;
  };
  auto loss_of = [&](double d_u, double d_l) {
    return std::max(-d_u, 0.0) + std::max(-d_l, 0.0);
  };

  LVResult best;
  bool have_best = false;
  double best_loss = std::numeric_limits<double>::infinity();
  double best_weight = -1.0;

  for (int s = 0; s < cfg.starts; ++s) {
    Vec z = env.sample_one(rng);
    double d_u, d_l;
    deficits(z, d_u, d_l);
    double loss = loss_of(d_u, d_l);

    // hinge phase: plain subgradient steps with backtracking
    double step = cfg.step;
    for (int it = 0; it < cfg.hinge_steps && loss > cfg.tol; ++it) {
      Vec dl, du;
      be.grads(z, dl, du);
      Vec g = Vec::Zero(z.size());
      if (d_u < 0.0) g += du;   // raise u
      if (d_l < 0.0) g -= dl;   // lower l
      if (g.cwiseAbs().maxCoeff() < 1e-14) break;
      bool moved = false;
      double s2 = step;
      for (int half = 0; half < 8; ++half) {
        Vec zt = box.clamp(z + s2 * g);
        double tu, tl;
        deficits(zt, tu, tl);
        const double lt = loss_of(tu, tl);
        if (lt < loss) {
          z = zt;
          d_u = tu;
          d_l = tl;
          loss = lt;
          step = std::min(s2 * 1.5, 4.0 * cfg.step);
          moved = true;
          break;
        }
        s2 *= 0.5;
      }
      if (!moved) break;
    }

    // density phase: the truncated Gaussian's density increases
    // monotonically along the segment toward its mode, so ascend that
    // segment, backtracking whenever certification would be lost
    if (loss <= cfg.tol) {
      const Vec target = env.mode();
      for (int it = 0; it < cfg.density_steps; ++it) {
        if ((z - target).cwiseAbs().maxCoeff() < 1e-12) break;
        bool moved = false;
        double f = 1.0;
        for (int half = 0; half < 10; ++half) {
          const Vec zt = box.clamp(z + f * (target - z));
          double tu, tl;
          deficits(zt, tu, tl);
          if (tu >= -0.5 * cfg.tol && tl >= -0.5 * cfg.tol) {
            z = zt;
            d_u = tu;
            d_l = tl;
            loss = loss_of(tu, tl);
            moved = true;
            break;
          }
          f *= 0.5;
        }
        if (!moved) break;
      }
    }

    const double w = env.mass_or_density(z);
    const bool certified = loss <= cfg.tol;
    const bool better =
        certified ? (best_loss > cfg.tol || w > best_weight)
                  : (!have_best || (best_loss > cfg.tol && loss < best_loss));
    if (better) {
      best.z = z;
      best.certified = certified;
      best.d_u = d_u;
      best.d_l = d_l;
      best.weight = w;
      best_loss = loss;
      best_weight = w;
      have_best = true;
    }
  }
  return best;
}

}  // namespace riskbo
