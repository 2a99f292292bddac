#include "riskbo/loop.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace riskbo {

std::string algo_name(Algo a) {
  switch (a) {
    case Algo::VucbUnif: return "vucb-unif";
    case Algo::VucbProb: return "vucb-prob";
    case Algo::StableOpt: return "stableopt";
    case Algo::Random: return "random";
    case Algo::EnvSampled: return "env-sampled";
  }
  throw std::logic_error("algo_name: bad enum");
}

Algo algo_from_name(const std::string& name) {
  if (name == "vucb-unif") return Algo::VucbUnif;
  if (name == "vucb-prob") return Algo::VucbProb;
  if (name == "stableopt") return Algo::StableOpt;
  if (name == "random") return Algo::Random;
  if (name == "env-sampled") return Algo::EnvSampled;
  throw std::invalid_argument(
      "unknown algorithm '" + name +
      "' (valid: vucb-unif, vucb-prob, stableopt, random, env-sampled)");
}

double RunTrace::lv_hit_rate() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& it : iters) {
    if (std::isfinite(it.lv_hit)) {
      sum += it.lv_hit;
      ++n;
    }
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

namespace {

int atom_index_of(const EnvDistribution& env, const Vec& z) {
  const Mat& atoms = env.atoms();
  for (int i = 0; i < atoms.rows(); ++i) {
    if ((atoms.row(i).transpose() - z).cwiseAbs().maxCoeff() <= 1e-12) {
      return i;
    }
  }
  return -1;
}

// V_alpha of the posterior mean over Z at each row's x; panel is the
// atom set (discrete) or a fixed quasi-random draw (continuous).
Vec mean_var_scan(const GPPosterior& post, const Mat& xs,
                  const EnvDistribution& env, double alpha, int z_panel) {
  Mat panel;
  Vec masses;
  if (env.kind() == EnvKind::Discrete) {
    panel = env.atoms();
    masses = env.masses();
  } else {
    panel = env.quasi_sample(z_panel);
    masses = Vec::Constant(panel.rows(), 1.0 / double(panel.rows()));
  }
  AtomPredictor pred(post, panel);
  Vec out(xs.rows());
  Vec mu, sigma;
  for (int i = 0; i < xs.rows(); ++i) {
    pred.predict(xs.row(i).transpose(), mu, sigma);
    out[i] = var_discrete(mu, masses, alpha);
  }
  return out;
}

struct LoopState {
  ObservationSet data;
  GPHyper hyper;
};

void initial_design(const RunConfig& cfg, Rng& rng, LoopState& st,
                    RunTrace& trace) {
  const Problem& p = cfg.problem;
  st.data = ObservationSet(p.d_x, p.d_z);
  trace.init_x.resize(cfg.n_init, p.d_x);
  trace.init_z.resize(cfg.n_init, p.d_z);
  trace.init_y.resize(cfg.n_init);
  for (int i = 0; i < cfg.n_init; ++i) {
    Vec x = p.x_grid ? p.x_grid->row(uniform_index(rng, p.x_grid->rows()))
                           .transpose()
                           .eval()
                     : p.domain.sample(rng);
    Vec z;
    if (p.env.kind() == EnvKind::Discrete) {
      z = p.env.atoms()
              .row(uniform_index(rng, p.env.atoms().rows()))
              .transpose();
    } else {
      z = p.env.sample_one(rng);
    }
    const double y = noisy_eval(p, x, z, rng);
    trace.init_x.row(i) = x.transpose();
    trace.init_z.row(i) = z.transpose();
    trace.init_y[i] = y;
    st.data.append(x, z, y);
  }
}

}  // namespace

double lv_hit_fraction(const ConfidenceField& field, const Vec& x,
                       const EnvDistribution& env, double alpha,
                       const Mat& z_draws) {
  const std::vector<int> cands = lv_candidates_discrete(field, x, env, alpha);
  std::vector<char> is_cand(env.atoms().rows(), 0);
  for (int c : cands) is_cand[c] = 1;
  int hits = 0;
  for (int i = 0; i < z_draws.rows(); ++i) {
    const int idx = atom_index_of(env, z_draws.row(i).transpose());
    if (idx >= 0 && is_cand[idx]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(z_draws.rows());
}

Vec recommend(const RunTrace& trace, const GPPosterior& post,
              RecommendMode mode, const EnvDistribution& env, double alpha,
              int z_panel) {
  if (mode == RecommendMode::LcbMax) {
    if (trace.iters.empty()) {
      throw std::invalid_argument("recommend: empty trace");
    }
    int best = 0;
    for (std::size_t i = 1; i < trace.iters.size(); ++i) {
      if (trace.iters[i].var_lo > trace.iters[best].var_lo) {
        best = static_cast<int>(i);
      }
    }
    return trace.iters[best].x;
  }
  const ObservationSet& data = post.data();
  if (data.size() == 0) throw std::invalid_argument("recommend: no data");
  Mat xs = data.joint.leftCols(data.d_x);
  const Vec scores = mean_var_scan(post, xs, env, alpha, z_panel);
  int best = 0;
  scores.maxCoeff(&best);
  return xs.row(best).transpose();
}

double metric(const Problem& p, const Vec& x_rec, double alpha) {
  return oracle_best(p, alpha).value - true_var(p, x_rec, alpha);
}

namespace {

RunTrace run_impl(const RunConfig& cfg, Rng& rng, int env_draws) {
  const Problem& p = cfg.problem;
  if (cfg.iterations < 1 || cfg.n_init < 1) {
    throw std::invalid_argument("run: iterations >= 1 and n_init >= 1");
  }
  if (cfg.algo == Algo::EnvSampled && p.env.kind() != EnvKind::Discrete) {
    throw std::invalid_argument("env-sampled mode needs discrete Z");
  }
  const bool discrete = p.env.kind() == EnvKind::Discrete;

  RunTrace trace;
  LoopState st;
  st.hyper = cfg.hyper0.dim() == p.d_x + p.d_z
                 ? cfg.hyper0
                 : GPHyper::defaults(p.d_x + p.d_z);
  trace.hyper0 = st.hyper;
  initial_design(cfg, rng, st, trace);

  for (int t = 1; t <= cfg.iterations; ++t) {
    IterRecord rec;
    rec.t = t;
    rec.refit = cfg.refit_every > 0 && (t - 1) % cfg.refit_every == 0;
    if (rec.refit) {
      const HyperFit fit =
          fit_hyperparams(st.data, cfg.hyper_restarts, cfg.hyper_bounds,
                          st.hyper, rng, /*standardize_y=*/true);
      st.hyper = fit.hyper;
    }
    rec.hyper = st.hyper;
    auto post = std::make_shared<const GPPosterior>(
        fit_posterior(st.data, st.hyper, /*standardize_y=*/true));
    rec.beta = cfg.beta.beta(t);
    ConfidenceField field{post, rec.beta};

    AcquisitionProblem prob;
    prob.field = field;
    prob.env = &p.env;
    prob.alpha = p.alpha;
    prob.domain = p.domain;
    prob.knobs = cfg.knobs;
    prob.x_candidates = p.x_grid;
    prob.pinball = cfg.pinball;
    prob.lnso = cfg.lnso;

    Vec x_t, z_t;
    switch (cfg.algo) {
      case Algo::VucbUnif:
      case Algo::VucbProb: {
        x_t = select_x(prob, rng);
        const LvMode mode =
            cfg.algo == Algo::VucbUnif ? LvMode::Uniform : LvMode::MaxMass;
        if (discrete) {
          const auto cands = lv_candidates_discrete(field, x_t, p.env, p.alpha);
          z_t = select_lv(cands, p.env, mode, rng);
          rec.lv_certified = true;
        } else {
          const LVResult lv = find_lv_continuous(
              field, x_t, p.env, p.alpha, cfg.pinball, cfg.lv_search, rng);
          z_t = lv.z;
          rec.lv_certified = lv.certified;
        }
        break;
      }
      case Algo::StableOpt: {
        const StableOptResult r =
            stableopt_select(field, p.domain, p.env.atoms(), cfg.knobs, rng,
                             p.x_grid);
        x_t = r.x;
        z_t = r.z;
        const auto cands = lv_candidates_discrete(field, x_t, p.env, p.alpha);
        const int idx = atom_index_of(p.env, z_t);
        rec.lv_certified =
            std::find(cands.begin(), cands.end(), idx) != cands.end();
        break;
      }
      case Algo::Random: {
        x_t = p.x_grid ? p.x_grid->row(uniform_index(rng, p.x_grid->rows()))
                             .transpose()
                             .eval()
                       : p.domain.sample(rng);
        if (discrete) {
          const int idx = uniform_index(rng, p.env.atoms().rows());
          z_t = p.env.atoms().row(idx).transpose();
          const auto cands =
              lv_candidates_discrete(field, x_t, p.env, p.alpha);
          rec.lv_certified =
              std::find(cands.begin(), cands.end(), idx) != cands.end();
        } else {
          z_t = p.env.support().sample(rng);
          rec.lv_certified = false;
        }
        break;
      }
      case Algo::EnvSampled: {
        x_t = select_x(prob, rng);
        const Mat draws = p.env.sample(env_draws, rng);
        rec.lv_hit = lv_hit_fraction(field, x_t, p.env, p.alpha, draws);
        z_t = draws.row(0).transpose();
        const auto cands = lv_candidates_discrete(field, x_t, p.env, p.alpha);
        rec.lv_certified = std::find(cands.begin(), cands.end(),
                                     atom_index_of(p.env, z_t)) != cands.end();
        break;
      }
    }

    rec.x = x_t;
    rec.z = z_t;
    Vec joint(p.d_x + p.d_z);
    joint << x_t, z_t;
    rec.sigma_before = post->predict(joint).sigma;
    const VaRInterval vi =
        var_interval(field, x_t, p.env, p.alpha, cfg.pinball, rng);
    rec.var_lo = vi.lo;
    rec.var_hi = vi.hi;
    rec.y = noisy_eval(p, x_t, z_t, rng);
    st.data.append(x_t, z_t, rec.y);

    if (cfg.track_metric) {
      const GPPosterior post_now =
          fit_posterior(st.data, st.hyper, /*standardize_y=*/true);
      rec.x_rec = recommend(trace, post_now, cfg.recommend, p.env, p.alpha,
                            cfg.recommend_z_panel);
      rec.metric = metric(p, rec.x_rec, p.alpha);
    }
    trace.iters.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace

RunTrace run_vucb(const RunConfig& cfg, Rng& rng) {
  if (cfg.algo == Algo::EnvSampled) {
    return run_impl(cfg, rng, cfg.env_sample_count);
  }
  return run_impl(cfg, rng, 0);
}

RunTrace run_env_sampled(const RunConfig& cfg, int n_z_per_iter, Rng& rng) {
  RunConfig c = cfg;
  c.algo = Algo::EnvSampled;
  return run_impl(c, rng, std::max(n_z_per_iter, 1));
}

int RegretReport::count(IterCertificate::Status s) const {
  int n = 0;
  for (const auto& it : iters) {
    if (it.status == s) ++n;
  }
  return n;
}

double empirical_information_gain(const ObservationSet& data,
                                  const GPHyper& hyper) {
  const int n = data.size();
  if (n == 0) return 0.0;
  Mat k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      k(i, j) = se_kernel(data.joint.row(i).transpose(),
                          data.joint.row(j).transpose(), hyper);
    }
  }
  Mat a = Mat::Identity(n, n) + k / hyper.noise_var;
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError(llt.matrixLLT().diagonal().minCoeff());
  }
  return Mat(llt.matrixL()).diagonal().array().log().sum();
}

RegretReport certify_regret(const RunTrace& trace, const Problem& problem,
                            const Mat& x_ref_grid,
                            std::optional<double> gamma_user) {
  if (problem.env.kind() != EnvKind::Discrete) {
    throw std::invalid_argument("certify_regret: discrete Z required");
  }
  const OracleBest oracle = oracle_best(problem, problem.alpha);
  RegretReport report;

  ObservationSet data(problem.d_x, problem.d_z);
  for (int i = 0; i < trace.init_y.size(); ++i) {
    data.append(trace.init_x.row(i).transpose(),
                trace.init_z.row(i).transpose(), trace.init_y[i]);
  }
  GPHyper hyper = trace.hyper0;

  for (const IterRecord& rec : trace.iters) {
    if (rec.refit) hyper = rec.hyper;
    const GPPosterior post =
        fit_posterior(data, hyper, /*standardize_y=*/true);
    const ConfidenceField field{
        std::shared_ptr<const GPPosterior>(&post, [](const GPPosterior*) {}),
        rec.beta};

    bool event = true;
    AtomPredictor pred(post, problem.env.atoms());
    Vec l, u;
    for (int g = 0; g < x_ref_grid.rows() && event; ++g) {
      const Vec xg = x_ref_grid.row(g).transpose();
      field.bounds_at_atoms(pred, xg, l, u);
      for (int j = 0; j < problem.env.atoms().rows(); ++j) {
        const double f =
            problem.objective(xg, problem.env.atoms().row(j).transpose());
        if (f < l[j] - 1e-9 || f > u[j] + 1e-9) {
          event = false;
          break;
        }
      }
    }

    IterCertificate cert;
    cert.regret = oracle.value - true_var(problem, rec.x, problem.alpha);
    Vec joint(problem.d_x + problem.d_z);
    joint << rec.x, rec.z;
    cert.bound = 2.0 * std::sqrt(rec.beta) * post.predict(joint).sigma;
    if (!event) {
      cert.status = IterCertificate::Status::EventViolated;
    } else if (!rec.lv_certified) {
      cert.status = IterCertificate::Status::NotCertified;
    } else if (cert.regret <= cert.bound + 1e-6) {
      cert.status = IterCertificate::Status::Ok;
    } else {
      cert.status = IterCertificate::Status::BoundViolated;
    }
    report.cumulative_regret += cert.regret;
    report.iters.push_back(cert);
    report.beta_T = rec.beta;

    data.append(rec.x, rec.z, rec.y);
  }

  report.c1 = 8.0 / std::log(1.0 + 1.0 / problem.noise_var);
  if (gamma_user) {
    report.gamma = *gamma_user;
    report.gamma_is_empirical = false;
  } else {
    report.gamma = empirical_information_gain(data, hyper);
    report.gamma_is_empirical = true;
  }
  report.rt_bound = std::sqrt(report.c1 * trace.iters.size() * report.beta_T *
                              report.gamma);
  return report;
}

}  // namespace riskbo
