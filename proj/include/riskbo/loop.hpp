#pragma once

#include "riskbo/acquire.hpp"
#include "riskbo/bench.hpp"

namespace riskbo {

enum class RecommendMode { MeanVar, LcbMax };
enum class Algo { VucbUnif, VucbProb, StableOpt, Random, EnvSampled };

std::string algo_name(Algo a);
Algo algo_from_name(const std::string& name);

struct RunConfig {
  Problem problem;
  Algo algo = Algo::VucbProb;
  int iterations = 60;
  int n_init = 3;
  BetaSchedule beta;
  int refit_every = 3;
  RecommendMode recommend = RecommendMode::MeanVar;
  OptimKnobs knobs;
  PinballConfig pinball;
  LnsoConfig lnso;
  LvSearchConfig lv_search;
  GPHyper hyper0;  // empty -> GPHyper::defaults(d_x + d_z)
  int hyper_restarts = 5;
  HyperBounds hyper_bounds;
  int env_sample_count = 100;  // draws per iteration in env-sampled mode
  bool track_metric = true;
  int recommend_z_panel = 1024;  // continuous-Z panel for the mean scan
};

struct IterRecord {
  int t = 0;
  Vec x, z;
  double y = 0.0;
  double beta = 0.0;
  double sigma_before = 0.0;  // posterior sd at (x_t, z_t) before the query
  double var_lo = 0.0;        // VaR interval at x_t under the pre-query field
  double var_hi = 0.0;
  bool lv_certified = false;
  Vec x_rec;
  double metric = std::numeric_limits<double>::quiet_NaN();
  bool refit = false;
  GPHyper hyper;  // hyperparameters in effect at this iteration
  double lv_hit = std::numeric_limits<double>::quiet_NaN();
};

struct RunTrace {
  Mat init_x, init_z;
  Vec init_y;
  GPHyper hyper0;
  std::vector<IterRecord> iters;

  double lv_hit_rate() const;  // mean of finite lv_hit entries
};

// Outer loop: optimistic x-selection, lacing-value (or mode-specific)
// z-selection, noisy observation, posterior update; hyperparameters
// refit on the configured cadence.
RunTrace run_vucb(const RunConfig& cfg, Rng& rng);

// z drawn from the environment instead of LV-selected; per iteration the
// fraction of `n_z_per_iter` draws landing in the LV candidate set is
// recorded and the first draw is queried. Discrete Z only.
RunTrace run_env_sampled(const RunConfig& cfg, int n_z_per_iter, Rng& rng);

// Fraction of the given draws that are LV candidates at x.
double lv_hit_fraction(const ConfidenceField& field, const Vec& x,
                       const EnvDistribution& env, double alpha,
                       const Mat& z_draws);

Vec recommend(const RunTrace& trace, const GPPosterior& post,
              RecommendMode mode, const EnvDistribution& env, double alpha,
              int z_panel = 1024);

// oracle optimum minus the achieved VaR at the recommendation (raw).
double metric(const Problem& p, const Vec& x_rec, double alpha);

struct IterCertificate {
  enum class Status { Ok, BoundViolated, EventViolated, NotCertified };
  Status status;
  double regret;
  double bound;  // 2 sqrt(beta_t) sigma_{t-1}(x_t, z_t)
};

struct RegretReport {
  std::vector<IterCertificate> iters;
  double c1 = 0.0;         // 8 / log(1 + sigma_n^{-2})
  double beta_T = 0.0;
  double gamma = 0.0;      // user estimate or empirical information gain
  bool gamma_is_empirical = true;
  double rt_bound = 0.0;   // sqrt(c1 T beta_T gamma)
  double cumulative_regret = 0.0;

  int count(IterCertificate::Status s) const;
};

// Replays the trace (exactly, from the stored design, queries and
// hyperparameter snapshots), verifies the band event on
// x_ref_grid x atoms per iteration, and checks the per-iteration regret
// bound where the event holds and z_t is a certified lacing value.
RegretReport certify_regret(const RunTrace& trace, const Problem& problem,
                            const Mat& x_ref_grid,
                            std::optional<double> gamma_user = {});

// Empirical information gain 0.5 log det(I + sn^{-2} K) of the queried set.
double empirical_information_gain(const ObservationSet& data,
                                  const GPHyper& hyper);

}  // namespace riskbo
