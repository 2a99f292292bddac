#include "riskbo/risk.hpp"

#include <doctest.h>

#include "test_util.hpp"

#include <cmath>

using namespace riskbo;
using namespace riskbo::testutil;

namespace {

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("discrete var walks the cdf") {
  const Vec values = vec3(1.0, 2.0, 3.0);
  const Vec uni = Vec::Constant(3, 1.0 / 3.0);
  // uniform over three atoms at alpha=0.4 selects the second-smallest
  CHECK(var_discrete(values, uni, 0.4) == 2.0);
  // P(<=2) = 2/3 < 0.9, so alpha=0.9 selects the largest
  CHECK(var_discrete(values, uni, 0.9) == 3.0);
  CHECK(var_discrete(Vec::Constant(1, 5.0), Vec::Ones(1), 0.3) == 5.0);
  CHECK(var_discrete(Vec::Constant(1, 5.0), Vec::Ones(1), 0.99) == 5.0);
  CHECK_THROWS_AS(var_discrete(values, uni, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(var_discrete(values, uni, 1.0), std::invalid_argument);
}

TEST_CASE("discrete var merges exact ties") {
  Vec values(4), masses(4);
  values << 2.0, 1.0, 2.0, 3.0;
  masses << 0.1, 0.2, 0.3, 0.4;
  // P(<=1)=0.2, P(<=2)=0.6 after merging the two atoms at 2
  CHECK(var_discrete(values, masses, 0.25) == 2.0);
  CHECK(var_discrete(values, masses, 0.6) == 2.0);
  CHECK(var_discrete(values, masses, 0.61) == 3.0);
}

TEST_CASE("discrete var agrees with the independent oracle") {
  Rng rng(13);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + int(uniform_index(rng, 12));
    std::vector<double> vals(n), ms(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      vals[i] = std::round(uniform_in(rng, -5, 5) * 4.0) / 4.0;
      ms[i] = uniform_in(rng, 0.05, 1.0);
      total += ms[i];
    }
    for (auto& m : ms) m /= total;
    const double alpha = uniform_in(rng, 0.02, 0.98);
    const double got = var_discrete(
        Eigen::Map<Vec>(vals.data(), n), Eigen::Map<Vec>(ms.data(), n), alpha);
    CHECK(got == doctest::Approx(quantile_oracle(vals, ms, alpha)));
  }
}

TEST_CASE("var monotone in values and in alpha, with the small-alpha limit") {
  Rng rng(37);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + int(uniform_index(rng, 10));
    Vec a(n), b(n), m(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      a[i] = uniform_in(rng, -3, 3);
      b[i] = a[i] + uniform_in(rng, 0.0, 2.0);  // b >= a elementwise
      m[i] = uniform_in(rng, 0.05, 1.0);
      total += m[i];
    }
    m /= total;
    const double alpha = uniform_in(rng, 0.02, 0.98);
    CHECK(var_discrete(a, m, alpha) <= var_discrete(b, m, alpha));
    const double alpha2 = uniform_in(rng, alpha, 0.99);
    CHECK(var_discrete(a, m, alpha) <= var_discrete(a, m, alpha2));
    // below the smallest atom mass the var is the minimum value
    const double tiny = 0.5 * m.minCoeff();
    CHECK(var_discrete(a, m, tiny) == a.minCoeff());
  }
}

TEST_CASE("pinball function values") {
  CHECK(pinball(0.0, 0.1) == 0.0);
  CHECK(pinball(2.0, 0.1) == doctest::Approx(0.2));
  CHECK(pinball(-2.0, 0.1) == doctest::Approx(1.8));
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    CHECK(pinball(uniform_in(rng, -5, 5), uniform_in(rng, 0.01, 0.99)) >= 0.0);
  }
}

TEST_CASE("pinball sgd finds the median of a symmetric law") {
  const auto env = EnvDistribution::truncated_gaussian(1);
  Rng rng(11);
  PinballConfig cfg;
  cfg.iters = 600;
  cfg.batch = 32;
  const double nu = estimate_var_pinball(
      [](const Vec& z) { return z[0]; }, env, 0.5, cfg, rng);
  CHECK(std::abs(nu - 0.5) < 0.01);
}

TEST_CASE("pinball sgd matches the normal quantile") {
  // effectively-untruncated standard normal shim (8 sd window)
  Box wide;
  wide.lo = Vec::Constant(1, -100.0);
  wide.hi = Vec::Constant(1, 100.0);
  const auto env = EnvDistribution::truncated_gaussian(
      Vec::Zero(1), Vec::Ones(1), 8.0, wide);
  Rng rng(17);
  PinballConfig cfg;
  cfg.batch = 64;
  cfg.iters = 1500;  // ~1e5 samples
  const double nu = estimate_var_pinball(
      [](const Vec& z) { return z[0]; }, env, 0.1, cfg, rng);
  CHECK(std::abs(nu - (-1.2815515655446004)) < 0.02);
}

TEST_CASE("pinball sgd matches the exact discrete var") {
  // alpha is redrawn until it clears every cumulative-mass boundary by
  // 0.02: at a boundary the exact var jumps by a whole atom gap while
  // the pinball minimizer interpolates, so no sample budget separates
  // the two sides
  Rng rng(23);
  PinballConfig cfg;
  cfg.batch = 64;
  cfg.iters = 3000;
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 3 + int(uniform_index(rng, 8));
    Mat atoms(n, 1);
    Vec masses(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      atoms(i, 0) = double(i) + uniform_in(rng, 0.0, 0.4);
      masses[i] = uniform_in(rng, 0.1, 1.0);
      total += masses[i];
    }
    masses /= total;
    const auto env = EnvDistribution::discrete(atoms, masses);
    Vec vals(n);
    for (int i = 0; i < n; ++i) vals[i] = std::sin(atoms(i, 0));
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return vals[a] < vals[b]; });
    double alpha = 0.0;
    for (int tries = 0; tries < 100; ++tries) {
      alpha = uniform_in(rng, 0.1, 0.9);
      double cum = 0.0, dmin = 1.0;
      for (int i : idx) {
        cum += masses[i];
        dmin = std::min(dmin, std::abs(cum - alpha));
      }
      if (dmin >= 0.02) break;
    }
    const double exact = var_discrete(vals, masses, alpha);
    const double nu = estimate_var_pinball(
        [&](const Vec& z) { return std::sin(z[0]); }, env, alpha, cfg, rng);
    const double range = vals.maxCoeff() - vals.minCoeff();
    CHECK(std::abs(nu - exact) <= 0.01 * range);
  }
}

TEST_CASE("pinball rejects non-finite values naming z") {
  const auto env = EnvDistribution::truncated_gaussian(1);
  Rng rng(29);
  PinballConfig cfg;
  cfg.iters = 10;
  CHECK_THROWS_WITH_AS(
      estimate_var_pinball(
          [](const Vec&) { return std::numeric_limits<double>::quiet_NaN(); },
          env, 0.5, cfg, rng),
      doctest::Contains("non-finite value at z"), std::runtime_error);
}

TEST_CASE("var of bound collapses at beta zero") {
  Rng rng(31);
  auto post = random_posterior(12, 1, 1, rng);
  const auto env = EnvDistribution::grid(1, 10, WeightRule::Uniform);
  ConfidenceField field{post, 0.0};
  Vec x(1);
  x << 0.3;
  PinballConfig cfg;
  const double lo = var_of_bound(field, x, BoundSide::Lower, env, 0.3, cfg, rng);
  const double hi = var_of_bound(field, x, BoundSide::Upper, env, 0.3, cfg, rng);
  CHECK(lo == doctest::Approx(hi));
  // equals VaR of the mean directly
  Vec mu(env.atom_count());
  for (int j = 0; j < env.atom_count(); ++j) {
    Vec p(2);
    p << x[0], env.atoms()(j, 0);
    mu[j] = post->predict(p).mu;
  }
  CHECK(lo == doctest::Approx(var_discrete(mu, env.masses(), 0.3)));
}

TEST_CASE("prior band shifts the var by the band half-width") {
  auto prior = std::make_shared<const GPPosterior>(
      ObservationSet(1, 1), GPHyper(Vec::Ones(2), 1.0, 0.01));
  ConfidenceField field{prior, 1.0};
  const auto env = EnvDistribution::grid(1, 7, WeightRule::GaussianBump);
  Vec x(1);
  x << 0.5;
  PinballConfig cfg;
  Rng rng(37);
  for (const double alpha : {0.1, 0.5, 0.9}) {
    const double lo = var_of_bound(field, x, BoundSide::Lower, env, alpha, cfg, rng);
    const double hi = var_of_bound(field, x, BoundSide::Upper, env, alpha, cfg, rng);
    CHECK(hi - lo == doctest::Approx(2.0));
  }
}

TEST_CASE("enlarging beta never decreases the upper var") {
  Rng rng(41);
  auto post = random_posterior(15, 1, 1, rng);
  const auto env = EnvDistribution::grid(1, 9, WeightRule::GaussianBump);
  Vec x(1);
  x << 0.7;
  PinballConfig cfg;
  double prev = -std::numeric_limits<double>::infinity();
  for (const double beta : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    ConfidenceField field{post, beta};
    const double hi = var_of_bound(field, x, BoundSide::Upper, env, 0.2, cfg, rng);
    CHECK(hi >= prev - 1e-12);
    prev = hi;
  }
}

TEST_CASE("var interval orders its endpoints") {
  Rng rng(43);
  for (int rep = 0; rep < 25; ++rep) {
    auto post = random_posterior(10, 1, 1, rng);
    const auto env = EnvDistribution::grid(1, 8, WeightRule::GaussianBump);
    ConfidenceField field{post, uniform_in(rng, 0.0, 9.0)};
    Vec x(1);
    x << uniform01(rng);
    PinballConfig cfg;
    const auto vi = var_interval(field, x, env, 0.15, cfg, rng);
    CHECK(vi.lo <= vi.hi);
  }
}

TEST_CASE("sandwich is an exact implication of pointwise containment") {
  Rng rng(47);
  const GPHyper hyper(Vec::Constant(2, 0.4), 1.0, 0.01);
  const auto env = EnvDistribution::grid(1, 30, WeightRule::Uniform);
  int checked = 0;
  for (int rep = 0; rep < 50; ++rep) {
    // sample f over the atoms at a fixed x, observe a few noisy values
    Mat joints(env.atom_count(), 2);
    const double x0 = uniform01(rng);
    for (int j = 0; j < env.atom_count(); ++j) {
      joints(j, 0) = x0;
      joints(j, 1) = env.atoms()(j, 0);
    }
    const Vec f = sample_prior_function(joints, hyper, rng);
    ObservationSet data(1, 1);
    for (int i = 0; i < 8; ++i) {
      const int pick = int(uniform_index(rng, env.atom_count()));
      data.append_joint(joints.row(pick).transpose(),
                        f[pick] + 0.1 * std_normal(rng));
    }
    auto post = std::make_shared<const GPPosterior>(data, hyper);
    ConfidenceField field{post, beta_practical(9)};
    AtomPredictor pred(*post, env.atoms());
    Vec l, u;
    Vec x(1);
    x << x0;
    field.bounds_at_atoms(pred, x, l, u);
    bool contained = true;
    for (int j = 0; j < env.atom_count(); ++j) {
      if (f[j] < l[j] || f[j] > u[j]) contained = false;
    }
    if (!contained) continue;
    ++checked;
    for (const double alpha : {0.1, 0.5, 0.9}) {
      const double vl = var_discrete(l, env.masses(), alpha);
      const double vf = var_discrete(f, env.masses(), alpha);
      const double vu = var_discrete(u, env.masses(), alpha);
      CHECK(vl <= vf);
      CHECK(vf <= vu);
    }
  }
  CHECK(checked > 20);  // the implication must actually fire
}
