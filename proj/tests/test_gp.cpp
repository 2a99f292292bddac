#include "riskbo/gp.hpp"

#include <doctest.h>

#include "test_util.hpp"

#include <cmath>

using namespace riskbo;
using namespace riskbo::testutil;

TEST_CASE("se kernel closed form") {
  const GPHyper h(Vec::Ones(2), 1.0, 0.01);
  Vec p(2), q(2);
  p << 0.0, 0.0;
  q << 1.0, 1.0;  // squared distance 2
  CHECK(se_kernel(p, p, h) == doctest::Approx(1.0));
  CHECK(se_kernel(p, q, h) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(se_kernel(p, q, h) == doctest::Approx(se_kernel(q, p, h)));
  Vec far(2);
  far << 100.0, 100.0;
  CHECK(se_kernel(p, far, h) < 1e-300);
}

TEST_CASE("single-observation posterior by hand") {
  // k(p,p)=1, sn2=1, y=2: mu = 1*(1+1)^{-1}*2 = 1, var = 1 - 1/2 = 1/2
  ObservationSet data(1, 1);
  Vec x(1), z(1);
  x << 0.3;
  z << 0.7;
  data.append(x, z, 2.0);
  const GPPosterior post(data, GPHyper(Vec::Ones(2), 1.0, 1.0));
  Vec p(2);
  p << 0.3, 0.7;
  const auto pr = post.predict(p);
  CHECK(pr.mu == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pr.sigma * pr.sigma == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("empty data gives the prior") {
  const GPPosterior post(ObservationSet(1, 1), GPHyper(Vec::Ones(2), 2.0, 0.01));
  Vec p(2);
  p << 0.1, 0.9;
  const auto pr = post.predict(p);
  CHECK(pr.mu == 0.0);
  CHECK(pr.sigma == doctest::Approx(std::sqrt(2.0)));
  const auto g = post.predict_grad_x(p);
  CHECK(g.dmu.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("duplicate inputs stay finite") {
  ObservationSet data(1, 1);
  Vec x(1), z(1);
  x << 0.5;
  z << 0.5;
  data.append(x, z, 1.0);
  data.append(x, z, -1.0);
  const GPPosterior post = fit_posterior(data, GPHyper::defaults(2));
  Vec p(2);
  p << 0.5, 0.5;
  const auto pr = post.predict(p);
  CHECK(std::isfinite(pr.mu));
  CHECK(std::isfinite(pr.sigma));
}

TEST_CASE("near-interpolation at observed points") {
  Rng rng(11);
  ObservationSet data(1, 1);
  for (int i = 0; i < 8; ++i) {
    Vec x(1), z(1);
    x << uniform01(rng);
    z << uniform01(rng);
    data.append(x, z, std::sin(3.0 * x[0]) + 0.5 * z[0]);
  }
  const GPPosterior post(data, GPHyper(Vec::Constant(2, 0.3), 1.0, 1e-4));
  for (int i = 0; i < data.size(); ++i) {
    const auto pr = post.predict(data.joint.row(i).transpose());
    CHECK(std::abs(pr.mu - data.y[i]) <= 0.05);
  }
}

TEST_CASE("far from data the prior takes over") {
  Rng rng(3);
  ObservationSet data(1, 1);
  Vec x(1), z(1);
  x << 0.0;
  z << 0.0;
  data.append(x, z, 1.7);
  const GPHyper h(Vec::Constant(2, 0.05), 1.0, 0.01);
  const GPPosterior post(data, h);
  Vec p(2);
  p << 1.0, 1.0;  // 20 lengthscales away on either axis
  const auto pr = post.predict(p);
  CHECK(std::abs(pr.mu) < 1e-3);
  CHECK(std::abs(pr.sigma - 1.0) < 1e-3);
}

TEST_CASE("predict matches a dense linear solve") {
  Rng rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 5 + int(uniform_index(rng, 46));
    const auto data = random_observations(n, 1, 1, rng);
    const auto hyper = random_hyper(2, rng);
    const GPPosterior post(data, hyper);
    // brute force: explicit inverse of K + sn2 I
    Mat a(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        a(i, j) = se_kernel(data.joint.row(i).transpose(),
                            data.joint.row(j).transpose(), hyper);
      }
    }
    a.diagonal().array() += hyper.noise_var;
    const Mat ainv = a.inverse();
    for (int rep2 = 0; rep2 < 5; ++rep2) {
      Vec p(2);
      p << uniform01(rng), uniform01(rng);
      Vec k(n);
      for (int i = 0; i < n; ++i) {
        k[i] = se_kernel(data.joint.row(i).transpose(), p, hyper);
      }
      const double mu_ref = k.dot(ainv * data.y);
      const double var_ref = hyper.signal_var - k.dot(ainv * k);
      const auto pr = post.predict(p);
      CHECK(pr.mu == doctest::Approx(mu_ref).epsilon(1e-8));
      CHECK(pr.sigma * pr.sigma ==
            doctest::Approx(std::max(var_ref, 0.0)).epsilon(1e-8));
    }
  }
}

TEST_CASE("posterior variance non-increasing in data") {
  Rng rng(29);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 3 + int(uniform_index(rng, 15));
    auto data = random_observations(n, 1, 1, rng);
    const auto hyper = random_hyper(2, rng);
    const GPPosterior before(data, hyper);
    Vec p(2);
    p << uniform01(rng), uniform01(rng);
    const double var_before = std::pow(before.predict(p).sigma, 2);
    Vec x(1), z(1);
    x << uniform01(rng);
    z << uniform01(rng);
    data.append(x, z, std_normal(rng));
    const GPPosterior after(data, hyper);
    const double var_after = std::pow(after.predict(p).sigma, 2);
    CHECK(var_after <= var_before + 1e-9);
  }
}

TEST_CASE("gradients match finite differences") {
  Rng rng(41);
  const double h = 1e-5;
  int degenerate_seen = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto post = random_posterior(4 + int(uniform_index(rng, 20)), 2, 1, rng);
    Vec p(3);
    p << uniform01(rng), uniform01(rng), uniform01(rng);
    const auto g = post->predict_grad(p);
    if (g.sigma_degenerate) {
      ++degenerate_seen;
      continue;
    }
    for (int a = 0; a < 3; ++a) {
      Vec pp = p, pm = p;
      pp[a] += h;
      pm[a] -= h;
      const auto fp = post->predict(pp);
      const auto fm = post->predict(pm);
      CHECK(std::abs(g.dmu[a] - (fp.mu - fm.mu) / (2 * h)) < 1e-4);
      CHECK(std::abs(g.dsigma[a] - (fp.sigma - fm.sigma) / (2 * h)) < 1e-4);
    }
  }
  CHECK(degenerate_seen < 50);
}

TEST_CASE("grad_x slices the joint gradient and is zero by symmetry") {
  // two symmetric observations, query on the symmetry axis
  ObservationSet data(1, 1);
  Vec xa(1), xb(1), z(1);
  xa << 0.2;
  xb << 0.8;
  z << 0.5;
  data.append(xa, z, 1.0);
  data.append(xb, z, 1.0);
  const GPPosterior post(data, GPHyper::defaults(2));
  Vec p(2);
  p << 0.5, 0.5;
  const auto g = post.predict_grad_x(p);
  REQUIRE(g.dmu.size() == 1);
  CHECK(std::abs(g.dmu[0]) < 1e-12);
}

TEST_CASE("prior draws stay inside five posterior sigmas") {
  Rng rng(53);
  const GPHyper hyper(Vec::Constant(2, 0.4), 1.0, 0.01);
  int inside = 0, total = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Mat pts(8, 2);
    for (int i = 0; i < 8; ++i) {
      pts(i, 0) = uniform01(rng);
      pts(i, 1) = uniform01(rng);
    }
    const Vec f = sample_prior_function(pts, hyper, rng);
    ObservationSet data(1, 1);
    for (int i = 0; i < 5; ++i) {
      data.append_joint(pts.row(i).transpose(),
                        f[i] + 0.1 * std_normal(rng));
    }
    const GPPosterior post(data, hyper);
    for (int i = 0; i < 8; ++i) {
      const auto pr = post.predict(pts.row(i).transpose());
      ++total;
      if (std::abs(f[i] - pr.mu) <= 5.0 * (pr.sigma + 1e-6)) ++inside;
    }
  }
  CHECK(double(inside) / double(total) >= 0.99);
}

TEST_CASE("log marginal likelihood scalar case") {
  // n=1, k(p,p)=1, sn2=1, y=0: value = -1/2 log 2 - 1/2 log 2pi
  ObservationSet data(1, 1);
  Vec x(1), z(1);
  x << 0.4;
  z << 0.6;
  data.append(x, z, 0.0);
  const auto lm = log_marginal_likelihood(data, GPHyper(Vec::Ones(2), 1.0, 1.0));
  CHECK(lm.value ==
        doctest::Approx(-0.5 * std::log(2.0) - 0.5 * std::log(2.0 * M_PI))
            .epsilon(1e-12));
}

TEST_CASE("zero targets kill the data-fit term") {
  ObservationSet data(1, 1);
  Rng rng(61);
  for (int i = 0; i < 6; ++i) {
    Vec x(1), z(1);
    x << uniform01(rng);
    z << uniform01(rng);
    data.append(x, z, 0.0);
  }
  // with y = 0 only the determinant term remains:
  // value = -sum log L_ii - n/2 log 2pi
  for (const double ls : {0.2, 0.9}) {
    const GPHyper h(Vec::Constant(2, ls), 1.0, 0.01);
    const auto lm = log_marginal_likelihood(data, h);
    const GPPosterior post(data, h);
    const double det_term =
        -Mat(post.chol_lower()).diagonal().array().log().sum() -
        0.5 * data.size() * std::log(2.0 * M_PI);
    CHECK(lm.value == doctest::Approx(det_term).epsilon(1e-12));
  }
}

TEST_CASE("log marginal gradient matches finite differences") {
  Rng rng(71);
  for (int rep = 0; rep < 12; ++rep) {
    const int n = 4 + int(uniform_index(rng, 12));
    const auto data = random_observations(n, 1, 1, rng);
    const auto hyper = random_hyper(2, rng);
    const auto lm = log_marginal_likelihood(data, hyper);
    Vec theta(4);
    theta << hyper.lengthscales.array().log(), std::log(hyper.signal_var),
        std::log(hyper.noise_var);
    const double h = 1e-6;
    for (int a = 0; a < 4; ++a) {
      Vec tp = theta, tm = theta;
      tp[a] += h;
      tm[a] -= h;
      auto make = [&](const Vec& t) {
        return GPHyper(t.head(2).array().exp(), std::exp(t[2]),
                       std::exp(t[3]));
      };
      const double fd = (log_marginal_likelihood(data, make(tp)).value -
                         log_marginal_likelihood(data, make(tm)).value) /
                        (2 * h);
      const double rel = std::abs(lm.grad[a] - fd) /
                         std::max(1.0, std::abs(fd));
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("hyperparameter recovery on synthetic draws") {
  Rng rng(83);
  const GPHyper truth(Vec::Constant(2, 0.2), 1.0, 0.01);
  Mat pts(200, 2);
  for (int i = 0; i < 200; ++i) {
    pts(i, 0) = uniform01(rng);
    pts(i, 1) = uniform01(rng);
  }
  const Vec f = sample_prior_function(pts, truth, rng);
  ObservationSet data(1, 1);
  for (int i = 0; i < 200; ++i) {
    data.append_joint(pts.row(i).transpose(), f[i] + 0.1 * std_normal(rng));
  }
  const auto fit = fit_hyperparams(data, 3, HyperBounds{}, GPHyper::defaults(2), rng);
  REQUIRE(!fit.fell_back);
  for (int a = 0; a < 2; ++a) {
    CHECK(std::abs(std::log(fit.hyper.lengthscales[a]) - std::log(0.2)) <= 0.3);
  }
}

TEST_CASE("constant-zero targets drive the signal variance down") {
  ObservationSet data(1, 1);
  Rng rng(97);
  for (int i = 0; i < 30; ++i) {
    Vec x(1), z(1);
    x << uniform01(rng);
    z << uniform01(rng);
    data.append(x, z, 0.0);
  }
  const auto fit = fit_hyperparams(data, 3, HyperBounds{}, GPHyper::defaults(2), rng);
  CHECK(fit.hyper.signal_var <= 1e-3);  // pushed toward the 1e-4 bound
}

TEST_CASE("ascent never decreases the evidence") {
  Rng rng(101);
  const GPHyper truth(Vec::Constant(2, 0.3), 1.0, 0.01);
  const auto data = random_observations(40, 1, 1, rng);
  const double before = log_marginal_likelihood(data, truth).value;
  const auto fit = fit_hyperparams(data, 1, HyperBounds{}, truth, rng);
  CHECK(fit.log_marginal >= before - 1e-12);
}

TEST_CASE("jitter retry on a forced failure path") {
  // the noise floor makes genuine failures unreachable; exercise the
  // wrapper by checking it returns a working posterior
  Rng rng(7);
  const auto data = random_observations(12, 1, 1, rng);
  const GPPosterior post = fit_posterior(data, GPHyper::defaults(2));
  CHECK(post.n() == 12);
}
