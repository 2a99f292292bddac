#include "riskbo/surrogate.hpp"

#include <doctest.h>

#include "test_util.hpp"

#include <cmath>

using namespace riskbo;
using namespace riskbo::testutil;

TEST_CASE("forward pass of degenerate nets") {
  Rng rng(1);
  SurrogateNet net = SurrogateNet::init(2, 30, rng);
  Vec x(2);
  x << 0.2, 0.8;

  SurrogateNet zeros = net;
  zeros.w1.setZero();
  zeros.b1.setZero();
  zeros.w2.setZero();
  zeros.b2.setZero();
  zeros.w3.setZero();
  zeros.b3 = 0.0;
  CHECK(zeros.forward(x) == 0.0);

  SurrogateNet head = net;
  head.w3.setZero();
  head.b3 = 3.25;
  CHECK(head.forward(x) == 3.25);
  Vec y(2);
  y << 0.9, 0.1;
  CHECK(head.forward(y) == 3.25);
}

TEST_CASE("parameter gradient matches finite differences") {
  Rng rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    SurrogateNet net = SurrogateNet::init(2, 8, rng);
    Vec x(2);
    x << uniform01(rng), uniform01(rng);
    Vec grad = Vec::Zero(net.param_count());
    accumulate_output_param_grad(net, x, 1.0, grad);
    Vec theta = net.pack();
    const double h = 1e-6;
    for (int i = 0; i < net.param_count(); i += 7) {  // sampled coordinates
      Vec tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      SurrogateNet np = net, nm = net;
      np.unpack(tp);
      nm.unpack(tm);
      const double fd = (np.forward(x) - nm.forward(x)) / (2 * h);
      CHECK(std::abs(grad[i] - fd) < 1e-4);
    }
  }
}

TEST_CASE("input gradient matches finite differences") {
  Rng rng(11);
  SurrogateNet net = SurrogateNet::init(3, 16, rng);
  for (int rep = 0; rep < 10; ++rep) {
    Vec x(3);
    x << uniform01(rng), uniform01(rng), uniform01(rng);
    const Vec g = net.input_grad(x);
    const double h = 1e-6;
    for (int a = 0; a < 3; ++a) {
      Vec xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      CHECK(std::abs(g[a] - (net.forward(xp) - net.forward(xm)) / (2 * h)) <
            1e-4);
    }
  }
}

TEST_CASE("pack and unpack round-trip") {
  Rng rng(13);
  SurrogateNet a = SurrogateNet::init(2, 8, rng);
  SurrogateNet b = SurrogateNet::init(2, 8, rng);
  b.unpack(a.pack());
  Vec x(2);
  x << 0.4, 0.6;
  CHECK(a.forward(x) == b.forward(x));
}

TEST_CASE("ball samples stay inside the ball and the box") {
  Rng rng(17);
  const Box box = Box::unit(2);
  Vec center(2);
  center << 0.05, 0.95;  // near a corner so clipping fires
  for (int i = 0; i < 2000; ++i) {
    const Vec s = sample_ball(center, 0.1, box, rng);
    CHECK((s - center).norm() <= 0.1 + 1e-12);
    CHECK(box.contains(s));
  }
}

TEST_CASE("training fits a constant target") {
  Rng rng(19);
  SurrogateNet net = SurrogateNet::init(1, 30, rng);
  const auto env = EnvDistribution::truncated_gaussian(1);
  Vec center(1);
  center << 0.5;
  LnsoConfig cfg;
  cfg.train_steps = 600;
  const double c = 0.7;
  net_train_local(
      net, center, 0.1, Box::unit(1),
      [&](const Vec&, const Vec&) { return c; }, env, 0.5, cfg, rng);
  for (int i = 0; i < 20; ++i) {
    const Vec x = sample_ball(center, 0.1, Box::unit(1), rng);
    CHECK(std::abs(net.forward(x) - c) <= 0.05);
  }
}

TEST_CASE("training finds the lower atom of a two-point law") {
  // alpha strictly below the boundary mass makes the lower atom the
  // unique quantile; at exactly 0.5 the pinball minimizer is the whole
  // inter-atom interval
  Rng rng(23);
  SurrogateNet net = SurrogateNet::init(1, 30, rng);
  Mat atoms(2, 1);
  atoms << 0.0, 1.0;
  const auto env = EnvDistribution::discrete(atoms, Vec::Constant(2, 0.5));
  Vec center(1);
  center << 0.5;
  LnsoConfig cfg;
  cfg.train_steps = 800;
  net_train_local(
      net, center, 0.1, Box::unit(1),
      [](const Vec&, const Vec& z) { return z[0]; }, env, 0.4, cfg, rng);
  CHECK(std::abs(net.forward(center) - 0.0) <= 0.05);
}

TEST_CASE("training loss decreases between averaged windows") {
  Rng rng(29);
  SurrogateNet net = SurrogateNet::init(1, 30, rng);
  const auto env = EnvDistribution::truncated_gaussian(1);
  Vec center(1);
  center << 0.5;
  LnsoConfig cfg;
  cfg.train_steps = 300;
  std::vector<double> losses;
  net_train_local(
      net, center, 0.1, Box::unit(1),
      [](const Vec& x, const Vec& z) { return std::sin(5 * x[0]) + 0.2 * z[0]; },
      env, 0.3, cfg, rng, &losses);
  REQUIRE(losses.size() == 300);
  auto window = [&](int from, int len) {
    double s = 0.0;
    for (int i = from; i < from + len; ++i) s += losses[i];
    return s / len;
  };
  CHECK(window(100, 100) <= window(0, 100) + 1e-9);
  CHECK(window(200, 100) <= window(100, 100) + 1e-9);
}

TEST_CASE("non-finite targets abort with a diagnostic") {
  Rng rng(31);
  SurrogateNet net = SurrogateNet::init(1, 8, rng);
  const auto env = EnvDistribution::truncated_gaussian(1);
  Vec center(1);
  center << 0.5;
  LnsoConfig cfg;
  cfg.train_steps = 5;
  CHECK_THROWS_AS(
      net_train_local(
          net, center, 0.1, Box::unit(1),
          [](const Vec&, const Vec&) {
            return std::numeric_limits<double>::infinity();
          },
          env, 0.3, cfg, rng),
      std::runtime_error);
}

TEST_CASE("surrogate ascent maximizes concave quadratics") {
  Rng rng(37);
  const auto env = EnvDistribution::truncated_gaussian(1);
  int hits = 0;
  for (int rep = 0; rep < 5; ++rep) {
    const double peak = uniform_in(rng, 0.2, 0.8);
    const double curv = uniform_in(rng, 0.5, 2.0);
    TargetFn target = [peak, curv](const Vec& x, const Vec&) {
      return -curv * (x[0] - peak) * (x[0] - peak);
    };
    Vec x0(1);
    x0 << uniform01(rng);
    LnsoConfig cfg;
    const auto res =
        lnso_maximize(target, env, 0.1, Box::unit(1), x0, cfg, rng);
    CHECK(Box::unit(1).contains(res.x));
    if (std::abs(res.x[0] - peak) <= 0.05) ++hits;
  }
  CHECK(hits >= 4);
}

TEST_CASE("a radius beyond the domain diameter trains once") {
  Rng rng(41);
  const auto env = EnvDistribution::truncated_gaussian(1);
  TargetFn target = [](const Vec& x, const Vec&) {
    return -(x[0] - 0.4) * (x[0] - 0.4);
  };
  Vec x0(1);
  x0 << 0.9;
  LnsoConfig cfg;
  cfg.radius = 5.0;  // covers [0,1] entirely
  cfg.x_steps = 60;
  cfg.retrain_period = 0;  // isolate the ball trigger
  const auto res = lnso_maximize(target, env, 0.1, Box::unit(1), x0, cfg, rng);
  CHECK(res.retrains == 1);
  CHECK(Box::unit(1).contains(res.x));
}

TEST_CASE("x0 outside the domain is rejected") {
  Rng rng(43);
  const auto env = EnvDistribution::truncated_gaussian(1);
  Vec x0(1);
  x0 << 1.5;
  CHECK_THROWS_AS(lnso_maximize([](const Vec&, const Vec&) { return 0.0; },
                                env, 0.1, Box::unit(1), x0, LnsoConfig{}, rng),
                  std::invalid_argument);
}
