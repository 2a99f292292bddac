#include "riskbo/acquire.hpp"

#include <doctest.h>

#include "test_util.hpp"

using namespace riskbo;
using namespace riskbo::testutil;

// The OpenMP kernels must agree bit-for-bit with their serial reference
// implementations: each iteration is independent and runs the same
// scalar code path.

TEST_CASE("batched prediction equals the serial reference bit for bit") {
  Rng rng(71);
  const auto post = random_posterior(40, 2, 1, rng);
  Mat pts(500, 3);
  const Box joint = Box::unit(3);
  for (int i = 0; i < pts.rows(); ++i) {
    pts.row(i) = joint.sample(rng).transpose();
  }
  Vec mu_p, sd_p, mu_s, sd_s;
  post->predict_many(pts, mu_p, sd_p);
  post->predict_many_serial(pts, mu_s, sd_s);
  CHECK((mu_p - mu_s).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sd_p - sd_s).cwiseAbs().maxCoeff() == 0.0);
  // and each row matches the scalar entry point
  for (int i = 0; i < pts.rows(); ++i) {
    const auto pr = post->predict(pts.row(i).transpose());
    CHECK(pr.mu == mu_p[i]);
    CHECK(pr.sigma == sd_p[i]);
  }
}

TEST_CASE("batched acquisition equals the serial reference bit for bit") {
  Rng rng(73);
  const auto post = random_posterior(30, 1, 1, rng);
  const auto env = EnvDistribution::grid(1, 50, WeightRule::GaussianBump);
  AcquisitionProblem prob;
  prob.field = ConfidenceField{post, 3.0};
  prob.env = &env;
  prob.alpha = 0.1;
  prob.domain = Box::unit(1);
  const Mat xs = halton_points(333, prob.domain);
  const Vec par = acq_values_batch(prob, xs);
  const Vec ser = acq_values_batch_serial(prob, xs);
  CHECK((par - ser).cwiseAbs().maxCoeff() == 0.0);
}
