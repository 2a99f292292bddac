#pragma once

#include "riskbo/env.hpp"

#include <functional>
#include <optional>
#include <string>

namespace riskbo {

enum class ZMode { Discrete, Continuous };

// A synthetic maximization problem over the unit box: noise-free
// objective, environmental distribution and observation-noise model.
struct Problem {
  std::string name;
  int d_x = 1;
  int d_z = 1;
  std::function<double(const Vec& x, const Vec& z)> objective;
  EnvDistribution env;
  double noise_var = 0.01;
  double alpha = 0.1;
  Box domain;
  double metric_eps = 0.0;       // added before log10 in reports
  int metric_z_samples = 10000;  // continuous-Z quantile panel size
  std::optional<Mat> x_grid;     // finite decision set, when applicable
};

// Names: branin, goldstein-price, hartmann-1-2, hartmann-2-1.
// Base functions are affinely rescaled to the unit box and negated
// (they are minimization standards; these problems maximize).
Problem make_problem(const std::string& name, ZMode z_mode,
                     double alpha = 0.1);

double noisy_eval(const Problem& p, const Vec& x, const Vec& z, Rng& rng);

// VaR_alpha of the noise-free objective at x: exact over atoms for
// discrete Z, empirical quantile over the fixed quasi-random panel
// otherwise.
double true_var(const Problem& p, const Vec& x, double alpha);

struct OracleBest {
  Vec x;
  double value;
};

// Dense-grid search refined by pattern search; memoized per problem.
OracleBest oracle_best(const Problem& p, double alpha);

// Base test functions on their native domains.
double branin_native(double a, double b);
double goldstein_price_native(double a, double b);
double hartmann3_native(const Vec& v);

// Fixture files: plain text, one atom (coordinates then mass) per line.
void write_atoms_file(const std::string& path, const EnvDistribution& env);
EnvDistribution read_atoms_file(const std::string& path);
void write_oracle_file(const std::string& path, const Problem& p,
                       const OracleBest& oracle);
std::optional<OracleBest> read_oracle_file(const std::string& path);

}  // namespace riskbo
