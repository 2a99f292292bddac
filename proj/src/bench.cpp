#include "riskbo/bench.hpp"

#include "riskbo/risk.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

namespace riskbo {

double branin_native(double a, double b) {
  const double c1 = 5.1 / (4.0 * M_PI * M_PI);
  const double c2 = 5.0 / M_PI;
  const double c3 = 10.0 * (1.0 - 1.0 / (8.0 * M_PI));
  const double t = b - c1 * a * a + c2 * a - 6.0;
  return t * t + c3 * std::cos(a) + 10.0;
}

double goldstein_price_native(double a, double b) {
  const double p1 =
      1.0 + (a + b + 1.0) * (a + b + 1.0) *
                (19.0 - 14.0 * a + 3.0 * a * a - 14.0 * b + 6.0 * a * b +
                 3.0 * b * b);
  const double p2 =
      30.0 + (2.0 * a - 3.0 * b) * (2.0 * a - 3.0 * b) *
                 (18.0 - 32.0 * a + 12.0 * a * a + 48.0 * b - 36.0 * a * b +
                  27.0 * b * b);
  return p1 * p2;
}

double hartmann3_native(const Vec& v) {
  static const double alpha[4] = {1.0, 1.2, 3.0, 3.2};
  static const double A[4][3] = {{3.0, 10.0, 30.0},
                                 {0.1, 10.0, 35.0},
                                 {3.0, 10.0, 30.0},
                                 {0.1, 10.0, 35.0}};
  static const double P[4][3] = {{0.3689, 0.1170, 0.2673},
                                 {0.4699, 0.4387, 0.7470},
                                 {0.1091, 0.8732, 0.5547},
                                 {0.0381, 0.5743, 0.8828}};
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double d = v[j] - P[i][j];
      inner += A[i][j] * d * d;
    }
    s += alpha[i] * std::exp(-inner);
  }
  return -s;
}

namespace {

// first d_x joint coordinates are x, the rest are z
Vec joint_of(const Vec& x, const Vec& z) {
  Vec p(x.size() + z.size());
  p << x, z;
  return p;
}

EnvDistribution env_for(ZMode mode, int d_z, int n_per_axis) {
  if (mode == ZMode::Discrete) {
    return EnvDistribution::grid(d_z, n_per_axis, WeightRule::GaussianBump);
  }
  return EnvDistribution::truncated_gaussian(d_z);
}

}  // namespace

Problem make_problem(const std::string& name, ZMode z_mode, double alpha) {
  Problem p;
  p.name = name;
  p.alpha = alpha;
  p.metric_eps = z_mode == ZMode::Continuous ? 0.01 : 0.0;
  if (name == "branin") {
    p.d_x = 1;
    p.d_z = 1;
    p.env = env_for(z_mode, 1, 100);
    p.objective = [](const Vec& x, const Vec& z) {
      return -branin_native(-5.0 + 15.0 * x[0], 15.0 * z[0]);
    };
  } else if (name == "goldstein-price") {
    p.d_x = 1;
    p.d_z = 1;
    p.env = env_for(z_mode, 1, 100);
    p.objective = [](const Vec& x, const Vec& z) {
      return -goldstein_price_native(-2.0 + 4.0 * x[0], -2.0 + 4.0 * z[0]);
    };
  } else if (name == "hartmann-1-2") {
    p.d_x = 1;
    p.d_z = 2;
    p.env = env_for(z_mode, 2, 8);  // 64 atoms
    p.objective = [](const Vec& x, const Vec& z) {
      Vec v(3);
      v << x[0], z[0], z[1];
      return -hartmann3_native(v);
    };
  } else if (name == "hartmann-2-1") {
    p.d_x = 2;
    p.d_z = 1;
    p.env = env_for(z_mode, 1, 100);
    p.objective = [](const Vec& x, const Vec& z) {
      Vec v(3);
      v << x[0], x[1], z[0];
      return -hartmann3_native(v);
    };
  } else {
    throw std::invalid_argument("make_problem: unknown problem '" + name +
                                "' (expected branin, goldstein-price, "
                                "hartmann-1-2, hartmann-2-1)");
  }
  p.domain = Box::unit(p.d_x);
  return p;
}

double noisy_eval(const Problem& p, const Vec& x, const Vec& z, Rng& rng) {
  return p.objective(x, z) + std::sqrt(p.noise_var) * std_normal(rng);
}

double true_var(const Problem& p, const Vec& x, double alpha) {
  if (p.env.kind() == EnvKind::Discrete) {
    const Mat& atoms = p.env.atoms();
    Vec vals(atoms.rows());
    for (int i = 0; i < atoms.rows(); ++i) {
      vals[i] = p.objective(x, atoms.row(i).transpose());
    }
    return var_discrete(vals, p.env.masses(), alpha);
  }
  const Mat panel = p.env.quasi_sample(p.metric_z_samples);
  Vec vals(panel.rows());
  for (int i = 0; i < panel.rows(); ++i) {
    vals[i] = p.objective(x, panel.row(i).transpose());
  }
  return var_discrete(
      vals, Vec::Constant(panel.rows(), 1.0 / double(panel.rows())), alpha);
}

namespace {

OracleBest compute_oracle(const Problem& p, double alpha) {
  OracleBest best;
  best.value = -std::numeric_limits<double>::infinity();
  if (p.x_grid) {
    for (int i = 0; i < p.x_grid->rows(); ++i) {
      const Vec x = p.x_grid->row(i).transpose();
      const double v = true_var(p, x, alpha);
      if (v > best.value) best = {x, v};
    }
    return best;
  }
  const int per_axis = 200;
  const int d = p.d_x;
  const long total = static_cast<long>(std::pow(per_axis, d) + 0.5);
  std::vector<double> vals(total);
#pragma omp parallel for schedule(static)
  for (long idx = 0; idx < total; ++idx) {
    Vec x(d);
    long rem = idx;
    for (int a = d - 1; a >= 0; --a) {
      x[a] = p.domain.lo[a] + (p.domain.hi[a] - p.domain.lo[a]) *
                                  (rem % per_axis) / double(per_axis - 1);
      rem /= per_axis;
    }
    vals[idx] = true_var(p, x, alpha);
  }
  long best_idx = 0;
  for (long idx = 1; idx < total; ++idx) {
    if (vals[idx] > vals[best_idx]) best_idx = idx;
  }
  {
    Vec x(d);
    long rem = best_idx;
    for (int a = d - 1; a >= 0; --a) {
      x[a] = p.domain.lo[a] + (p.domain.hi[a] - p.domain.lo[a]) *
                                  (rem % per_axis) / double(per_axis - 1);
      rem /= per_axis;
    }
    best = {x, vals[best_idx]};
  }
  // compass-search refinement from the best grid point
  double step = 1.0 / double(per_axis - 1);
  for (int round = 0; round < 40; ++round) {
    bool improved = false;
    for (int a = 0; a < d; ++a) {
      for (const double dir : {-1.0, 1.0}) {
        Vec x = best.x;
        x[a] = std::clamp(x[a] + dir * step, p.domain.lo[a], p.domain.hi[a]);
        const double v = true_var(p, x, alpha);
        if (v > best.value) {
          best = {x, v};
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
    if (step < 1e-7) break;
  }
  return best;
}

std::mutex oracle_mutex;
std::map<std::string, OracleBest> oracle_cache;

}  // namespace

OracleBest oracle_best(const Problem& p, double alpha) {
  std::ostringstream key;
  key << p.name << "|"
      << (p.env.kind() == EnvKind::Discrete ? "d" : "c") << "|" << alpha << "|"
      << p.metric_z_samples << "|" << (p.x_grid ? p.x_grid->rows() : 0);
  if (!p.name.empty()) {
    std::lock_guard<std::mutex> lock(oracle_mutex);
    auto it = oracle_cache.find(key.str());
    if (it != oracle_cache.end()) return it->second;
  }
  OracleBest best = compute_oracle(p, alpha);
  if (!p.name.empty()) {
    std::lock_guard<std::mutex> lock(oracle_mutex);
    oracle_cache[key.str()] = best;
  }
  return best;
}

void write_atoms_file(const std::string& path, const EnvDistribution& env) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_atoms_file: cannot open " + path);
  out << "# riskbo-atoms v1\n";
  out.precision(17);
  const Mat& atoms = env.atoms();
  const Vec& masses = env.masses();
  for (int i = 0; i < atoms.rows(); ++i) {
    for (int j = 0; j < atoms.cols(); ++j) out << atoms(i, j) << " ";
    out << masses[i] << "\n";
  }
}

EnvDistribution read_atoms_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_atoms_file: cannot open " + path);
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::vector<double> vals;
    double v;
    while (is >> v) vals.push_back(v);
    if (!vals.empty()) rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::runtime_error("read_atoms_file: no atoms");
  const int cols = static_cast<int>(rows[0].size());
  Mat atoms(rows.size(), cols - 1);
  Vec masses(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != cols) {
      throw std::runtime_error("read_atoms_file: ragged rows");
    }
    for (int j = 0; j < cols - 1; ++j) atoms(i, j) = rows[i][j];
    masses[i] = rows[i][cols - 1];
  }
  return EnvDistribution::discrete(std::move(atoms), std::move(masses));
}

void write_oracle_file(const std::string& path, const Problem& p,
                       const OracleBest& oracle) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_oracle_file: cannot open " + path);
  out << "# riskbo-oracle v1 " << p.name << " alpha=" << p.alpha << "\n";
  out.precision(17);
  for (int j = 0; j < oracle.x.size(); ++j) out << oracle.x[j] << " ";
  out << oracle.value << "\n";
}

std::optional<OracleBest> read_oracle_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::vector<double> vals;
    double v;
    while (is >> v) vals.push_back(v);
    if (vals.size() < 2) return std::nullopt;
    OracleBest out;
    out.x = Eigen::Map<Vec>(vals.data(), vals.size() - 1);
    out.value = vals.back();
    return out;
  }
  return std::nullopt;
}

}  // namespace riskbo
