#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace riskbo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Axis-aligned box, lower < upper per axis.
struct Box {
  Vec lo;
  Vec hi;

  static Box unit(int dim);

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& p, double tol = 0.0) const;
  Vec clamp(const Vec& p) const;
  Vec sample(Rng& rng) const;
  double diameter() const;
};

// Deterministic stream splitting: the derived seed depends only on
// (master, tag, index), never on how many other streams exist.
std::uint64_t split_seed(std::uint64_t master, std::string_view tag,
                         std::uint64_t index);

// rng draws below avoid std distribution objects so that streams are
// reproducible down to the bit across compilers.
double uniform01(Rng& rng);
double uniform_in(Rng& rng, double lo, double hi);
std::size_t uniform_index(Rng& rng, std::size_t n);  // in [0, n)
double std_normal(Rng& rng);

double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);  // inverse standard-normal CDF

// Halton low-discrepancy sequence; index starts at 1.
double halton(std::uint64_t index, std::uint32_t base);
Mat halton_points(int n, int dim);            // rows in (0,1)^dim
Mat halton_points(int n, const Box& box);     // scaled into the box

// Quantile with linear interpolation between order statistics (type 7).
double percentile(std::vector<double> values, double p);

std::uint64_t fnv1a(const void* data, std::size_t n);
std::uint64_t fnv1a_file(const std::string& path);
std::string hex64(std::uint64_t v);

}  // namespace riskbo
