#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "l1gibbs/posterior.hpp"

namespace l1gibbs {

/// How lambda depends on n for the 1-D problem.
struct LambdaRule {
  enum class Kind { kFixed, kScaled, kTable };
  Kind kind = Kind::kFixed;
  double value = 400.0;  // used by kFixed

  /// "fixed:<value>", "scaled" or "table".
  static LambdaRule parse(const std::string& text);
  std::string describe() const;
};

/// fixed -> value; scaled -> 25 sqrt(n+1); table -> rounded reproduction
/// values for n in {127, 255, 511, 1023}.
double lambda_schedule(const LambdaRule& rule, Index n);

struct Scenario1dConfig {
  int L_u = 6;  // n = 2^L_u - 1
  int L_m = 5;  // k = 2^L_m - 2
  LambdaRule lambda;
  double noise_sigma = 0.001;
  std::uint64_t seed = 1;
  void validate() const;
};

struct Circle {
  double cx = 0.5, cy = 0.5, radius = 0.05, intensity = 1.0;
};

struct Scenario2dConfig {
  int grid = 511;
  double blur_sigma = 0.015;
  double rel_noise = 0.1;
  int fine_factor = 4;
  double lambda = 10.0;
  /// Empty: the seeded default phantom of n_spots circles.
  std::vector<Circle> spots;
  int n_spots = 12;
  std::uint64_t seed = 1;
  void validate() const;
};

/// Identity forward map with a piecewise-constant truth; used to exercise
/// the noise-variance block.
struct DenoisingConfig {
  Index n = 256;
  double noise_sigma = 0.1;
  double lambda = 20.0;
  bool tv_prior = true;  // false: impulse prior (D = I)
  std::uint64_t seed = 1;
};

struct Scenario {
  std::string kind;  // "1d", "2d" or "denoise"
  std::shared_ptr<PosteriorModel> model;
  VectorXd truth;  // discretized ground truth in u-coordinates
  VectorXd clean;  // noiseless data
  Scenario1dConfig config1d;
  Scenario2dConfig config2d;
  DenoisingConfig config_denoise;
};

Scenario build_1d(const Scenario1dConfig& config);
Scenario build_2d(const Scenario2dConfig& config);
Scenario build_denoising(const DenoisingConfig& config);

/// The 1-D CCD forward matrix: k x n, trapezoidal rule over each pixel.
SparseMatrixD ccd_matrix(int L_u, int L_m);

/// Seeded non-overlapping circles with radii in [0.03, 0.06] and
/// intensities in [0.8, 1.2], fully inside the unit square.
std::vector<Circle> default_phantom(std::uint64_t seed, int count = 12);

/// Pixel averages of a sum of circle indicators on an N x N grid (row-major,
/// row = y). Boundary pixels are supersampled.
VectorXd rasterize_circles(const std::vector<Circle>& spots, int grid);

/// Noiseless 2-D data: blur on a grid fine_factor times finer, then average
/// fine_factor x fine_factor blocks.
VectorXd clean_data_2d(const std::vector<Circle>& spots, int grid, int fine_factor, double blur_sigma);

}  // namespace l1gibbs
