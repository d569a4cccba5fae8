#include "l1gibbs/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "l1gibbs/random.hpp"

namespace l1gibbs {

namespace {

// Stream indices for derive_seed, so that noise and phantom never share draws.
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kPhantomStream = 2;
constexpr std::uint64_t kTruthStream = 3;

}  // namespace

LambdaRule LambdaRule::parse(const std::string& text) {
  LambdaRule rule;
  if (text == "scaled") {
    rule.kind = Kind::kScaled;
  } else if (text == "table") {
    rule.kind = Kind::kTable;
  } else if (text.rfind("fixed:", 0) == 0) {
    rule.kind = Kind::kFixed;
    std::size_t pos = 0;
    const std::string num = text.substr(6);
    try {
      rule.value = std::stod(num, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != num.size() || !(rule.value >= 0.0)) {
      throw std::invalid_argument("lambda rule: bad value in '" + text + "'");
    }
  } else {
    throw std::invalid_argument("lambda rule must be fixed:<value>, scaled or table; got '" + text + "'");
  }
  return rule;
}

std::string LambdaRule::describe() const {
  switch (kind) {
    case Kind::kScaled: return "scaled";
    case Kind::kTable: return "table";
    case Kind::kFixed: {
      std::ostringstream os;
      os.precision(17);
      os << "fixed:" << value;
      return os.str();
    }
  }
  return "?";
}

double lambda_schedule(const LambdaRule& rule, Index n) {
  switch (rule.kind) {
    case LambdaRule::Kind::kFixed: return rule.value;
    case LambdaRule::Kind::kScaled: return 25.0 * std::sqrt(static_cast<double>(n + 1));
    case LambdaRule::Kind::kTable:
      switch (n) {
        case 127: return 280.0;
        case 255: return 400.0;
        case 511: return 560.0;
        case 1023: return 800.0;
        default: throw std::invalid_argument("lambda table has no entry for n=" + std::to_string(n));
      }
  }
  return rule.value;
}

void Scenario1dConfig::validate() const {
  if (L_m < 2 || L_u <= L_m || L_u > 26) throw std::invalid_argument("1-D scenario: need 2 <= L_m < L_u <= 26");
  if (!(noise_sigma > 0.0)) throw std::invalid_argument("1-D scenario: noise sigma must be positive");
}

void Scenario2dConfig::validate() const {
  if (grid < 3 || grid % 2 == 0) throw std::invalid_argument("2-D scenario: grid must be odd and >= 3");
  if (fine_factor < 2) throw std::invalid_argument("2-D scenario: fine_factor must be >= 2");
  if (!(blur_sigma > 0.0)) throw std::invalid_argument("2-D scenario: blur sigma must be positive");
  if (!(rel_noise > 0.0)) throw std::invalid_argument("2-D scenario: rel_noise must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("2-D scenario: lambda must be non-negative");
  if (spots.empty() && n_spots < 1) throw std::invalid_argument("2-D scenario: need at least one spot");
}

SparseMatrixD ccd_matrix(int L_u, int L_m) {
  const Index n = (Index{1} << L_u) - 1;
  const Index k = (Index{1} << L_m) - 2;
  const Index r = Index{1} << (L_u - L_m);
  const double h = 1.0 / static_cast<double>(n + 1);
  std::vector<Eigen::Triplet<double>> t;
  for (Index j = 1; j <= k; ++j) {
    // Grid points j r .. (j+1) r (1-based) span pixel j.
    const Index first = j * r - 1;
    t.emplace_back(j - 1, first, 0.5 * h);
    for (Index q = 1; q < r; ++q) t.emplace_back(j - 1, first + q, h);
    t.emplace_back(j - 1, first + r, 0.5 * h);
  }
  SparseMatrixD a(k, n);
  a.setFromTriplets(t.begin(), t.end());
  a.makeCompressed();
  return a;
}

Scenario build_1d(const Scenario1dConfig& config) {
  config.validate();
  const Index n = (Index{1} << config.L_u) - 1;
  const Index k = (Index{1} << config.L_m) - 2;
  const double lo = 1.0 / 3.0, hi = 2.0 / 3.0;

  Scenario s;
  s.kind = "1d";
  s.config1d = config;
  s.truth.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i + 1) / static_cast<double>(n + 1);
    s.truth[i] = (t >= lo && t <= hi) ? 1.0 : 0.0;
  }
  // Pixel j covers [j/(k+2), (j+1)/(k+2)]; its clean value is the overlap
  // length with [1/3, 2/3].
  s.clean.resize(k);
  for (Index j = 1; j <= k; ++j) {
    const double a = static_cast<double>(j) / static_cast<double>(k + 2);
    const double b = static_cast<double>(j + 1) / static_cast<double>(k + 2);
    s.clean[j - 1] = std::max(0.0, std::min(b, hi) - std::max(a, lo));
  }
  Rng rng(derive_seed(config.seed, kNoiseStream));
  VectorXd data = s.clean;
  for (Index j = 0; j < k; ++j) data[j] += config.noise_sigma * rng.normal();

  std::vector<char> pen(static_cast<std::size_t>(n), 1);
  pen[0] = 0;  // constant offset
  s.model = std::make_shared<PosteriorModel>(
      std::make_shared<SparseOperator>(ccd_matrix(config.L_u, config.L_m)), std::move(data),
      config.noise_sigma, lambda_schedule(config.lambda, n), forward_difference(n), Basis::step(n),
      std::move(pen));
  return s;
}

std::vector<Circle> default_phantom(std::uint64_t seed, int count) {
  Rng rng(derive_seed(seed, kPhantomStream));
  std::vector<Circle> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 100000) throw std::runtime_error("default_phantom: could not place circles");
    Circle c;
    c.radius = 0.03 + 0.03 * rng.uniform();
    c.intensity = 0.8 + 0.4 * rng.uniform();
    c.cx = c.radius + (1.0 - 2.0 * c.radius) * rng.uniform();
    c.cy = c.radius + (1.0 - 2.0 * c.radius) * rng.uniform();
    bool clear = true;
    for (const Circle& o : out) {
      if (std::hypot(c.cx - o.cx, c.cy - o.cy) <= c.radius + o.radius) {
        clear = false;
        break;
      }
    }
    if (clear) out.push_back(c);
  }
  return out;
}

VectorXd rasterize_circles(const std::vector<Circle>& spots, int grid) {
  const double h = 1.0 / grid;
  constexpr int kSub = 32;
  VectorXd img = VectorXd::Zero(static_cast<Index>(grid) * grid);
  for (const Circle& c : spots) {
    const int x0 = std::max(0, static_cast<int>(std::floor((c.cx - c.radius) / h)));
    const int x1 = std::min(grid - 1, static_cast<int>(std::floor((c.cx + c.radius) / h)));
    const int y0 = std::max(0, static_cast<int>(std::floor((c.cy - c.radius) / h)));
    const int y1 = std::min(grid - 1, static_cast<int>(std::floor((c.cy + c.radius) / h)));
    const double r2 = c.radius * c.radius;
    for (int py = y0; py <= y1; ++py) {
      for (int px = x0; px <= x1; ++px) {
        const double ax = px * h, bx = ax + h, ay = py * h, by = ay + h;
        const double nx = std::clamp(c.cx, ax, bx) - c.cx, ny = std::clamp(c.cy, ay, by) - c.cy;
        if (nx * nx + ny * ny >= r2) continue;
        const double fx = std::max(std::fabs(ax - c.cx), std::fabs(bx - c.cx));
        const double fy = std::max(std::fabs(ay - c.cy), std::fabs(by - c.cy));
        double cover;
        if (fx * fx + fy * fy <= r2) {
          cover = 1.0;
        } else {
          int inside = 0;
          for (int sy = 0; sy < kSub; ++sy) {
            const double y = ay + (sy + 0.5) * h / kSub - c.cy;
            for (int sx = 0; sx < kSub; ++sx) {
              const double x = ax + (sx + 0.5) * h / kSub - c.cx;
              inside += (x * x + y * y <= r2) ? 1 : 0;
            }
          }
          cover = static_cast<double>(inside) / (kSub * kSub);
        }
        img[static_cast<Index>(py) * grid + px] += c.intensity * cover;
      }
    }
  }
  return img;
}

VectorXd clean_data_2d(const std::vector<Circle>& spots, int grid, int fine_factor, double blur_sigma) {
  const int fine = grid * fine_factor;
  const VectorXd fine_img = rasterize_circles(spots, fine);
  const Conv2DOperator blur(fine, blur_sigma);
  const VectorXd fine_data = blur * fine_img;
  VectorXd out = VectorXd::Zero(static_cast<Index>(grid) * grid);
  const double w = 1.0 / (static_cast<double>(fine_factor) * fine_factor);
  for (int fy = 0; fy < fine; ++fy) {
    for (int fx = 0; fx < fine; ++fx) {
      out[static_cast<Index>(fy / fine_factor) * grid + fx / fine_factor] +=
          w * fine_data[static_cast<Index>(fy) * fine + fx];
    }
  }
  return out;
}

Scenario build_2d(const Scenario2dConfig& config_in) {
  config_in.validate();
  Scenario s;
  s.kind = "2d";
  s.config2d = config_in;
  if (s.config2d.spots.empty()) s.config2d.spots = default_phantom(config_in.seed, config_in.n_spots);
  const Scenario2dConfig& config = s.config2d;
  const Index n = static_cast<Index>(config.grid) * config.grid;

  auto op = std::make_shared<Conv2DOperator>(config.grid, config.blur_sigma);
  s.truth = rasterize_circles(config.spots, config.grid);
  s.clean = clean_data_2d(config.spots, config.grid, config.fine_factor, config.blur_sigma);
  const double sigma = config.rel_noise * s.clean.maxCoeff();
  if (!(sigma > 0.0)) throw std::invalid_argument("2-D scenario: clean data has no positive values");
  Rng rng(derive_seed(config.seed, kNoiseStream));
  VectorXd data = s.clean;
  for (Index i = 0; i < n; ++i) data[i] += sigma * rng.normal();

  SparseMatrixD d(n, n);
  d.setIdentity();
  s.model = std::make_shared<PosteriorModel>(op, std::move(data), sigma, config.lambda, std::move(d),
                                             Basis::identity(n), std::vector<char>(static_cast<std::size_t>(n), 1));
  return s;
}

Scenario build_denoising(const DenoisingConfig& config) {
  const Index n = config.n;
  if (n < 4) throw std::invalid_argument("denoising scenario: n too small");
  Scenario s;
  s.kind = "denoise";
  s.config_denoise = config;
  // Blocks of seeded random heights in [0, 1] on a fixed set of breakpoints.
  Rng truth_rng(derive_seed(config.seed, kTruthStream));
  s.truth.resize(n);
  const Index blocks = 8;
  for (Index b = 0; b < blocks; ++b) {
    const double level = truth_rng.uniform();
    for (Index i = b * n / blocks; i < (b + 1) * n / blocks; ++i) s.truth[i] = level;
  }
  s.clean = s.truth;
  Rng rng(derive_seed(config.seed, kNoiseStream));
  VectorXd data = s.clean;
  for (Index i = 0; i < n; ++i) data[i] += config.noise_sigma * rng.normal();

  auto op = std::make_shared<IdentityOperator>(n);
  if (config.tv_prior) {
    std::vector<char> pen(static_cast<std::size_t>(n), 1);
    pen[0] = 0;
    s.model = std::make_shared<PosteriorModel>(op, std::move(data), config.noise_sigma, config.lambda,
                                               forward_difference(n), Basis::step(n), std::move(pen));
  } else {
    SparseMatrixD d(n, n);
    d.setIdentity();
    s.model = std::make_shared<PosteriorModel>(op, std::move(data), config.noise_sigma, config.lambda,
                                               std::move(d), Basis::identity(n),
                                               std::vector<char>(static_cast<std::size_t>(n), 1));
  }
  return s;
}

}  // namespace l1gibbs
