#include "l1gibbs/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace l1gibbs {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace fs = std::filesystem;

namespace {

constexpr char kChainMagic[8] = {'L', '1', 'C', 'H', 'A', 'I', 'N', '\0'};
constexpr char kArrayMagic[8] = {'L', '1', 'A', 'R', 'R', 'A', 'Y', '\0'};
constexpr int kScenarioFormat = 1;

std::ofstream open_out(const fs::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const fs::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated file '" + path.string() + "'");
  return v;
}

std::string encode_spots(const std::vector<Circle>& spots) {
  std::string s;
  for (std::size_t i = 0; i < spots.size(); ++i) {
    if (i) s += ';';
    s += format_double(spots[i].cx) + ',' + format_double(spots[i].cy) + ',' + format_double(spots[i].radius) +
         ',' + format_double(spots[i].intensity);
  }
  return s;
}

std::vector<Circle> decode_spots(const std::string& s) {
  std::vector<Circle> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    std::stringstream is(item);
    std::string f[4];
    for (auto& x : f) {
      if (!std::getline(is, x, ',')) throw IoError("bad spot entry '" + item + "'");
    }
    out.push_back({parse_double(f[0]), parse_double(f[1]), parse_double(f[2]), parse_double(f[3])});
  }
  return out;
}

VectorXd to_vector(const std::vector<double>& v) { return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size())); }

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw IoError("not a number: '" + s + "'");
  }
  if (pos != s.size()) throw IoError("not a number: '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    throw IoError("not an unsigned integer: '" + s + "'");
  }
  if (pos != s.size() || s.empty() || s[0] == '-') throw IoError("not an unsigned integer: '" + s + "'");
  return v;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  auto out = open_out(path, false);
  for (const auto& [k, v] : manifest) out << k << " = " << v << '\n';
  if (!out) throw IoError("write failed: '" + path.string() + "'");
}

Manifest read_manifest(const fs::path& path) {
  auto in = open_in(path, false);
  Manifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw IoError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    if (!m.emplace(key, trim(line.substr(eq + 1))).second) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return m;
}

const std::string& manifest_get(const Manifest& manifest, const std::string& key) {
  auto it = manifest.find(key);
  if (it == manifest.end()) throw IoError("manifest lacks key '" + key + "'");
  return it->second;
}

void write_chain(const fs::path& path, const Chain& chain, const Manifest& extra) {
  auto out = open_out(path, true);
  out.write(kChainMagic, 8);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, chain.aborted ? kChainAborted : 0u);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(chain.samples.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(chain.samples.cols()));
  put<std::uint64_t>(out, chain.stride);
  put<std::uint64_t>(out, chain.seed);
  put<double>(out, chain.t_s);
  put<std::uint64_t>(out, 0);
  // Eigen stores column-major; write row by row.
  std::vector<double> row(static_cast<std::size_t>(chain.samples.cols()));
  for (Index i = 0; i < chain.samples.rows(); ++i) {
    for (Index j = 0; j < chain.samples.cols(); ++j) row[static_cast<std::size_t>(j)] = chain.samples(i, j);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed: '" + path.string() + "'");

  Manifest meta = extra;
  meta["sampler"] = chain.sampler;
  meta["unit"] = chain.unit;
  meta["updates_per_sample"] = std::to_string(chain.updates_per_sample);
  meta["burn_in"] = std::to_string(chain.burn_in);
  meta["total"] = std::to_string(chain.total);
  meta["stride"] = std::to_string(chain.stride);
  meta["seed"] = std::to_string(chain.seed);
  meta["t_s"] = format_double(chain.t_s);
  meta["kappa"] = format_double(chain.kappa);
  meta["acceptance_rate"] = format_double(chain.acceptance_rate);
  meta["final_sigma2"] = format_double(chain.final_sigma2);
  meta["aborted"] = chain.aborted ? "1" : "0";
  if (chain.aborted) meta["error"] = chain.error;
  write_manifest(fs::path(path.string() + ".meta"), meta);
}

StoredChain read_chain(const fs::path& path, bool load_samples) {
  auto in = open_in(path, true);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kChainMagic, 8) != 0) {
    throw IoError("'" + path.string() + "' is not a chain dump");
  }
  StoredChain sc;
  sc.header.version = get<std::uint32_t>(in, path);
  if (sc.header.version != 1) throw IoError("unsupported chain version " + std::to_string(sc.header.version));
  sc.header.flags = get<std::uint32_t>(in, path);
  sc.header.rows = get<std::uint64_t>(in, path);
  sc.header.cols = get<std::uint64_t>(in, path);
  sc.header.stride = get<std::uint64_t>(in, path);
  sc.header.seed = get<std::uint64_t>(in, path);
  sc.header.t_s = get<double>(in, path);
  (void)get<std::uint64_t>(in, path);
  if (load_samples) {
    sc.samples.resize(static_cast<Index>(sc.header.rows), static_cast<Index>(sc.header.cols));
    std::vector<double> row(sc.header.cols);
    for (Index i = 0; i < sc.samples.rows(); ++i) {
      if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)))) {
        throw IoError("truncated chain dump '" + path.string() + "'");
      }
      for (Index j = 0; j < sc.samples.cols(); ++j) sc.samples(i, j) = row[static_cast<std::size_t>(j)];
    }
  }
  const fs::path meta(path.string() + ".meta");
  if (fs::exists(meta)) sc.meta = read_manifest(meta);
  return sc;
}

void write_array(const fs::path& path, const std::vector<double>& values) {
  auto out = open_out(path, true);
  out.write(kArrayMagic, 8);
  put<std::uint64_t>(out, values.size());
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw IoError("write failed: '" + path.string() + "'");
}

void write_array(const fs::path& path, const VectorXd& values) {
  write_array(path, std::vector<double>(values.data(), values.data() + values.size()));
}

std::vector<double> read_array(const fs::path& path) {
  auto in = open_in(path, true);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kArrayMagic, 8) != 0) {
    throw IoError("'" + path.string() + "' is not an array file");
  }
  const auto len = get<std::uint64_t>(in, path);
  std::vector<double> v(len);
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(len * sizeof(double)))) {
    throw IoError("truncated array file '" + path.string() + "'");
  }
  return v;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw IoError("write_csv: header/column count mismatch");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != rows) throw IoError("write_csv: ragged columns");
  }
  auto out = open_out(path, false);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << format_double(columns[j][i]);
    out << '\n';
  }
  if (!out) throw IoError("write failed: '" + path.string() + "'");
}

Manifest scenario_manifest(const Scenario& s) {
  Manifest m;
  m["format"] = std::to_string(kScenarioFormat);
  m["kind"] = s.kind;
  m["n"] = std::to_string(s.model->n());
  m["k"] = std::to_string(s.model->k());
  m["lambda"] = format_double(s.model->lambda());
  m["noise_sigma"] = format_double(s.model->noise_sigma());
  m["operator"] = s.model->op().describe();
  if (s.kind == "1d") {
    const auto& c = s.config1d;
    m["L_u"] = std::to_string(c.L_u);
    m["L_m"] = std::to_string(c.L_m);
    m["lambda_rule"] = c.lambda.describe();
    m["seed"] = std::to_string(c.seed);
    m["prior"] = "tv";
    m["basis"] = "step";
  } else if (s.kind == "2d") {
    const auto& c = s.config2d;
    m["grid"] = std::to_string(c.grid);
    m["blur_sigma"] = format_double(c.blur_sigma);
    m["rel_noise"] = format_double(c.rel_noise);
    m["fine_factor"] = std::to_string(c.fine_factor);
    m["n_spots"] = std::to_string(c.spots.size());
    m["spots"] = encode_spots(c.spots);
    m["seed"] = std::to_string(c.seed);
    m["prior"] = "impulse";
    m["basis"] = "identity";
    m["boundary"] = "neumann (half-sample reflection)";
    m["grid_convention"] =
        "data and reconstruction share the coarse grid; pixel (i,j) covers [j/N,(j+1)/N]x[i/N,(i+1)/N]; "
        "data are block means of a blurred image on a grid fine_factor times finer";
  } else if (s.kind == "denoise") {
    const auto& c = s.config_denoise;
    m["seed"] = std::to_string(c.seed);
    m["prior"] = c.tv_prior ? "tv" : "impulse";
    m["basis"] = c.tv_prior ? "step" : "identity";
  } else {
    throw IoError("unknown scenario kind '" + s.kind + "'");
  }
  return m;
}

void save_scenario(const fs::path& dir, const Scenario& s) {
  fs::create_directories(dir);
  write_manifest(dir / "manifest.txt", scenario_manifest(s));
  write_array(dir / "data.bin", s.model->data());
  write_array(dir / "truth.bin", s.truth);
  write_array(dir / "clean.bin", s.clean);
}

Scenario load_scenario(const fs::path& dir) {
  const Manifest m = read_manifest(dir / "manifest.txt");
  if (manifest_get(m, "format") != std::to_string(kScenarioFormat)) throw IoError("unsupported scenario format");
  Scenario s;
  s.kind = manifest_get(m, "kind");
  VectorXd data = to_vector(read_array(dir / "data.bin"));
  s.truth = to_vector(read_array(dir / "truth.bin"));
  s.clean = to_vector(read_array(dir / "clean.bin"));
  const double sigma = parse_double(manifest_get(m, "noise_sigma"));
  const double lambda = parse_double(manifest_get(m, "lambda"));
  const std::uint64_t seed = parse_u64(manifest_get(m, "seed"));

  std::shared_ptr<const LinearOperator> op;
  SparseMatrixD d;
  std::vector<char> pen;
  bool step = false;
  Index n = 0;
  if (s.kind == "1d") {
    auto& c = s.config1d;
    c.L_u = static_cast<int>(parse_u64(manifest_get(m, "L_u")));
    c.L_m = static_cast<int>(parse_u64(manifest_get(m, "L_m")));
    c.lambda = LambdaRule::parse(manifest_get(m, "lambda_rule"));
    c.noise_sigma = sigma;
    c.seed = seed;
    c.validate();
    op = std::make_shared<SparseOperator>(ccd_matrix(c.L_u, c.L_m));
    n = op->cols();
    d = forward_difference(n);
    step = true;
  } else if (s.kind == "2d") {
    auto& c = s.config2d;
    c.grid = static_cast<int>(parse_u64(manifest_get(m, "grid")));
    c.blur_sigma = parse_double(manifest_get(m, "blur_sigma"));
    c.rel_noise = parse_double(manifest_get(m, "rel_noise"));
    c.fine_factor = static_cast<int>(parse_u64(manifest_get(m, "fine_factor")));
    c.lambda = lambda;
    c.spots = decode_spots(manifest_get(m, "spots"));
    c.n_spots = static_cast<int>(c.spots.size());
    c.seed = seed;
    c.validate();
    op = std::make_shared<Conv2DOperator>(c.grid, c.blur_sigma);
    n = op->cols();
    d.resize(n, n);
    d.setIdentity();
  } else if (s.kind == "denoise") {
    auto& c = s.config_denoise;
    c.n = static_cast<Index>(parse_u64(manifest_get(m, "n")));
    c.noise_sigma = sigma;
    c.lambda = lambda;
    c.tv_prior = manifest_get(m, "prior") == "tv";
    c.seed = seed;
    n = c.n;
    op = std::make_shared<IdentityOperator>(n);
    step = c.tv_prior;
    if (step) {
      d = forward_difference(n);
    } else {
      d.resize(n, n);
      d.setIdentity();
    }
  } else {
    throw IoError("unknown scenario kind '" + s.kind + "'");
  }
  if (data.size() != op->rows()) throw IoError("data.bin length does not match the operator");
  if (s.truth.size() != n) throw IoError("truth.bin length does not match n");
  pen.assign(static_cast<std::size_t>(n), 1);
  if (step) pen[0] = 0;
  s.model = std::make_shared<PosteriorModel>(op, std::move(data), sigma, lambda, std::move(d),
                                             step ? Basis::step(n) : Basis::identity(n), std::move(pen));
  return s;
}

}  // namespace l1gibbs
