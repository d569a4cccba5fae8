#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "l1gibbs/samplers.hpp"
#include "l1gibbs/scenarios.hpp"

namespace l1gibbs {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plain-text key = value file. Keys are unique; order is sorted.
using Manifest = std::map<std::string, std::string>;

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);
/// Throws IoError naming the key when absent.
const std::string& manifest_get(const Manifest& manifest, const std::string& key);

/// Round-trip exact decimal (%.17g).
std::string format_double(double v);
double parse_double(const std::string& s);
std::uint64_t parse_u64(const std::string& s);

/// Chain dump layout, little-endian:
///   0  char[8] "L1CHAIN\0"   8 u32 version   12 u32 flags
///   16 u64 K   24 u64 n   32 u64 stride   40 u64 seed   48 f64 t_s   56 u64 0
/// followed by K*n doubles, row-major.
struct ChainHeader {
  std::uint32_t version = 1;
  std::uint32_t flags = 0;  // bit 0: chain aborted
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint64_t stride = 1;
  std::uint64_t seed = 0;
  double t_s = 0.0;
};

inline constexpr std::uint32_t kChainAborted = 1u;

struct StoredChain {
  ChainHeader header;
  MatrixXd samples;
  Manifest meta;  // sidecar <file>.meta
};

/// Writes the dump and its sidecar; `extra` entries are added to the sidecar.
void write_chain(const std::filesystem::path& path, const Chain& chain, const Manifest& extra = {});
StoredChain read_chain(const std::filesystem::path& path, bool load_samples = true);

/// "L1ARRAY\0", u64 length, doubles.
void write_array(const std::filesystem::path& path, const std::vector<double>& values);
void write_array(const std::filesystem::path& path, const VectorXd& values);
std::vector<double> read_array(const std::filesystem::path& path);

/// One header row, then rows of equal-length columns.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

/// manifest.txt plus data.bin, truth.bin, clean.bin in `dir`.
void save_scenario(const std::filesystem::path& dir, const Scenario& scenario);
/// Rebuilds the operator from the manifest and takes data, truth and noise
/// level from the stored files, so the model matches the saved one bit for bit.
Scenario load_scenario(const std::filesystem::path& dir);

Manifest scenario_manifest(const Scenario& scenario);

}  // namespace l1gibbs
