#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uqa/dist.hpp"
#include "uqa/hash.hpp"

namespace testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("uqa-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Random probability vector. Mixes flat, peaked and sparse shapes so that
/// generated cases cover near-uniform and near-degenerate distributions.
inline std::vector<double> random_probs(uqa::Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  const auto shape = rng.below(3);
  for (auto& x : w) {
    const double u = rng.uniform();
    if (shape == 0) {
      x = u;
    } else if (shape == 1) {
      x = std::exp(6.0 * rng.normal());
    } else {
      x = u < 0.3 ? 0.0 : u * u * u;
    }
  }
  w[rng.below(n)] += 1e-3;  // never all zero
  double total = 0.0;
  for (double x : w) total += x;
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace testing
