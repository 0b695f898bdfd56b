#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfai/mfai.hpp"

namespace mfai::testing {

inline double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double den = std::sqrt((da * da).sum() * (db * db).sum());
  return den > 0.0 ? (da * db).sum() / den : 0.0;
}

/// Gaussian N x M matrix with roughly `missing` of the cells dropped.
inline MaskedMatrix random_matrix(std::size_t n, std::size_t m, double missing,
                                  std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<Entry> entries;
  for (std::uint32_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < m; ++c) {
      const double v = scale * rng.normal();
      if (rng.uniform() >= missing) entries.push_back({r, c, v});
    }
  }
  if (entries.empty()) entries.push_back({0, 0, 1.0});
  return MaskedMatrix(n, m, std::move(entries));
}

/// Numeric covariates ~ U(-10, 10); cells missing with probability `missing`.
inline AuxTable random_aux(std::size_t n, std::size_t c, std::uint64_t seed,
                           double missing = 0.0) {
  Rng rng(seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      x(i, j) = rng.uniform(-10.0, 10.0);
      if (missing > 0.0 && rng.uniform() < missing) x(i, j) = std::nan("");
    }
  }
  return AuxTable::numeric(x);
}

/// A random factor state consistent with an N x M problem.
inline FactorState random_state(std::size_t n, std::size_t m, std::size_t c, bool per_feature,
                                std::uint64_t seed) {
  Rng rng(seed);
  const auto N = static_cast<Eigen::Index>(n);
  const auto M = static_cast<Eigen::Index>(m);
  FactorState s;
  s.mu.resize(N);
  s.a2.resize(N);
  s.fx.resize(N);
  s.nu.resize(M);
  s.b2.resize(M);
  for (Eigen::Index i = 0; i < N; ++i) {
    s.mu(i) = rng.normal();
    s.a2(i) = 0.1 + rng.uniform();
    s.fx(i) = rng.normal();
  }
  for (Eigen::Index j = 0; j < M; ++j) {
    s.nu(j) = rng.normal();
    s.b2(j) = 0.1 + rng.uniform();
  }
  s.tau = per_feature ? Eigen::VectorXd(M) : Eigen::VectorXd(1);
  for (Eigen::Index j = 0; j < s.tau.size(); ++j) s.tau(j) = 0.5 + rng.uniform();
  s.beta = 0.5 + rng.uniform();
  s.f = TreeEnsemble(c);
  return s;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mfai_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

}  // namespace mfai::testing
