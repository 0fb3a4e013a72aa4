#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace focus {

using Rng = std::mt19937_64;

/// Derives an independent seed for one stochastic stage ("init", "shuffle",
/// "synth", ...) from the run seed. FNV-1a over the label, then a splitmix64
/// finalizer over the combination.
inline std::uint64_t stage_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (h | 1ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng stage_rng(std::uint64_t seed, std::string_view label) {
  return Rng(stage_seed(seed, label));
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gaussian_matrix(
    Eigen::Index rows, Eigen::Index cols, Rng& rng, Scalar sigma = Scalar(1)) {
  std::normal_distribution<Scalar> dist(Scalar(0), sigma);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> uniform_matrix(
    Eigen::Index rows, Eigen::Index cols, Rng& rng, Scalar bound) {
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

}  // namespace focus
