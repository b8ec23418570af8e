// SPDX-License-Identifier: Apache-2.0
#include "m2g2/init.hpp"

#include <cmath>
#include <random>

namespace m2g2 {

std::uint64_t stream_id(std::string_view name) {
  // FNV-1a
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Tensor seeded_init(std::size_t rows, std::size_t cols, std::uint64_t seed, InitScheme scheme,
                   std::uint64_t stream) {
  Tensor out(rows, cols);
  if (scheme == InitScheme::zeros || out.empty()) return out;

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : out.values()) v = dist(rng);
  return out;
}

}  // namespace m2g2
