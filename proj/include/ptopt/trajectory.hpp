#pragma once

#include <stdexcept>
#include <vector>

#include "ptopt/smallmat.hpp"

namespace ptopt {

/// Normalized-time grid on [0, 1], endpoints exact, strictly increasing.
struct Grid {
  std::vector<double> nodes;

  explicit Grid(std::vector<double> taus) : nodes(std::move(taus)) {
    if (nodes.size() < 2) throw std::invalid_argument("grid needs at least two nodes");
    if (nodes.front() != 0.0 || nodes.back() != 1.0)
      throw std::invalid_argument("grid must start at 0 and end at 1");
    for (std::size_t k = 1; k < nodes.size(); ++k)
      if (!(nodes[k] > nodes[k - 1]))
        throw std::invalid_argument("grid nodes must be strictly increasing");
  }

  static Grid uniform(int n) {
    if (n < 2) throw std::invalid_argument("grid needs at least two nodes");
    std::vector<double> taus(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) taus[static_cast<std::size_t>(k)] = static_cast<double>(k) / (n - 1);
    taus.front() = 0.0;
    taus.back() = 1.0;
    return Grid(std::move(taus));
  }

  int size() const { return static_cast<int>(nodes.size()); }
  int intervals() const { return size() - 1; }
};

/// Node values of the augmented state and control, one entry per grid node.
template <int NX, int NU>
struct Trajectory {
  std::vector<Vec<NX>> x;
  std::vector<Vec<NU>> u;
  int iteration = 0;

  Trajectory() = default;
  explicit Trajectory(int n)
      : x(static_cast<std::size_t>(n)), u(static_cast<std::size_t>(n)) {}

  int nodes() const { return static_cast<int>(x.size()); }
};

}  // namespace ptopt
