#pragma once

// Clean-room re-implementation of the documented generation protocols, used
// as an independent oracle against stacca::generate. Kept deliberately naive.

#include <algorithm>
#include <set>
#include <utility>
#include <vector>

#include "stacca/rng.hpp"

namespace stacca::testing {

struct RefGraph {
  int num_nodes = 0;
  std::set<std::pair<int, int>> edges;  // canonical i < j
};

// Barabasi-Albert, star seed core on m+1 nodes, repeated-endpoints sampling,
// m distinct targets per new node.
inline RefGraph reference_ba(int n, int m, std::uint64_t seed) {
  RngStream rng(seed, Stream::GraphGen);
  RefGraph g;
  g.num_nodes = n;
  std::vector<int> repeated;
  auto add_edge = [&](int a, int b) {
    g.edges.insert({std::min(a, b), std::max(a, b)});
    repeated.push_back(a);
    repeated.push_back(b);
  };
  for (int v = 1; v <= m && v < n; ++v) add_edge(0, v);
  for (int v = m + 1; v < n; ++v) {
    std::vector<int> targets;
    while (static_cast<int>(targets.size()) < m) {
      const int pick = repeated[static_cast<size_t>(
          rng.next_int(static_cast<int>(repeated.size())))];
      bool seen = false;
      for (int t : targets) seen = seen || t == pick;
      if (!seen) targets.push_back(pick);
    }
    for (int t : targets) add_edge(t, v);
  }
  return g;
}

inline std::vector<int> degree_histogram(const RefGraph& g) {
  std::vector<int> degree(static_cast<size_t>(g.num_nodes), 0);
  for (const auto& [a, b] : g.edges) {
    ++degree[static_cast<size_t>(a)];
    ++degree[static_cast<size_t>(b)];
  }
  const int max_deg = *std::max_element(degree.begin(), degree.end());
  std::vector<int> hist(static_cast<size_t>(max_deg) + 1, 0);
  for (int d : degree) ++hist[static_cast<size_t>(d)];
  return hist;
}

}  // namespace stacca::testing
