#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

namespace stacca {

/// Undirected simple graph over contiguous node indices 0..num_nodes-1.
/// Immutable after construction; edges are kept in canonical form
/// (first < second, pairs sorted ascending) so saved graphs diff cleanly.
struct Graph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> adjacency;  // sorted neighbor lists

  static Graph from_edges(int num_nodes, std::vector<std::pair<int, int>> edges);

  int num_edges() const { return static_cast<int>(edges.size()); }
  int degree(int i) const { return static_cast<int>(adjacency[i].size()); }
  bool has_edge(int i, int j) const;
  bool connected() const;
};

enum class GraphFamily { BarabasiAlbert, WattsStrogatz };

struct GraphSpec {
  GraphFamily family = GraphFamily::BarabasiAlbert;
  int num_nodes = 0;
  std::uint64_t seed = 0;
  int ba_m = 1;       // BA: edges added per new node, 1 <= m < num_nodes
  int ws_k = 4;       // WS: ring degree, even, < num_nodes
  double ws_p = 0.1;  // WS: rewire probability
};

/// Deterministic generation from (family parameters, seed). BA graphs are
/// connected by construction; a disconnected WS draw is regenerated with
/// seed+1, up to 100 retries.
Graph generate(const GraphSpec& spec);

struct Subgraph {
  Graph graph;
  std::vector<int> node_map;  // subgraph index -> original index
  int ego_local = 0;
};

/// Induced subgraph on the closed k-hop neighborhood of ego.
Subgraph k_hop_subgraph(const Graph& g, int ego, int k);

/// Unweighted hop distances from source; unreachable nodes get num_nodes.
std::vector<int> bfs_distances(const Graph& g, int source);

std::vector<int> degrees(const Graph& g);

/// Edge-list text format: first line "N", then one "i j" line per edge with
/// i < j, lines in ascending pair order.
void save_edge_list(const Graph& g, std::ostream& out);
Graph load_edge_list(std::istream& in);

}  // namespace stacca
