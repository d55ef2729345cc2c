#include "stacca/graph.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "stacca/errors.hpp"
#include "stacca/rng.hpp"

namespace stacca {

Graph Graph::from_edges(int num_nodes, std::vector<std::pair<int, int>> edges) {
  if (num_nodes < 0) throw config_error("graph: negative node count");
  for (auto& [a, b] : edges) {
    if (a == b) throw config_error("graph: self-loop at node " + std::to_string(a));
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes)
      throw config_error("graph: edge endpoint out of range");
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw config_error("graph: duplicate edge");

  Graph g;
  g.num_nodes = num_nodes;
  g.edges = std::move(edges);
  g.adjacency.assign(num_nodes, {});
  for (const auto& [a, b] : g.edges) {
    g.adjacency[a].push_back(b);
    g.adjacency[b].push_back(a);
  }
  for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
  return g;
}

bool Graph::has_edge(int i, int j) const {
  const auto& nbrs = adjacency[i];
  return std::binary_search(nbrs.begin(), nbrs.end(), j);
}

bool Graph::connected() const {
  if (num_nodes == 0) return true;
  std::vector<int> dist = bfs_distances(*this, 0);
  return std::find(dist.begin(), dist.end(), num_nodes) == dist.end();
}

namespace {

void validate(const GraphSpec& spec) {
  if (spec.num_nodes <= 0) throw config_error("graph spec: num_nodes must be positive");
  if (spec.family == GraphFamily::BarabasiAlbert) {
    if (spec.ba_m < 1 || spec.ba_m >= spec.num_nodes)
      throw config_error("graph spec: BA requires 1 <= m < num_nodes");
  } else {
    if (spec.ws_k <= 0 || spec.ws_k % 2 != 0 || spec.ws_k >= spec.num_nodes)
      throw config_error("graph spec: WS requires even k < num_nodes");
    if (spec.ws_p < 0.0 || spec.ws_p > 1.0)
      throw config_error("graph spec: WS rewire probability outside [0,1]");
  }
}

// Preferential attachment with a star seed core (node 0 joined to 1..m) and
// the repeated-endpoints list for degree-proportional sampling.
Graph generate_ba(const GraphSpec& spec) {
  RngStream rng(spec.seed, Stream::GraphGen);
  const int n = spec.num_nodes;
  const int m = spec.ba_m;

  std::vector<std::pair<int, int>> edges;
  std::vector<int> repeated;
  edges.reserve(static_cast<size_t>(m) * n);
  for (int v = 1; v <= m && v < n; ++v) {
    edges.emplace_back(0, v);
    repeated.push_back(0);
    repeated.push_back(v);
  }
  for (int v = m + 1; v < n; ++v) {
    std::vector<int> targets;
    while (static_cast<int>(targets.size()) < m) {
      int candidate = repeated[rng.next_int(static_cast<int>(repeated.size()))];
      if (std::find(targets.begin(), targets.end(), candidate) == targets.end())
        targets.push_back(candidate);
    }
    for (int t : targets) {
      edges.emplace_back(t, v);
      repeated.push_back(t);
      repeated.push_back(v);
    }
  }
  return Graph::from_edges(n, std::move(edges));
}

Graph generate_ws_once(const GraphSpec& spec, std::uint64_t seed) {
  RngStream rng(seed, Stream::GraphGen);
  const int n = spec.num_nodes;
  const int half_k = spec.ws_k / 2;

  std::set<std::pair<int, int>> edge_set;
  auto canon = [](int a, int b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); };
  for (int j = 1; j <= half_k; ++j)
    for (int i = 0; i < n; ++i) edge_set.insert(canon(i, (i + j) % n));

  // rewire pass, one lattice offset at a time
  for (int j = 1; j <= half_k; ++j) {
    for (int i = 0; i < n; ++i) {
      if (rng.next_double() >= spec.ws_p) continue;
      int old_target = (i + j) % n;
      if (!edge_set.count(canon(i, old_target))) continue;  // already rewired away
      // pick a fresh endpoint; give up on this edge if the node is saturated
      int new_target = -1;
      for (int attempt = 0; attempt < 4 * n; ++attempt) {
        int candidate = rng.next_int(n);
        if (candidate == i || edge_set.count(canon(i, candidate))) continue;
        new_target = candidate;
        break;
      }
      if (new_target < 0) continue;
      edge_set.erase(canon(i, old_target));
      edge_set.insert(canon(i, new_target));
    }
  }
  return Graph::from_edges(n, {edge_set.begin(), edge_set.end()});
}

Graph generate_ws(const GraphSpec& spec) {
  // both environments assume spreading can reach every node
  for (int retry = 0; retry < 100; ++retry) {
    Graph g = generate_ws_once(spec, spec.seed + static_cast<std::uint64_t>(retry));
    if (g.connected()) return g;
  }
  throw artifact_error("graph: WS generation failed to produce a connected graph in 100 retries");
}

}  // namespace

Graph generate(const GraphSpec& spec) {
  validate(spec);
  return spec.family == GraphFamily::BarabasiAlbert ? generate_ba(spec)
                                                    : generate_ws(spec);
}

std::vector<int> bfs_distances(const Graph& g, int source) {
  if (source < 0 || source >= g.num_nodes)
    throw config_error("bfs: source index out of range");
  std::vector<int> dist(g.num_nodes, g.num_nodes);
  dist[source] = 0;
  std::deque<int> queue{source};
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int v : g.adjacency[u]) {
      if (dist[v] > dist[u] + 1) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

Subgraph k_hop_subgraph(const Graph& g, int ego, int k) {
  if (ego < 0 || ego >= g.num_nodes)
    throw config_error("k_hop_subgraph: ego index out of range");
  if (k < 0) throw config_error("k_hop_subgraph: negative hop count");

  std::vector<int> dist = bfs_distances(g, ego);
  Subgraph sub;
  std::vector<int> local_of(g.num_nodes, -1);
  for (int v = 0; v < g.num_nodes; ++v) {
    if (dist[v] <= k) {
      local_of[v] = static_cast<int>(sub.node_map.size());
      sub.node_map.push_back(v);
    }
  }
  std::vector<std::pair<int, int>> edges;
  for (const auto& [a, b] : g.edges)
    if (local_of[a] >= 0 && local_of[b] >= 0)
      edges.emplace_back(local_of[a], local_of[b]);
  sub.graph = Graph::from_edges(static_cast<int>(sub.node_map.size()), std::move(edges));
  sub.ego_local = local_of[ego];
  return sub;
}

std::vector<int> degrees(const Graph& g) {
  std::vector<int> out(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) out[i] = g.degree(i);
  return out;
}

void save_edge_list(const Graph& g, std::ostream& out) {
  out << g.num_nodes << "\n";
  for (const auto& [a, b] : g.edges) out << a << " " << b << "\n";
}

Graph load_edge_list(std::istream& in) {
  int n = 0;
  if (!(in >> n)) throw artifact_error("edge list: missing node count");
  std::vector<std::pair<int, int>> edges;
  int a = 0, b = 0;
  while (in >> a >> b) edges.emplace_back(a, b);
  return Graph::from_edges(n, std::move(edges));
}

}  // namespace stacca
