#include "stacca/graph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "stacca/errors.hpp"
#include "stacca/rng.hpp"
#include "support/reference_graph.hpp"

using namespace stacca;

namespace {

Graph path_graph(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return Graph::from_edges(n, std::move(edges));
}

Graph star_graph(int leaves) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i <= leaves; ++i) edges.emplace_back(0, i);
  return Graph::from_edges(leaves + 1, std::move(edges));
}

void check_invariants(const Graph& g) {
  int degree_sum = 0;
  for (int i = 0; i < g.num_nodes; ++i) {
    for (int j : g.adjacency[i]) {
      ASSERT_NE(i, j) << "self-loop";
      ASSERT_TRUE(g.has_edge(j, i)) << "asymmetric adjacency";
    }
    degree_sum += g.degree(i);
  }
  EXPECT_EQ(degree_sum, 2 * g.num_edges());  // handshake lemma
  for (const auto& [a, b] : g.edges) EXPECT_LT(a, b);
  EXPECT_TRUE(std::is_sorted(g.edges.begin(), g.edges.end()));
}

}  // namespace

TEST(GraphCore, FromEdgesRejectsBadInput) {
  EXPECT_THROW(Graph::from_edges(3, {{0, 0}}), config_error);
  EXPECT_THROW(Graph::from_edges(3, {{0, 3}}), config_error);
  EXPECT_THROW(Graph::from_edges(3, {{0, 1}, {1, 0}}), config_error);
}

TEST(GraphCore, BaM1IsATree) {
  GraphSpec spec;
  spec.family = GraphFamily::BarabasiAlbert;
  spec.num_nodes = 50;
  spec.ba_m = 1;
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 9999ULL}) {
    spec.seed = seed;
    const Graph g = generate(spec);
    EXPECT_EQ(g.num_edges(), 49);
    EXPECT_TRUE(g.connected());
    check_invariants(g);
  }
}

TEST(GraphCore, WsNoRewireIsRingLattice) {
  GraphSpec spec;
  spec.family = GraphFamily::WattsStrogatz;
  spec.num_nodes = 10;
  spec.ws_k = 4;
  spec.ws_p = 0.0;
  spec.seed = 3;
  const Graph g = generate(spec);
  EXPECT_EQ(g.num_edges(), 20);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(g.degree(i), 4);
  check_invariants(g);
}

TEST(GraphCore, WsRewiredKeepsEdgeCountAndConnectivity) {
  GraphSpec spec;
  spec.family = GraphFamily::WattsStrogatz;
  spec.num_nodes = 30;
  spec.ws_k = 4;
  spec.ws_p = 0.5;
  for (std::uint64_t seed : {0ULL, 7ULL, 123ULL}) {
    spec.seed = seed;
    const Graph g = generate(spec);
    EXPECT_EQ(g.num_edges(), 60);
    EXPECT_TRUE(g.connected());
    check_invariants(g);
  }
}

// Frozen from the clean-room reference generator (support/reference_graph.hpp)
// run once with this exact seed protocol.
TEST(GraphCore, BaM2MatchesReferenceOracle) {
  GraphSpec spec;
  spec.family = GraphFamily::BarabasiAlbert;
  spec.num_nodes = 100;
  spec.ba_m = 2;
  spec.seed = 7;
  const Graph g = generate(spec);
  EXPECT_EQ(g.num_edges(), 196);  // 2 seed-star edges + 97 * 2 attachments

  const auto ref = stacca::testing::reference_ba(100, 2, 7);
  const std::set<std::pair<int, int>> mine(g.edges.begin(), g.edges.end());
  EXPECT_EQ(mine, ref.edges);

  const auto hist = stacca::testing::degree_histogram(ref);
  std::vector<int> my_hist(hist.size(), 0);
  for (int i = 0; i < g.num_nodes; ++i) {
    ASSERT_LT(static_cast<size_t>(g.degree(i)), hist.size());
    ++my_hist[static_cast<size_t>(g.degree(i))];
  }
  EXPECT_EQ(my_hist, hist);
}

TEST(GraphCore, GenerationIsBitReproducible) {
  GraphSpec spec;
  spec.family = GraphFamily::BarabasiAlbert;
  spec.num_nodes = 64;
  spec.ba_m = 2;
  spec.seed = 11;
  EXPECT_EQ(generate(spec).edges, generate(spec).edges);
  spec.family = GraphFamily::WattsStrogatz;
  spec.ws_p = 0.3;
  EXPECT_EQ(generate(spec).edges, generate(spec).edges);
}

TEST(GraphCore, SpecValidation) {
  GraphSpec spec;
  spec.num_nodes = 10;
  spec.ba_m = 0;
  EXPECT_THROW(generate(spec), config_error);
  spec.ba_m = 10;
  EXPECT_THROW(generate(spec), config_error);
  spec.family = GraphFamily::WattsStrogatz;
  spec.ws_k = 3;  // odd
  EXPECT_THROW(generate(spec), config_error);
  spec.ws_k = 4;
  spec.ws_p = 1.5;
  EXPECT_THROW(generate(spec), config_error);
}

TEST(GraphCore, BfsDistances) {
  const Graph path = path_graph(4);
  EXPECT_EQ(bfs_distances(path, 0), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(bfs_distances(path, 2)[2], 0);

  const Graph star = star_graph(4);
  const auto dist = bfs_distances(star, 0);
  for (int leaf = 1; leaf <= 4; ++leaf) EXPECT_EQ(dist[leaf], 1);

  const Graph disconnected = Graph::from_edges(4, {{0, 1}});
  const auto d = bfs_distances(disconnected, 0);
  EXPECT_EQ(d[2], 4);  // sentinel = num_nodes
  EXPECT_EQ(d[3], 4);

  EXPECT_THROW(bfs_distances(path, 9), config_error);
}

TEST(GraphCore, KHopSubgraph) {
  const Graph path = path_graph(4);

  const Subgraph zero = k_hop_subgraph(path, 2, 0);
  EXPECT_EQ(zero.graph.num_nodes, 1);
  EXPECT_EQ(zero.graph.num_edges(), 0);
  EXPECT_EQ(zero.node_map, (std::vector<int>{2}));
  EXPECT_EQ(zero.ego_local, 0);

  const Subgraph one = k_hop_subgraph(path, 1, 1);
  EXPECT_EQ(one.node_map, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(one.graph.edges,
            (std::vector<std::pair<int, int>>{{0, 1}, {1, 2}}));
  EXPECT_EQ(one.node_map[one.ego_local], 1);

  GraphSpec ws;
  ws.family = GraphFamily::WattsStrogatz;
  ws.num_nodes = 10;
  ws.ws_k = 4;
  ws.ws_p = 0.0;
  const Subgraph ring_hop = k_hop_subgraph(generate(ws), 0, 1);
  EXPECT_EQ(ring_hop.graph.num_nodes, 5);  // ego + 4 ring neighbors

  EXPECT_THROW(k_hop_subgraph(path, 7, 1), config_error);
}

// cross-check: k-hop node set equals the BFS <= k level set
TEST(GraphCore, KHopMatchesBfsLevels) {
  GraphSpec spec;
  spec.family = GraphFamily::BarabasiAlbert;
  spec.num_nodes = 50;
  spec.ba_m = 2;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    spec.seed = seed;
    const Graph g = generate(spec);
    for (int ego = 0; ego < g.num_nodes; ego += 7) {
      for (int k = 0; k <= 3; ++k) {
        const auto dist = bfs_distances(g, ego);
        std::vector<int> expected;
        for (int v = 0; v < g.num_nodes; ++v)
          if (dist[v] <= k) expected.push_back(v);
        EXPECT_EQ(k_hop_subgraph(g, ego, k).node_map, expected);
      }
    }
  }
}

TEST(GraphCore, Degrees) {
  const Graph empty = Graph::from_edges(3, {});
  EXPECT_EQ(degrees(empty), (std::vector<int>{0, 0, 0}));

  GraphSpec ba;
  ba.num_nodes = 50;
  ba.ba_m = 1;
  ba.seed = 5;
  const auto deg = degrees(generate(ba));
  EXPECT_EQ(std::accumulate(deg.begin(), deg.end(), 0), 98);

  GraphSpec ws;
  ws.family = GraphFamily::WattsStrogatz;
  ws.num_nodes = 12;
  ws.ws_k = 4;
  ws.ws_p = 0.0;
  for (int d : degrees(generate(ws))) EXPECT_EQ(d, 4);
}

TEST(GraphCore, EdgeListRoundTrip) {
  GraphSpec spec;
  spec.num_nodes = 30;
  spec.ba_m = 2;
  spec.seed = 17;
  const Graph g = generate(spec);

  std::stringstream buf;
  save_edge_list(g, buf);
  const std::string text = buf.str();
  EXPECT_EQ(text.substr(0, 3), "30\n");

  std::stringstream in(text);
  const Graph loaded = load_edge_list(in);
  EXPECT_EQ(loaded.num_nodes, g.num_nodes);
  EXPECT_EQ(loaded.edges, g.edges);

  std::stringstream again;
  save_edge_list(loaded, again);
  EXPECT_EQ(again.str(), text);
}
