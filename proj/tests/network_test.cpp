#include "modeshift/network.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <thread>

#include "fixtures.hpp"
#include "modeshift/synth.hpp"
#include "oracles/paths.hpp"

using namespace modeshift;
using modeshift::testing::TempDir;
using modeshift::testing::write_text;

namespace {

std::string const kMinimal = R"({
  "nodes": [{"id": "a"}, {"id": "b"}],
  "edges": [{"id": "e1", "from": "a", "to": "b", "length_m": 100, "free_speed_mps": 10,
             "lanes": 2}],
  "zones": [{"id": "z", "edges": ["e1"]}]
})";

ErrorCode code_of(std::string const& text) {
  try {
    parse_network(text, "net.json");
  } catch (Error const& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kIo;
}

// Triangle a->b->c with a slow direct edge a->c.
NetworkGraph triangle() {
  return parse_network(R"({
    "nodes": [{"id": "a"}, {"id": "b"}, {"id": "c"}, {"id": "s"}, {"id": "t"}],
    "edges": [
      {"id": "in", "from": "s", "to": "a", "length_m": 10, "free_speed_mps": 10, "lanes": 1},
      {"id": "ab", "from": "a", "to": "b", "length_m": 100, "free_speed_mps": 20, "lanes": 1},
      {"id": "bc", "from": "b", "to": "c", "length_m": 100, "free_speed_mps": 20, "lanes": 1},
      {"id": "ac", "from": "a", "to": "c", "length_m": 300, "free_speed_mps": 10, "lanes": 1},
      {"id": "out", "from": "c", "to": "t", "length_m": 10, "free_speed_mps": 10, "lanes": 1}
    ],
    "zones": [{"id": "z", "edges": ["in", "out"]}]
  })");
}

}  // namespace

TEST(LoadNetwork, MinimalFile) {
  TempDir dir;
  write_text(dir / "net.json", kMinimal);
  auto const g = load_network(dir / "net.json");
  ASSERT_EQ(g.edges().size(), 1u);
  EXPECT_EQ(g.nodes().size(), 2u);
  EXPECT_DOUBLE_EQ(g.edge(0).free_flow_time(), 10.0);
  EXPECT_DOUBLE_EQ(g.edge(0).capacity, 2 * kDefaultLaneCapacityVph);
}

TEST(LoadNetwork, ZoneWithMissingEdgeNamesIt) {
  auto text = kMinimal;
  text.replace(text.find("[\"e1\"]"), 6, "[\"e9\"]");
  try {
    parse_network(text, "net.json");
    FAIL() << "expected an error";
  } catch (Error const& e) {
    EXPECT_EQ(e.code(), ErrorCode::kReferentialIntegrity);
    EXPECT_NE(std::string{e.what()}.find("e9"), std::string::npos);
  }
}

TEST(LoadNetwork, SchemaAndDomainErrors) {
  // malformed JSON reports a line
  try {
    parse_network("{\n\"nodes\": [\n}", "net.json");
    FAIL() << "expected an error";
  } catch (Error const& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
    EXPECT_NE(std::string{e.what()}.find("line"), std::string::npos);
  }
  // missing field names the field
  auto no_length = kMinimal;
  no_length.replace(no_length.find("\"length_m\": 100, "), 17, "");
  try {
    parse_network(no_length, "net.json");
    FAIL() << "expected an error";
  } catch (Error const& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
    EXPECT_NE(std::string{e.what()}.find("edges[0].length_m"), std::string::npos);
  }
  auto zero_speed = kMinimal;
  zero_speed.replace(zero_speed.find("\"free_speed_mps\": 10"), 20, "\"free_speed_mps\": 0");
  EXPECT_EQ(code_of(zero_speed), ErrorCode::kDomain);
  auto bad_node = kMinimal;
  bad_node.replace(bad_node.find("\"to\": \"b\""), 9, "\"to\": \"q\"");
  EXPECT_EQ(code_of(bad_node), ErrorCode::kReferentialIntegrity);
  auto dup_node = kMinimal;
  dup_node.replace(dup_node.find("{\"id\": \"b\"}"), 11, "{\"id\": \"a\"}");
  EXPECT_EQ(code_of(dup_node), ErrorCode::kFormat);
  auto empty_zone = kMinimal;
  empty_zone.replace(empty_zone.find("[\"e1\"]"), 6, "[]");
  EXPECT_EQ(code_of(empty_zone), ErrorCode::kFormat);
}

TEST(LoadNetwork, GeneratedGridMatchesGeneratorCounts) {
  for (auto const& spec : {synth::GridSpec{1, 51}, synth::GridSpec{5, 6},
                           synth::GridSpec{23, 23, 200, 13.9, 1, 6, 6},
                           synth::GridSpec{7, 3, 150, 10, 2, 2, 3}}) {
    TempDir dir;
    write_text(dir / "grid.json", synth::grid_json(spec).dump(1));
    auto const g = load_network(dir / "grid.json");
    auto const counts = synth::expected_counts(spec);
    EXPECT_EQ(g.nodes().size(), counts.nodes);
    EXPECT_EQ(g.edges().size(), counts.edges);
    EXPECT_EQ(g.zones().size(), counts.zones);
    std::size_t zoned = 0;
    for (std::size_t z = 0; z < g.zones().size(); ++z) zoned += g.zone_edges(z).size();
    EXPECT_EQ(zoned, counts.edges);
  }
  EXPECT_EQ(synth::expected_counts({1, 51}).edges, 100u);
  EXPECT_EQ(synth::expected_counts({23, 23}).edges, 2024u);
}

TEST(LoadNetwork, RoundTripThroughJson) {
  auto const g = synth::make_grid({4, 5, 120, 11, 1, 2, 2});
  auto const again = parse_network(network_to_json(g).dump(), "again");
  ASSERT_EQ(again.edges().size(), g.edges().size());
  for (EdgeIndex e = 0; e < g.edges().size(); ++e) {
    EXPECT_EQ(again.edge(e).edge_id, g.edge(e).edge_id);
    EXPECT_EQ(again.edge(e).capacity, g.edge(e).capacity);
  }
}

TEST(ShortestPath, IdentityIsSingleEdge) {
  auto const g = triangle();
  EXPECT_EQ(shortest_path(g, "ab", "ab"), (std::vector<std::string>{"ab"}));
  Router router{g};
  EXPECT_EQ(router.cost(g.require_edge("ab"), g.require_edge("ab")), 0.0);
}

TEST(ShortestPath, TwoHopBeatsSlowDirectEdge) {
  auto const g = triangle();
  EXPECT_EQ(shortest_path(g, "in", "out"),
            (std::vector<std::string>{"in", "ab", "bc", "out"}));
}

TEST(ShortestPath, UnreachableIsNoPathError) {
  auto const g = triangle();
  try {
    shortest_path(g, "out", "in");
    FAIL() << "expected an error";
  } catch (Error const& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoPath);
  }
}

TEST(ShortestPath, TiesBreakOnEdgeIdSequence) {
  // Two equal-cost routes s->t: via "b..." and via "a...".
  auto const g = parse_network(R"({
    "nodes": [{"id": "s"}, {"id": "m1"}, {"id": "m2"}, {"id": "t"}, {"id": "u"}],
    "edges": [
      {"id": "start", "from": "u", "to": "s", "length_m": 10, "free_speed_mps": 10, "lanes": 1},
      {"id": "b1", "from": "s", "to": "m1", "length_m": 100, "free_speed_mps": 10, "lanes": 1},
      {"id": "a1", "from": "s", "to": "m2", "length_m": 100, "free_speed_mps": 10, "lanes": 1},
      {"id": "b2", "from": "m1", "to": "t", "length_m": 100, "free_speed_mps": 10, "lanes": 1},
      {"id": "a2", "from": "m2", "to": "t", "length_m": 100, "free_speed_mps": 10, "lanes": 1},
      {"id": "end", "from": "t", "to": "u", "length_m": 10, "free_speed_mps": 10, "lanes": 1}
    ],
    "zones": [{"id": "z", "edges": ["start"]}]
  })");
  EXPECT_EQ(shortest_path(g, "start", "end"),
            (std::vector<std::string>{"start", "a1", "a2", "end"}));
}

TEST(ShortestPath, RandomGraphsMatchExhaustiveEnumeration) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    auto const g = synth::random_network({12, 50}, seed);
    Router router{g};
    std::size_t compared = 0;
    for (EdgeIndex o = 0; o < g.edges().size(); o += 3) {
      for (EdgeIndex d = 0; d < g.edges().size(); d += 4) {
        auto const fast = router.cost(o, d);
        auto const brute = oracle::enumerate_min_cost(g, o, d, 8);
        ASSERT_TRUE(std::isfinite(fast));  // ring keeps the graph strongly connected
        EXPECT_LE(fast, brute + 1e-9);
        auto const path = router.path(o, d);
        EXPECT_NEAR(path_cost(g, path), fast, 1e-9);
        if (path.size() <= 8) {
          EXPECT_NEAR(brute, fast, 1e-9) << "seed " << seed << " o " << o << " d " << d;
          ++compared;
        }
      }
    }
    EXPECT_GT(compared, 100u);
  }
}

TEST(ShortestPath, CostsAreNonNegativeAndSatisfyTriangleInequality) {
  auto const g = synth::random_network({10, 30}, 99);
  Router router{g};
  auto const n = static_cast<EdgeIndex>(g.edges().size());
  for (EdgeIndex a = 0; a < n; ++a) {
    for (EdgeIndex c = 0; c < n; ++c) {
      auto const ac = router.cost(a, c);
      if (a == c) EXPECT_EQ(ac, 0.0);
      else EXPECT_GT(ac, 0.0);
      for (EdgeIndex b = 0; b < n; b += 3) {
        auto const via = router.cost(a, b) + router.cost(b, c);
        EXPECT_LE(ac, via + 1e-9);
        EXPECT_LE(ac, via + g.travel_time(b) + 1e-9);
      }
    }
  }
}

TEST(ShortestPath, InvariantUnderRowPermutation) {
  std::mt19937 gen{5};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto doc = synth::random_network_json({9, 28}, seed);
    auto const g = parse_network(doc.dump(), "a");
    std::shuffle(doc["nodes"].begin(), doc["nodes"].end(), gen);
    std::shuffle(doc["edges"].begin(), doc["edges"].end(), gen);
    auto const h = parse_network(doc.dump(), "b");
    for (auto const& from : g.edges()) {
      for (auto const& to : g.edges()) {
        EXPECT_EQ(shortest_path(g, from.edge_id, to.edge_id),
                  shortest_path(h, from.edge_id, to.edge_id));
      }
    }
  }
}

TEST(Router, ConcurrentQueriesAgree) {
  auto const g = synth::make_grid({8, 8});
  Router shared{g};
  Router serial{g};
  std::vector<std::thread> pool;
  std::vector<std::vector<double>> results(4);
  for (int t = 0; t < 4; ++t) {
    pool.emplace_back([&, t] {
      for (EdgeIndex d = 0; d < g.edges().size(); ++d) {
        results[static_cast<std::size_t>(t)].push_back(shared.cost(0, d));
      }
    });
  }
  for (auto& th : pool) th.join();
  for (EdgeIndex d = 0; d < g.edges().size(); ++d) {
    for (auto const& r : results) EXPECT_EQ(r[d], serial.cost(0, d));
  }
}
