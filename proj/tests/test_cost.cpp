// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "helpers.hpp"
#include "poseopt/common.hpp"
#include "poseopt/cost.hpp"
#include "poseopt/prune.hpp"

using namespace poseopt;
using namespace poseopt::testing;

TEST_CASE("conv_cost matches the closed-form accounting") {
  OpNode n = conv_node("c", "x", 16, 32, 3, 1, 1);
  NodeCost c = conv_cost(n, {{32, 10, 10}});
  CHECK(c.macs == 460800);  // 9*16*32*100
  CHECK(c.flops == 921600);
  CHECK(c.params == 9 * 16 * 32);

  OpNode id1 = conv_node("c", "x", 1, 1, 1, 1, 0);
  CHECK(conv_cost(id1, {{1, 1, 1}}).macs == 1);
}

TEST_CASE("conv_cost counts bias params and adds") {
  OpNode n = conv_node("c", "x", 16, 32, 3, 1, 1, 1, 1, /*bias=*/true);
  NodeCost c = conv_cost(n, {{32, 10, 10}});
  CHECK(c.params == 9 * 16 * 32 + 32);
  CHECK(c.flops == 2 * c.macs + 32 * 100);
}

TEST_CASE("conv_cost divides by groups") {
  OpNode n = conv_node("c", "x", 32, 32, 3, 1, 1, 1, /*groups=*/32);
  NodeCost c = conv_cost(n, {{32, 10, 10}});
  CHECK(c.params == 9 * 32);
  CHECK(c.macs == 9 * 32 * 100);
}

TEST_CASE("7x7 C->C vs three 3x3 C->C macs ratio is exactly 27/49") {
  const int C = 128;
  OpNode big = conv_node("b", "x", C, C, 7, 1, 3);
  OpNode small = conv_node("s", "x", C, C, 3, 1, 1);
  uint64_t m7 = conv_cost(big, {{C, 46, 46}}).macs;
  uint64_t m3 = conv_cost(small, {{C, 46, 46}}).macs;
  CHECK(3 * m3 * 49 == m7 * 27);
}

TEST_CASE("graph_cost totals are the exact sum of per-node entries") {
  Graph g = load_graph(fixture("lwop.graph.json"));
  CostReport r = graph_cost(g);
  NodeCost sum;
  for (const auto& [id, c] : r.per_node) {
    sum.params += c.params;
    sum.macs += c.macs;
    sum.flops += c.flops;
  }
  CHECK(sum.params == r.totals.params);
  CHECK(sum.macs == r.totals.macs);
  CHECK(sum.flops == r.totals.flops);
}

TEST_CASE("graph with no conv nodes costs zero") {
  Graph g;
  g.inputs = {{"x", {{3, 8, 8}}}};
  g.nodes = {act_node("a", "x")};
  g.outputs = {"a"};
  CostReport r = graph_cost(g);
  CHECK(r.totals.params == 0);
  CHECK(r.totals.macs == 0);
  CHECK(r.totals.flops == 0);
}

TEST_CASE("receptive field composition") {
  SUBCASE("single 7x7") {
    auto g = chain_graph({conv_node("c", "x", 3, 3, 7, 1, 3)}, {{3, 46, 46}});
    CHECK(receptive_field(g, "c") == ReceptiveField{7, 1});
  }
  SUBCASE("three consecutive 3x3") {
    auto g = chain_graph({conv_node("a", "x", 3, 3), conv_node("b", "a", 3, 3),
                          conv_node("c", "b", 3, 3)},
                         {{3, 46, 46}});
    CHECK(receptive_field(g, "c") == ReceptiveField{7, 1});
  }
  SUBCASE("3x3 dilation 3") {
    auto g = chain_graph({conv_node("c", "x", 3, 3, 3, 1, 3, /*dil=*/3)}, {{3, 46, 46}});
    CHECK(receptive_field(g, "c") == ReceptiveField{7, 1});
  }
  SUBCASE("stride compounds the jump") {
    auto g = chain_graph({conv_node("a", "x", 3, 3, 3, 2, 1), conv_node("b", "a", 3, 3)},
                         {{3, 46, 46}});
    CHECK(receptive_field(g, "b") == ReceptiveField{7, 2});
  }
  SUBCASE("multi-path takes the max") {
    Graph g;
    g.inputs = {{"x", {{3, 46, 46}}}};
    g.nodes = {conv_node("deep1", "x", 3, 3), conv_node("deep2", "deep1", 3, 3),
               conv_node("shallow", "x", 3, 3),
               OpNode{"sum", OpKind::Add, NoAttrs{}, {"deep2", "shallow"}, BlockTag::Other}};
    g.outputs = {"sum"};
    CHECK(receptive_field(g, "sum") == ReceptiveField{5, 1});
  }
}

TEST_CASE("receptive_field throws for unreachable nodes") {
  Graph g;
  g.inputs = {{"x", {{3, 8, 8}}}};
  g.nodes = {act_node("a", "x")};
  g.outputs = {"a"};
  CHECK_THROWS_AS(receptive_field(g, "ghost"), Error);
}

// The worked latency numbers: macs*t = 100, overhead 5, e = 2, sparse_overhead 10.
static LatencyParams example_params() {
  LatencyParams lp;
  lp.time_per_mac = 1.0;
  lp.per_node_overhead = 5.0;
  lp.sparse_inefficiency = 2.0;
  lp.sparse_overhead = 10.0;
  return lp;
}

TEST_CASE("layer_latency matches the hand-evaluated examples") {
  OpNode n = conv_node("c", "x", 1, 1, 1);
  LatencyParams lp = example_params();
  CHECK(layer_latency(n, 0.0, lp, 100) == doctest::Approx(105.0).epsilon(1e-12));
  CHECK(layer_latency(n, 0.75, lp, 100) == doctest::Approx(65.0).epsilon(1e-12));
  // Break-even: sparse latency equals dense latency at p*.
  CHECK(layer_latency(n, 0.55, lp, 100) == doctest::Approx(105.0).epsilon(1e-12));
}

TEST_CASE("layer_latency rejects ratios outside [0,1]") {
  OpNode n = conv_node("c", "x", 1, 1, 1);
  LatencyParams lp = example_params();
  CHECK_THROWS_AS(layer_latency(n, -0.1, lp, 100), Error);
  CHECK_THROWS_AS(layer_latency(n, 1.1, lp, 100), Error);
}

TEST_CASE("layer_latency is strictly decreasing in p on (0,1]") {
  OpNode n = conv_node("c", "x", 1, 1, 1);
  LatencyParams lp = example_params();
  double prev = layer_latency(n, 0.01, lp, 100);
  for (int i = 2; i <= 100; ++i) {
    double t = layer_latency(n, i / 100.0, lp, 100);
    CHECK(t < prev);
    prev = t;
  }
}

TEST_CASE("breakeven_ratio closed form") {
  OpNode n = conv_node("c", "x", 1, 1, 1);
  LatencyParams lp = example_params();
  auto p = breakeven_ratio(n, lp, 100);
  REQUIRE(p.has_value());
  CHECK(*p == doctest::Approx(0.55).epsilon(1e-12));

  lp.sparse_overhead = 0.0;
  lp.sparse_inefficiency = 1.0;
  CHECK(*breakeven_ratio(n, lp, 100) == doctest::Approx(0.0));

  lp = example_params();
  lp.sparse_overhead = 150.0;  // exceeds macs*t
  CHECK(!breakeven_ratio(n, lp, 100).has_value());
}

TEST_CASE("penalty_key distinguishes dilated convs and activation kinds") {
  CHECK(penalty_key(conv_node("c", "x", 3, 3, 3, 1, 2, /*dil=*/2)) == "dilated_conv");
  CHECK(penalty_key(conv_node("c", "x", 3, 3)) == "conv2d");
  CHECK(penalty_key(act_node("a", "x", ActFn::Swish)) == "swish");
  CHECK(penalty_key(OpNode{"m", OpKind::MaxPool, PoolAttrs{}, {"x"}, BlockTag::Other}) ==
        "maxpool");
}

TEST_CASE("graph_latency sums layer latencies and honors the plan") {
  // Two identical convs with macs = 100 each: 1x1 conv 1->1 on 10x10.
  auto g = chain_graph({conv_node("a", "x", 1, 1, 1, 1, 0), conv_node("b", "a", 1, 1, 1, 1, 0)},
                       {{1, 10, 10}});
  LatencyParams lp = example_params();
  LatencyBreakdown dense = graph_latency(g, nullptr, lp);
  CHECK(dense.total == doctest::Approx(210.0).epsilon(1e-12));

  PrunePlan plan;
  plan.decisions = {{"b", PruneScheme::unstructured(), 0.75}};
  LatencyBreakdown planned = graph_latency(g, &plan, lp);
  CHECK(planned.total == doctest::Approx(170.0).epsilon(1e-12));
  CHECK(planned.per_node.at("a") == doctest::Approx(105.0));
  CHECK(planned.per_node.at("b") == doctest::Approx(65.0));
}

TEST_CASE("graph_latency rejects plans naming unknown nodes") {
  auto g = chain_graph({conv_node("a", "x", 1, 1, 1, 1, 0)}, {{1, 10, 10}});
  PrunePlan plan;
  plan.decisions = {{"ghost", PruneScheme::unstructured(), 0.5}};
  try {
    graph_latency(g, &plan, example_params());
    FAIL("expected UnknownNodeInPlan");
  } catch (const Error& e) {
    CHECK(e.code() == "UnknownNodeInPlan");
  }
}

TEST_CASE("latency params load from the bundled calibration and round-trip") {
  LatencyParams lp = load_latency_params(fixture("calib_default.json"));
  CHECK(lp.time_per_mac == doctest::Approx(2e-10));
  CHECK(lp.sparse_inefficiency >= 1.0);
  CHECK(lp.unfriendly_op_penalty.count("dilated_conv") == 1);
  LatencyParams lp2;
  std::string s = serialize_latency_params(lp);
  // Write/parse through a temp file.
  std::string tmp = "/tmp/poseopt_calib_rt.json";
  {
    FILE* f = fopen(tmp.c_str(), "w");
    fwrite(s.data(), 1, s.size(), f);
    fclose(f);
  }
  lp2 = load_latency_params(tmp);
  CHECK(lp2.time_per_mac == lp.time_per_mac);
  CHECK(lp2.per_node_overhead == lp.per_node_overhead);
  CHECK(lp2.sparse_inefficiency == lp.sparse_inefficiency);
  CHECK(lp2.sparse_overhead == lp.sparse_overhead);
  CHECK(lp2.unfriendly_op_penalty == lp.unfriendly_op_penalty);
}

TEST_CASE("bundled lwop graph hits the published budget envelope") {
  Graph g = load_graph(fixture("lwop.graph.json"));
  CostReport r = graph_cost(g);
  CHECK(r.totals.params > 4.1e6 * 0.85);
  CHECK(r.totals.params < 4.1e6 * 1.15);
  CHECK(r.totals.macs > 9e9 * 0.85);
  CHECK(r.totals.macs < 9e9 * 1.15);
}
