#include <catch2/catch.hpp>

#include <set>
#include <sstream>

#include "cqbound/network.hpp"

using namespace cqbound;

TEST_CASE("default grid topology counts") {
    const Topology topo = build_grid_topology({});
    CHECK(topo.sensor_count() == 225);
    CHECK(topo.node_count() == 9);
    for (const auto& owned : topo.node_sensors) CHECK(owned.size() == 25);

    int total = 0;
    for (const auto& owned : topo.node_sensors) total += static_cast<int>(owned.size());
    CHECK(total == topo.sensor_count());
}

TEST_CASE("node graph is the 4-neighbour lattice at 550 m") {
    const Topology topo = build_grid_topology({});
    // corner, edge, centre degrees of a 3x3 lattice
    CHECK(topo.graph.neighbors[0].size() == 2);
    CHECK(topo.graph.neighbors[1].size() == 3);
    CHECK(topo.graph.neighbors[4].size() == 4);
    // no diagonal edges: node 0 at (250,250), node 4 at (750,750)
    for (int n : topo.graph.neighbors[0]) CHECK(n != 4);
    CHECK(topo.graph.connected());
}

TEST_CASE("degenerate single-node layout") {
    TopologyConfig config;
    config.sensor_grid_x = config.sensor_grid_y = 1;
    config.node_grid_x = config.node_grid_y = 1;
    const Topology topo = build_grid_topology(config);
    CHECK(topo.sensor_count() == 1);
    CHECK(topo.node_count() == 1);
    CHECK(topo.graph.connected());
}

TEST_CASE("too small a radius leaves the graph disconnected") {
    TopologyConfig config;
    config.comm_radius = 100.0;
    CHECK_THROWS_AS(build_grid_topology(config), ConfigError);
}

TEST_CASE("active selection: cardinality, determinism, exhaustive case") {
    const Topology topo = build_grid_topology({});

    Rng rng_a(55), rng_b(55);
    const ActiveSet a = select_active(topo, 3, rng_a);
    const ActiveSet b = select_active(topo, 3, rng_b);
    CHECK(a.total() == 27);
    CHECK(a.per_node == b.per_node);
    for (int l = 0; l < topo.node_count(); ++l)
        for (int s : a.per_node[l]) CHECK(topo.sensor_node[s] == l);

    Rng rng_c(1);
    const ActiveSet all = select_active(topo, 25, rng_c);
    for (int l = 0; l < topo.node_count(); ++l) {
        const std::set<int> got(all.per_node[l].begin(), all.per_node[l].end());
        const std::set<int> want(topo.node_sensors[l].begin(), topo.node_sensors[l].end());
        CHECK(got == want);
    }

    Rng rng_d(1);
    CHECK_THROWS_AS(select_active(topo, 26, rng_d), ConfigError);
}

TEST_CASE("topology CSV dump") {
    const Topology topo = build_grid_topology({});
    std::ostringstream out;
    write_topology_csv(out, topo);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "sensor_id,node_id,x_m,y_m");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 225);
}

TEST_CASE("ledger totals and the factor-two comparison") {
    CommLedger cq;
    for (int step = 0; step < 5; ++step) {
        StepTraffic t;
        t.sensor_messages = 27;
        t.sensor_bits = 27 * 8;
        t.fim_matrices = 9 * 40;
        t.fusion_matrices = 9 * 40;
        t.fusion_vectors = 9 * 40;
        t.consensus_rounds = 40;
        cq.steps.push_back(t);
    }
    CHECK(cq.totals().sensor_bits == 5 * 27 * 8);

    const CommLedger aux = model_aux_ledger(cq);
    CHECK(ledger_compare(cq, aux) == 2.0);
    // sensor->node traffic identical under both schemes
    CHECK(aux.totals().sensor_bits == cq.totals().sensor_bits);
    CHECK(aux.totals().fusion_matrices == cq.totals().fusion_matrices);

    CommLedger mismatched = cq;
    mismatched.steps.pop_back();
    CHECK_THROWS_AS(ledger_compare(mismatched, aux), ConfigError);

    CommLedger idle;
    idle.steps.resize(3);
    CHECK_THROWS_AS(ledger_compare(idle, model_aux_ledger(idle)), ConfigError);
}
