#include <doctest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "gridcascade/errors.hpp"
#include "gridcascade/graph.hpp"
#include "gridcascade/verify.hpp"

using namespace gridcascade;
using fixtures::bowtie;
using fixtures::path3;
using fixtures::tri;

using Ids = std::vector<int>;
using Sets = std::vector<std::vector<int>>;

TEST_CASE("incidence columns") {
    const IncidenceView v = incidence(bowtie());
    CHECK(v.c.rows() == 6);
    CHECK(v.c.cols() == 7);
    for (std::size_t e = 0; e < v.c.cols(); ++e) {
        int plus = 0;
        int minus = 0;
        for (std::size_t j = 0; j < v.c.rows(); ++j) {
            if (v.c(j, e) == 1.0) ++plus;
            if (v.c(j, e) == -1.0) ++minus;
        }
        CHECK(plus == 1);
        CHECK(minus == 1);
    }
    CHECK(v.c(2, 3) == 1.0);
    CHECK(v.c(3, 3) == -1.0);
}

TEST_CASE("tree partition of the small fixtures") {
    SUBCASE("triangle") {
        const TreePartition tp = tree_partition(tri());
        CHECK(tp.regions == Sets{{1, 2, 3}});
        CHECK(tp.bridges.empty());
    }
    SUBCASE("bowtie") {
        const TreePartition tp = tree_partition(bowtie());
        CHECK(tp.regions == Sets{{1, 2, 3}, {4, 5, 6}});
        CHECK(tp.bridges == Ids{4});
        CHECK(tp.region_of == std::vector<std::size_t>{0, 0, 0, 1, 1, 1});
    }
    SUBCASE("path") {
        const TreePartition tp = tree_partition(path3());
        CHECK(tp.regions == Sets{{1}, {2}, {3}});
        CHECK(tp.bridges == Ids{1, 2});
    }
    SUBCASE("disconnected") {
        Network net = bowtie();
        net.lines.erase(net.lines.begin() + 3);
        net.reindex();
        CHECK_THROWS_AS((void)tree_partition(net), TopologyError);
    }
}

TEST_CASE("tree partition ignores orientation") {
    Network net = bowtie();
    const TreePartition a = tree_partition(net);
    for (Line& l : net.lines) std::swap(l.from, l.to);
    net.reindex();
    const TreePartition b = tree_partition(net);
    CHECK(a.regions == b.regions);
    CHECK(a.bridges == b.bridges);
}

TEST_CASE("reduced multigraph") {
    SUBCASE("triangle split in two") {
        const ReducedMultigraph g = reduced_multigraph(tri(), {{1, 2}, {3}});
        CHECK(g.node_count == 2);
        CHECK(g.edges.size() == 2);
        CHECK_FALSE(g.is_tree);
    }
    SUBCASE("bowtie over its tree partition") {
        const Network net = bowtie();
        const ReducedMultigraph g = reduced_multigraph(net, tree_partition(net).regions);
        CHECK(g.node_count == 2);
        CHECK(g.edges.size() == 1);
        CHECK(g.is_tree);
    }
    SUBCASE("overlapping parts") {
        CHECK_THROWS_AS((void)reduced_multigraph(tri(), {{1, 2}, {2, 3}}), std::invalid_argument);
    }
}

TEST_CASE("ieee 118 areas become a tree once three ties are off") {
    Network net = load_case(std::string(GRIDCASCADE_DATA_DIR) + "/case118.m");
    const ReducedMultigraph before = reduced_multigraph(net, net.areas);
    CHECK(before.edges.size() == 4);
    CHECK_FALSE(before.is_tree);
    net = switch_off(net, parse_line_pairs("15-33,19-34,23-24"));
    const ReducedMultigraph after = reduced_multigraph(net, net.areas);
    REQUIRE(after.edges.size() == 1);
    const Line& tie = net.lines[net.line_index(after.edges[0].line)];
    CHECK(std::min(tie.from, tie.to) == 30);
    CHECK(std::max(tie.from, tie.to) == 38);
    CHECK(after.is_tree);
}

TEST_CASE("closures") {
    const Network bow = bowtie();
    const Closure c = closure(bow, tree_partition(bow), 0);
    CHECK(c.boundary == Ids{4});
    CHECK(c.closure == Ids{1, 2, 3, 4});

    const Network p = path3();
    CHECK(closure(p, tree_partition(p), 1).boundary == Ids{1, 3});

    const Network t = tri();
    const Closure ct = closure(t, tree_partition(t), 0);
    CHECK(ct.boundary.empty());
    CHECK(ct.closure == Ids{1, 2, 3});
}

TEST_CASE("associated regions") {
    const Network net = bowtie();
    const TreePartition tp = tree_partition(net);
    using Regions = std::vector<std::size_t>;
    CHECK(associated_regions(net, tp, Ids{1}) == Regions{0});
    CHECK(associated_regions(net, tp, Ids{4}) == Regions{0, 1});
    CHECK(associated_regions(net, tp, Ids{1, 5}) == Regions{0, 1});
    CHECK(associated_regions(net, tp, Ids{}).empty());
}

TEST_CASE("islands") {
    CHECK(islands(tri(), Ids{3}) == Sets{{1, 2, 3}});
    const Network net = bowtie();
    CHECK(islands(net, Ids{4}) == Sets{{1, 2, 3}, {4, 5, 6}});
    CHECK(islands(net, Ids{4, 5, 7}) == Sets{{1, 2, 3}, {4}, {5, 6}});
}

TEST_CASE("bridges against brute force on random multigraphs") {
    SeededUniform rng(12);
    for (int trial = 0; trial < 300; ++trial) {
        Topology t;
        t.vertex_count = 2 + rng.index(9);
        const std::size_t m = rng.index(2 * t.vertex_count);
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t a = rng.index(t.vertex_count);
            const std::size_t b = rng.index(t.vertex_count);
            if (a != b) t.edges.emplace_back(a, b);
        }
        const EdgeDecomposition d = two_edge_decomposition(t);
        CHECK(d.bridges == verify::brute_force_bridges(t));
        const std::vector<std::size_t> oracle = verify::brute_force_regions(t);
        for (std::size_t u = 0; u < t.vertex_count; ++u) {
            for (std::size_t v = 0; v < t.vertex_count; ++v) {
                CHECK((d.region_of[u] == d.region_of[v]) == (oracle[u] == oracle[v]));
            }
        }
    }
}

TEST_CASE("exhaustive sweep up to six nodes") {
    const verify::SuiteResult r = verify::partition_sweep(6, 6);
    CHECK(r.ok());
    CHECK(r.cases > 0);
}
