#pragma once

// Test-side oracles, random instance generators and the property suites run
// by `gridcascade verify` and the acceptance tests. Nothing in the library
// proper depends on this header.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridcascade/dense.hpp"
#include "gridcascade/graph.hpp"
#include "gridcascade/netmodel.hpp"

namespace gridcascade::verify {

// ---- oracles ---------------------------------------------------------------

/// Determinant by LU with partial pivoting.
double lu_determinant(DenseMatrix a);

/// Solve A x = b by LU with partial pivoting; throws SolverError if singular.
std::vector<double> lu_solve(DenseMatrix a, std::vector<double> b);

/// Absolute DC flows from scratch: per island, ground the bus with the
/// largest id and solve the reduced Laplacian by LU.
std::vector<double> absolute_flows(const Network& network, std::span<const double> injections,
                                   const LineMask& removed);

struct DroopReference {
    std::vector<double> d;
    std::vector<double> omega;
    std::size_t iterations = 0;
};

/// Droop equilibrium from the primal problem: min sum d^2/(2K) + D w^2/2 per
/// island subject to one aggregated balance row and the d-box, solved by an
/// augmented Lagrangian with projected-gradient inner loops.
DroopReference droop_reference(const Network& network, std::span<const double> r, const LineMask& removed,
                               std::span<const double> d_min, std::span<const double> d_max);

/// Edges whose removal increases the number of connected components.
std::vector<std::size_t> brute_force_bridges(const Topology& topology);

/// Label per vertex: u and v share a label iff they stay connected after
/// deleting any single edge. Labels are the smallest vertex of the class.
std::vector<std::size_t> brute_force_regions(const Topology& topology);

// ---- generators ------------------------------------------------------------

struct PartitionedInstance {
    Network network;
    std::vector<double> injections;
    /// The planted regions (bus ids); also stored as the network's areas.
    std::vector<std::vector<int>> regions;
};

/// Regions are cycles with random chords joined along a random tree of
/// bridges. Every region holds a generator; loads balance the generation and
/// ratings leave headroom over the base flows.
PartitionedInstance random_tree_partitioned(SeededUniform& rng, std::size_t max_buses = 20,
                                            std::size_t min_regions = 2, std::size_t max_regions = 4);

/// Connected network on `buses` buses: a random spanning tree plus extra
/// lines with probability `extra`. Ratings are `slack` times the base flows
/// with a floor, so some failures cascade.
Scenario random_scenario(SeededUniform& rng, std::size_t buses, double extra, double slack_lo, double slack_hi);

// ---- suites ----------------------------------------------------------------

struct SuiteResult {
    std::string name;
    std::size_t cases = 0;
    std::size_t passed = 0;
    /// Worst observed value of the suite's error measure.
    double worst = 0.0;
    double seconds = 0.0;
    std::vector<std::string> failures;   // first few only
    [[nodiscard]] bool ok() const { return cases > 0 && passed == cases; }
};

SuiteResult bridge_nulling_suite(std::size_t count = 200, std::uint64_t seed = 101);
SuiteResult localization_suite(std::size_t count = 200, std::uint64_t seed = 101);
SuiteResult closure_potential_suite(std::size_t count = 200, std::uint64_t seed = 303);
SuiteResult matrix_forest_suite(std::size_t max_nodes = 5, std::uint64_t seed = 404);

struct DetectorCounts {
    std::size_t infeasible = 0;
    std::size_t feasible = 0;
    std::size_t false_negatives = 0;
    std::size_t false_positives = 0;
    std::size_t undecided_feasible = 0;
    std::size_t oracle_mismatches = 0;
};
SuiteResult detector_suite(std::size_t per_class = 50, std::uint64_t seed = 505, DetectorCounts* counts = nullptr);

SuiteResult droop_suite(std::size_t count = 100, std::uint64_t seed = 606);
SuiteResult cascade_oracle_suite(std::size_t count = 50, std::uint64_t seed = 707);

/// Every graph on n <= labelled_nodes vertices, plus one labelling per
/// isomorphism class (degree sequence non-increasing) up to max_nodes.
SuiteResult partition_sweep(std::size_t max_nodes = 8, std::size_t labelled_nodes = 6);

std::string describe(const SuiteResult& result);

}  // namespace gridcascade::verify
