#pragma once

// Incidence structure and tree-partition analysis.
//
// Most routines come in two flavours: an index-based one over a bare
// Topology (vertex positions and an edge list) used in hot loops and
// exhaustive sweeps, and a Network-level one speaking bus and line ids.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "gridcascade/dense.hpp"
#include "gridcascade/netmodel.hpp"

namespace gridcascade {

/// Per-line flag, indexed by line position; nonzero means removed.
using LineMask = std::vector<char>;

LineMask line_mask(const Network& network, std::span<const int> line_ids);

struct Topology {
    std::size_t vertex_count = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
};

/// Bus positions and line positions of a network; lines flagged in `removed`
/// are dropped from the edge list (edge k then maps to `edge_line[k]`).
struct SubTopology {
    Topology topology;
    std::vector<std::size_t> edge_line;
};

SubTopology topology_of(const Network& network, const LineMask& removed = {});

struct IncidenceView {
    DenseMatrix c;             // |N| x |E|, +1 at the source bus, -1 at the sink
    std::vector<double> b;     // susceptance per line
};

IncidenceView incidence(const Network& network);

/// Connected components by vertex position, ordered by `order_key` of their
/// smallest member (pass bus ids; empty means vertex position).
struct Components {
    std::vector<std::size_t> component_of;
    std::vector<std::vector<std::size_t>> members;
};

Components connected_components(const Topology& topology, std::span<const int> order_key = {});

/// Bridges and 2-edge-connected components of an undirected multigraph.
struct EdgeDecomposition {
    std::vector<std::size_t> bridges;                // edge indices, ascending
    std::vector<std::size_t> region_of;              // per vertex
    std::vector<std::vector<std::size_t>> regions;   // ordered by smallest key
};

EdgeDecomposition two_edge_decomposition(const Topology& topology, std::span<const int> order_key = {});

struct TreePartition {
    std::vector<std::vector<int>> regions;   // bus ids, ascending within a region
    std::vector<int> bridges;                // line ids, ascending
    std::vector<std::size_t> region_of;      // per bus position
};

/// Irreducible tree-partition: regions are the 2-edge-connected components.
/// Throws TopologyError if the network is disconnected.
TreePartition tree_partition(const Network& network);

struct ReducedEdge {
    std::size_t a = 0;
    std::size_t b = 0;
    int line = 0;
};

struct ReducedMultigraph {
    std::size_t node_count = 0;
    std::vector<ReducedEdge> edges;
    bool is_tree = false;
};

/// Collapse each part (bus ids) to a super node. Throws std::invalid_argument
/// if the parts do not cover the buses disjointly.
ReducedMultigraph reduced_multigraph(const Network& network, const std::vector<std::vector<int>>& partition);

struct Closure {
    std::vector<int> boundary;
    std::vector<int> closure;
};

Closure closure(const Network& network, const TreePartition& partition, std::size_t region);

/// Regions holding an endpoint of a failed line, ascending.
std::vector<std::size_t> associated_regions(const Network& network, const TreePartition& partition,
                                            std::span<const int> failed_lines);

/// Components of the network with the given lines removed, as bus-id sets.
std::vector<std::vector<int>> islands(const Network& network, std::span<const int> removed_lines);

}  // namespace gridcascade
