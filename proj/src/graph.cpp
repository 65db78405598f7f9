#include "gridcascade/graph.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "gridcascade/errors.hpp"

namespace gridcascade {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

struct Adjacency {
    std::vector<std::size_t> start;
    std::vector<std::pair<std::size_t, std::size_t>> arcs;  // (neighbour, edge)
};

Adjacency adjacency(const Topology& t) {
    Adjacency adj;
    adj.start.assign(t.vertex_count + 1, 0);
    for (const auto& [a, b] : t.edges) {
        ++adj.start[a + 1];
        ++adj.start[b + 1];
    }
    std::partial_sum(adj.start.begin(), adj.start.end(), adj.start.begin());
    adj.arcs.resize(2 * t.edges.size());
    std::vector<std::size_t> fill(adj.start.begin(), adj.start.end() - 1);
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
        const auto [a, b] = t.edges[e];
        adj.arcs[fill[a]++] = {b, e};
        adj.arcs[fill[b]++] = {a, e};
    }
    return adj;
}

int key_of(std::span<const int> key, std::size_t v) { return key.empty() ? static_cast<int>(v) : key[v]; }

// Sort groups internally and by smallest key.
void order_groups(std::vector<std::vector<std::size_t>>& groups, std::vector<std::size_t>& group_of,
                  std::span<const int> key) {
    for (auto& g : groups) {
        std::sort(g.begin(), g.end(), [&](std::size_t x, std::size_t y) { return key_of(key, x) < key_of(key, y); });
    }
    std::sort(groups.begin(), groups.end(), [&](const auto& x, const auto& y) {
        return key_of(key, x.front()) < key_of(key, y.front());
    });
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t v : groups[g]) group_of[v] = g;
    }
}

}  // namespace

LineMask line_mask(const Network& network, std::span<const int> line_ids) {
    LineMask mask(network.line_count(), 0);
    for (int id : line_ids) mask[network.line_index(id)] = 1;
    return mask;
}

SubTopology topology_of(const Network& network, const LineMask& removed) {
    SubTopology sub;
    sub.topology.vertex_count = network.bus_count();
    for (std::size_t e = 0; e < network.line_count(); ++e) {
        if (!removed.empty() && removed[e]) continue;
        sub.topology.edges.emplace_back(network.from_index(e), network.to_index(e));
        sub.edge_line.push_back(e);
    }
    return sub;
}

IncidenceView incidence(const Network& network) {
    IncidenceView view;
    view.c = DenseMatrix(network.bus_count(), network.line_count());
    view.b.resize(network.line_count());
    for (std::size_t e = 0; e < network.line_count(); ++e) {
        view.c(network.from_index(e), e) = 1.0;
        view.c(network.to_index(e), e) = -1.0;
        view.b[e] = network.lines[e].susceptance;
    }
    return view;
}

Components connected_components(const Topology& topology, std::span<const int> order_key) {
    const std::size_t n = topology.vertex_count;
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [a, b] : topology.edges) {
        const std::size_t ra = find(a);
        const std::size_t rb = find(b);
        if (ra != rb) parent[ra] = rb;
    }
    Components out;
    out.component_of.assign(n, kNone);
    std::vector<std::size_t> root_slot(n, kNone);
    for (std::size_t v = 0; v < n; ++v) {
        const std::size_t r = find(v);
        if (root_slot[r] == kNone) {
            root_slot[r] = out.members.size();
            out.members.emplace_back();
        }
        out.members[root_slot[r]].push_back(v);
    }
    order_groups(out.members, out.component_of, order_key);
    return out;
}

EdgeDecomposition two_edge_decomposition(const Topology& topology, std::span<const int> order_key) {
    const std::size_t n = topology.vertex_count;
    const Adjacency adj = adjacency(topology);
    std::vector<std::size_t> disc(n, kNone);
    std::vector<std::size_t> low(n, 0);
    std::vector<char> is_bridge(topology.edges.size(), 0);

    // Iterative DFS; frames hold (vertex, edge used to enter, next arc).
    struct Frame {
        std::size_t v;
        std::size_t via;
        std::size_t next;
    };
    std::vector<Frame> stack;
    std::size_t clock = 0;
    for (std::size_t root = 0; root < n; ++root) {
        if (disc[root] != kNone) continue;
        disc[root] = low[root] = clock++;
        stack.push_back({root, kNone, adj.start[root]});
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < adj.start[f.v + 1]) {
                const auto [w, e] = adj.arcs[f.next++];
                if (e == f.via) continue;
                if (disc[w] == kNone) {
                    disc[w] = low[w] = clock++;
                    stack.push_back({w, e, adj.start[w]});
                } else {
                    low[f.v] = std::min(low[f.v], disc[w]);
                }
                continue;
            }
            const Frame done = f;
            stack.pop_back();
            if (!stack.empty()) {
                Frame& up = stack.back();
                low[up.v] = std::min(low[up.v], low[done.v]);
                if (low[done.v] > disc[up.v]) is_bridge[done.via] = 1;
            }
        }
    }

    Topology without;
    without.vertex_count = n;
    EdgeDecomposition out;
    for (std::size_t e = 0; e < topology.edges.size(); ++e) {
        if (is_bridge[e]) {
            out.bridges.push_back(e);
        } else {
            without.edges.push_back(topology.edges[e]);
        }
    }
    Components comps = connected_components(without, order_key);
    out.region_of = std::move(comps.component_of);
    out.regions = std::move(comps.members);
    return out;
}

namespace {

std::vector<int> bus_ids(const Network& network) {
    std::vector<int> ids(network.bus_count());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = network.buses[i].id;
    return ids;
}

}  // namespace

TreePartition tree_partition(const Network& network) {
    const SubTopology sub = topology_of(network);
    const std::vector<int> ids = bus_ids(network);
    if (connected_components(sub.topology, ids).members.size() != 1)
        throw TopologyError("tree_partition: network is disconnected");
    const EdgeDecomposition dec = two_edge_decomposition(sub.topology, ids);
    TreePartition tp;
    tp.region_of = dec.region_of;
    for (const auto& region : dec.regions) {
        std::vector<int> r;
        for (std::size_t v : region) r.push_back(ids[v]);
        tp.regions.push_back(std::move(r));
    }
    for (std::size_t e : dec.bridges) tp.bridges.push_back(network.lines[sub.edge_line[e]].id);
    std::sort(tp.bridges.begin(), tp.bridges.end());
    return tp;
}

ReducedMultigraph reduced_multigraph(const Network& network, const std::vector<std::vector<int>>& partition) {
    std::vector<std::size_t> part_of(network.bus_count(), kNone);
    for (std::size_t p = 0; p < partition.size(); ++p) {
        for (int id : partition[p]) {
            const std::size_t b = network.bus_index(id);
            if (part_of[b] != kNone) throw std::invalid_argument("reduced_multigraph: bus in two parts");
            part_of[b] = p;
        }
    }
    if (std::find(part_of.begin(), part_of.end(), kNone) != part_of.end())
        throw std::invalid_argument("reduced_multigraph: partition does not cover all buses");

    ReducedMultigraph g;
    g.node_count = partition.size();
    Topology collapsed;
    collapsed.vertex_count = partition.size();
    for (std::size_t e = 0; e < network.line_count(); ++e) {
        const std::size_t a = part_of[network.from_index(e)];
        const std::size_t b = part_of[network.to_index(e)];
        if (a == b) continue;
        g.edges.push_back({std::min(a, b), std::max(a, b), network.lines[e].id});
        collapsed.edges.emplace_back(a, b);
    }
    const bool connected = connected_components(collapsed).members.size() == 1;
    g.is_tree = connected && g.edges.size() + 1 == g.node_count;
    return g;
}

Closure closure(const Network& network, const TreePartition& partition, std::size_t region) {
    if (region >= partition.regions.size()) throw std::invalid_argument("closure: region index out of range");
    std::vector<int> boundary;
    for (std::size_t e = 0; e < network.line_count(); ++e) {
        const std::size_t a = network.from_index(e);
        const std::size_t b = network.to_index(e);
        const bool in_a = partition.region_of[a] == region;
        const bool in_b = partition.region_of[b] == region;
        if (in_a && !in_b) boundary.push_back(network.buses[b].id);
        if (in_b && !in_a) boundary.push_back(network.buses[a].id);
    }
    std::sort(boundary.begin(), boundary.end());
    boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
    Closure c;
    c.closure = partition.regions[region];
    c.closure.insert(c.closure.end(), boundary.begin(), boundary.end());
    std::sort(c.closure.begin(), c.closure.end());
    c.boundary = std::move(boundary);
    return c;
}

std::vector<std::size_t> associated_regions(const Network& network, const TreePartition& partition,
                                            std::span<const int> failed_lines) {
    std::vector<std::size_t> out;
    for (int id : failed_lines) {
        const std::size_t e = network.line_index(id);
        out.push_back(partition.region_of[network.from_index(e)]);
        out.push_back(partition.region_of[network.to_index(e)]);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::vector<int>> islands(const Network& network, std::span<const int> removed_lines) {
    const SubTopology sub = topology_of(network, line_mask(network, removed_lines));
    const std::vector<int> ids = bus_ids(network);
    const Components comps = connected_components(sub.topology, ids);
    std::vector<std::vector<int>> out;
    for (const auto& m : comps.members) {
        std::vector<int> island;
        for (std::size_t v : m) island.push_back(ids[v]);
        out.push_back(std::move(island));
    }
    return out;
}

}  // namespace gridcascade
