#include "gridcascade/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gridcascade/errors.hpp"

namespace gridcascade {

DenseMatrix laplacian(const Network& network, const LineMask& removed) {
    const std::size_t n = network.bus_count();
    DenseMatrix l(n, n);
    for (std::size_t e = 0; e < network.line_count(); ++e) {
        if (!removed.empty() && removed[e]) continue;
        const std::size_t a = network.from_index(e);
        const std::size_t b = network.to_index(e);
        const double w = network.lines[e].susceptance;
        l(a, a) += w;
        l(b, b) += w;
        l(a, b) -= w;
        l(b, a) -= w;
    }
    return l;
}

FlowSolution dc_power_flow(const Network& network, std::span<const double> injections, const LineMask& removed,
                           std::span<const int> slack_ids, double balance_tol) {
    const std::size_t n = network.bus_count();
    if (injections.size() != n) throw std::invalid_argument("dc_power_flow: injection vector size mismatch");

    std::vector<int> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = network.buses[i].id;
    const SubTopology sub = topology_of(network, removed);
    const Components comps = connected_components(sub.topology, ids);

    std::vector<char> is_slack_hint(n, 0);
    for (int id : slack_ids) is_slack_hint[network.bus_index(id)] = 1;

    FlowSolution sol;
    sol.theta.assign(n, 0.0);
    sol.flows.assign(network.line_count(), 0.0);

    // local position of each bus inside its island's reduced system
    std::vector<std::size_t> local(n, 0);
    for (std::size_t c = 0; c < comps.members.size(); ++c) {
        const auto& members = comps.members[c];
        double sum = 0.0;
        for (std::size_t v : members) sum += injections[v];
        if (std::abs(sum) > balance_tol) {
            std::ostringstream msg;
            msg << "island containing bus " << ids[members.front()] << " is unbalanced by " << sum;
            throw ImbalanceError(msg.str());
        }
        if (members.size() == 1) continue;

        std::size_t slack = members.front();
        for (std::size_t v : members) {
            if (is_slack_hint[v]) {
                slack = v;
                break;
            }
        }
        std::size_t m = 0;
        for (std::size_t v : members) {
            if (v != slack) local[v] = m++;
        }
        DenseMatrix reduced(m, m);
        std::vector<double> rhs(m);
        for (std::size_t v : members) {
            if (v != slack) rhs[local[v]] = injections[v];
        }
        for (std::size_t k = 0; k < sub.edge_line.size(); ++k) {
            const auto [a, b] = sub.topology.edges[k];
            if (comps.component_of[a] != c) continue;
            const double w = network.lines[sub.edge_line[k]].susceptance;
            const bool fa = a != slack;
            const bool fb = b != slack;
            if (fa) reduced(local[a], local[a]) += w;
            if (fb) reduced(local[b], local[b]) += w;
            if (fa && fb) {
                reduced(local[a], local[b]) -= w;
                reduced(local[b], local[a]) -= w;
            }
        }
        Cholesky chol(reduced, 1e-14);
        if (!chol.full_rank()) throw SolverError("dc_power_flow: singular reduced Laplacian");
        chol.solve_in_place(rhs);
        for (std::size_t v : members) {
            if (v != slack) sol.theta[v] = rhs[local[v]];
        }
    }

    for (std::size_t k = 0; k < sub.edge_line.size(); ++k) {
        const auto [a, b] = sub.topology.edges[k];
        const std::size_t e = sub.edge_line[k];
        sol.flows[e] = network.lines[e].susceptance * (sol.theta[a] - sol.theta[b]);
    }
    return sol;
}

std::vector<std::size_t> overloaded_line_indices(const Network& network, std::span<const double> flows,
                                                 double rel_tol, const LineMask& removed) {
    std::vector<std::size_t> out;
    for (std::size_t e = 0; e < network.line_count(); ++e) {
        if (!removed.empty() && removed[e]) continue;
        if (std::abs(flows[e]) > network.lines[e].capacity * (1.0 + rel_tol)) out.push_back(e);
    }
    return out;
}

std::vector<int> overloaded_lines(const Network& network, std::span<const double> flows, double rel_tol) {
    std::vector<int> out;
    for (std::size_t e : overloaded_line_indices(network, flows, rel_tol)) out.push_back(network.lines[e].id);
    std::sort(out.begin(), out.end());
    return out;
}

double forest_weight(const Network& network, std::span<const int> set1, std::span<const int> set2) {
    if (set1.empty() || set2.empty()) throw std::invalid_argument("forest_weight: empty vertex set");
    const std::size_t n = network.bus_count();
    std::vector<int> tag(n, 0);
    for (int id : set1) tag[network.bus_index(id)] = 1;
    for (int id : set2) {
        const std::size_t b = network.bus_index(id);
        if (tag[b] == 1) throw std::invalid_argument("forest_weight: vertex sets overlap");
        tag[b] = 2;
    }
    if (n < 2) return 0.0;
    const std::size_t need = n - 2;
    const std::size_t m = network.line_count();

    double total = 0.0;
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::vector<std::size_t>& p, std::size_t x) {
        while (p[x] != x) x = p[x];
        return x;
    };

    // Choose edges in index order; a chosen edge that closes a cycle is pruned.
    std::function<void(std::size_t, std::size_t, double, std::vector<std::size_t>&)> rec =
        [&](std::size_t next, std::size_t chosen, double weight, std::vector<std::size_t>& p) {
            if (chosen == need) {
                std::size_t root1 = n;
                std::size_t root2 = n;
                for (std::size_t v = 0; v < n; ++v) {
                    if (tag[v] == 0) continue;
                    const std::size_t r = find(p, v);
                    std::size_t& slot = tag[v] == 1 ? root1 : root2;
                    if (slot == n) {
                        slot = r;
                    } else if (slot != r) {
                        return;
                    }
                }
                if (root1 != root2) total += weight;
                return;
            }
            if (m - next < need - chosen) return;
            for (std::size_t e = next; e < m; ++e) {
                if (m - e < need - chosen) break;
                const std::size_t ra = find(p, network.from_index(e));
                const std::size_t rb = find(p, network.to_index(e));
                if (ra == rb) continue;
                std::vector<std::size_t> q = p;
                q[ra] = rb;
                rec(e + 1, chosen + 1, weight * network.lines[e].susceptance, q);
            }
        };
    rec(0, 0, 1.0, parent);
    return total;
}

}  // namespace gridcascade
