#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gridcascade/errors.hpp"
#include "gridcascade/verify.hpp"

namespace gridcascade::verify {

namespace {

// Plain union-find, kept separate from the library's graph code.
struct Dsu {
    std::vector<std::size_t> parent;
    explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

std::vector<std::size_t> labels_without(const Topology& t, std::size_t skip) {
    Dsu dsu(t.vertex_count);
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
        if (e != skip) dsu.unite(t.edges[e].first, t.edges[e].second);
    }
    std::vector<std::size_t> label(t.vertex_count);
    for (std::size_t v = 0; v < t.vertex_count; ++v) label[v] = dsu.find(v);
    return label;
}

std::size_t count_classes(const std::vector<std::size_t>& label) {
    std::vector<std::size_t> s = label;
    std::sort(s.begin(), s.end());
    return static_cast<std::size_t>(std::unique(s.begin(), s.end()) - s.begin());
}

// Bus positions per island of the surviving network.
std::vector<std::vector<std::size_t>> island_members(const Network& net, const LineMask& removed) {
    Dsu dsu(net.bus_count());
    for (std::size_t e = 0; e < net.line_count(); ++e) {
        if (removed.empty() || !removed[e]) dsu.unite(net.from_index(e), net.to_index(e));
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t j = 0; j < net.bus_count(); ++j) groups[dsu.find(j)].push_back(j);
    std::vector<std::vector<std::size_t>> out;
    for (auto& [root, members] : groups) out.push_back(std::move(members));
    return out;
}

}  // namespace

double lu_determinant(DenseMatrix a) {
    const std::size_t n = a.rows();
    double det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        }
        if (a(piv, k) == 0.0) return 0.0;
        if (piv != k) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(k, c), a(piv, c));
            det = -det;
        }
        det *= a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            for (std::size_t c = k; c < n; ++c) a(i, c) -= f * a(k, c);
        }
    }
    return det;
}

std::vector<double> lu_solve(DenseMatrix a, std::vector<double> b) {
    const std::size_t n = a.rows();
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < n; ++c) scale = std::max(scale, std::abs(a(i, c)));
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        }
        if (std::abs(a(piv, k)) <= 1e-14 * scale) throw SolverError("lu_solve: singular matrix");
        if (piv != k) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(k, c), a(piv, c));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            for (std::size_t c = k; c < n; ++c) a(i, c) -= f * a(k, c);
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t c = k + 1; c < n; ++c) s -= a(k, c) * x[c];
        x[k] = s / a(k, k);
    }
    return x;
}

std::vector<double> absolute_flows(const Network& network, std::span<const double> injections,
                                   const LineMask& removed) {
    const std::size_t n = network.bus_count();
    std::vector<double> theta(n, 0.0);
    for (const auto& members : island_members(network, removed)) {
        if (members.size() < 2) continue;
        std::size_t ground = members.front();
        for (std::size_t j : members) {
            if (network.buses[j].id > network.buses[ground].id) ground = j;
        }
        std::vector<std::size_t> pos(n, n);
        std::vector<std::size_t> free;
        for (std::size_t j : members) {
            if (j == ground) continue;
            pos[j] = free.size();
            free.push_back(j);
        }
        DenseMatrix lap(free.size(), free.size());
        for (std::size_t e = 0; e < network.line_count(); ++e) {
            if (!removed.empty() && removed[e]) continue;
            const std::size_t a = network.from_index(e);
            const std::size_t b = network.to_index(e);
            if (pos[a] == n && a != ground) continue;
            const double w = network.lines[e].susceptance;
            if (pos[a] < n) lap(pos[a], pos[a]) += w;
            if (pos[b] < n) lap(pos[b], pos[b]) += w;
            if (pos[a] < n && pos[b] < n) {
                lap(pos[a], pos[b]) -= w;
                lap(pos[b], pos[a]) -= w;
            }
        }
        std::vector<double> rhs(free.size());
        for (std::size_t k = 0; k < free.size(); ++k) rhs[k] = injections[free[k]];
        const std::vector<double> x = lu_solve(std::move(lap), std::move(rhs));
        for (std::size_t k = 0; k < free.size(); ++k) theta[free[k]] = x[k];
    }
    std::vector<double> flows(network.line_count(), 0.0);
    for (std::size_t e = 0; e < network.line_count(); ++e) {
        if (!removed.empty() && removed[e]) continue;
        flows[e] = network.lines[e].susceptance * (theta[network.from_index(e)] - theta[network.to_index(e)]);
    }
    return flows;
}

DroopReference droop_reference(const Network& network, std::span<const double> r, const LineMask& removed,
                               std::span<const double> d_min, std::span<const double> d_max) {
    const std::size_t n = network.bus_count();
    DroopReference out;
    out.d.assign(n, 0.0);
    out.omega.assign(n, 0.0);
    for (const auto& members : island_members(network, removed)) {
        double total = 0.0;
        double slope = 0.0;
        std::size_t active = 0;
        for (std::size_t j : members) {
            total += r[j];
            const Bus& b = network.buses[j];
            if (b.droop_gain > 0.0) {
                slope = std::max(slope, 1.0 / b.droop_gain);
                ++active;
            }
            if (b.damping > 0.0) {
                slope = std::max(slope, b.damping);
                active += 1;
            }
        }
        if (active == 0) continue;
        double damping_sq = 0.0;
        double gains = 0.0;
        for (std::size_t j : members) {
            damping_sq += network.buses[j].damping * network.buses[j].damping;
            if (network.buses[j].droop_gain > 0.0) gains += 1.0;
        }
        const double rho = 1.0 / slope;
        const double lip = slope + rho * (gains + damping_sq) * 1.0001;
        const double step = 1.0 / lip;

        // L = sum d^2/(2K) + D w^2/2 + lambda c + rho/2 c^2, c = total - sum d - sum D w
        double lambda = 0.0;
        auto residual = [&] {
            double c = total;
            for (std::size_t j : members) c -= out.d[j] + network.buses[j].damping * out.omega[j];
            return c;
        };
        for (int outer = 0; outer < 2000; ++outer) {
            for (int inner = 0; inner < 200000; ++inner) {
                const double c = residual();
                double moved = 0.0;
                for (std::size_t j : members) {
                    const Bus& b = network.buses[j];
                    if (b.droop_gain > 0.0) {
                        const double grad = out.d[j] / b.droop_gain - lambda - rho * c;
                        const double next = std::clamp(out.d[j] - step * grad, d_min[j], d_max[j]);
                        moved = std::max(moved, std::abs(next - out.d[j]));
                        out.d[j] = next;
                    }
                    if (b.damping > 0.0) {
                        const double grad = b.damping * out.omega[j] - b.damping * (lambda + rho * c);
                        const double next = out.omega[j] - step * grad;
                        moved = std::max(moved, std::abs(next - out.omega[j]));
                        out.omega[j] = next;
                    }
                }
                ++out.iterations;
                if (moved < 1e-15) break;
            }
            const double c = residual();
            lambda += rho * c;
            if (std::abs(c) < 1e-13) break;
        }
    }
    return out;
}

std::vector<std::size_t> brute_force_bridges(const Topology& topology) {
    const std::size_t base = count_classes(labels_without(topology, topology.edges.size()));
    std::vector<std::size_t> out;
    for (std::size_t e = 0; e < topology.edges.size(); ++e) {
        if (count_classes(labels_without(topology, e)) > base) out.push_back(e);
    }
    return out;
}

std::vector<std::size_t> brute_force_regions(const Topology& topology) {
    const std::size_t n = topology.vertex_count;
    std::vector<std::vector<std::size_t>> signature(n);
    for (std::size_t skip = 0; skip <= topology.edges.size(); ++skip) {
        const std::vector<std::size_t> label = labels_without(topology, skip);
        for (std::size_t v = 0; v < n; ++v) signature[v].push_back(label[v]);
    }
    std::vector<std::size_t> out(n);
    for (std::size_t v = 0; v < n; ++v) {
        out[v] = v;
        for (std::size_t u = 0; u < v; ++u) {
            if (signature[u] == signature[v]) {
                out[v] = out[u];
                break;
            }
        }
    }
    return out;
}

}  // namespace gridcascade::verify
