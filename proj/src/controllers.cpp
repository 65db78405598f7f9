#include "gridcascade/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gridcascade/errors.hpp"
#include "gridcascade/powerflow.hpp"
#include "gridcascade/qp.hpp"

namespace gridcascade {

std::vector<double> EquilibriumPoint::injection_change(const Network& network) const {
    std::vector<double> out(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) out[j] = -(d[j] + network.buses[j].damping * omega[j]);
    return out;
}

double EquilibriumPoint::total_shed() const { return std::accumulate(shed.begin(), shed.end(), 0.0); }

Allocation allocate_by_participation(std::span<const double> gain, std::span<const double> damping,
                                     std::span<const double> lo, std::span<const double> hi, double total) {
    const std::size_t n = gain.size();
    Allocation out;
    out.d.assign(n, 0.0);
    double sum_d = 0.0;
    double sum_k = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        sum_d += damping[j];
        sum_k += gain[j];
    }
    auto g = [&](double nu) {
        double s = sum_d * nu;
        for (std::size_t j = 0; j < n; ++j) {
            if (gain[j] > 0.0) s += std::clamp(gain[j] * nu, lo[j], hi[j]);
        }
        return s;
    };
    if (total == 0.0) return out;
    if (sum_k <= 0.0 && sum_d <= 0.0) {
        out.residual = total;
        return out;
    }

    // Bracket: beyond the outermost breakpoint only damping keeps growing.
    double nu_lo = 0.0;
    double nu_hi = 0.0;
    double box_span = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (gain[j] <= 0.0) continue;
        nu_lo = std::min(nu_lo, lo[j] / gain[j]);
        nu_hi = std::max(nu_hi, hi[j] / gain[j]);
        box_span += std::max(std::abs(lo[j]), std::abs(hi[j]));
    }
    if (sum_d > 0.0) {
        const double reach = (std::abs(total) + box_span) / sum_d;
        nu_lo = std::min(nu_lo, -reach);
        nu_hi = std::max(nu_hi, reach);
    }
    const double g_lo = g(nu_lo);
    const double g_hi = g(nu_hi);
    double nu = 0.0;
    if (total >= g_hi) {
        nu = nu_hi;
        out.residual = total - g_hi;
    } else if (total <= g_lo) {
        nu = nu_lo;
        out.residual = total - g_lo;
    } else {
        double a = nu_lo;
        double b = nu_hi;
        for (int it = 0; it < 200 && b - a > 1e-12 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
            const double mid = 0.5 * (a + b);
            (g(mid) < total ? a : b) = mid;
        }
        nu = 0.5 * (a + b);
        // Exact solve on the active pattern found by bisection.
        double clamped = 0.0;
        double free_gain = sum_d;
        for (std::size_t j = 0; j < n; ++j) {
            if (gain[j] <= 0.0) continue;
            const double v = gain[j] * nu;
            if (v <= lo[j]) {
                clamped += lo[j];
            } else if (v >= hi[j]) {
                clamped += hi[j];
            } else {
                free_gain += gain[j];
            }
        }
        if (free_gain > 0.0) {
            const double exact = (total - clamped) / free_gain;
            bool consistent = true;
            for (std::size_t j = 0; j < n && consistent; ++j) {
                if (gain[j] <= 0.0) continue;
                const double before = gain[j] * nu;
                const double after = gain[j] * exact;
                const int side_before = before <= lo[j] ? -1 : (before >= hi[j] ? 1 : 0);
                const int side_after = after < lo[j] ? -1 : (after > hi[j] ? 1 : 0);
                if (side_before == 0 && side_after != 0) consistent = false;
                if (side_before == -1 && after > lo[j]) consistent = false;
                if (side_before == 1 && after < hi[j]) consistent = false;
            }
            if (consistent) nu = exact;
        }
    }
    out.nu = nu;
    for (std::size_t j = 0; j < n; ++j) {
        if (gain[j] > 0.0) out.d[j] = std::clamp(gain[j] * nu, lo[j], hi[j]);
    }
    return out;
}

namespace {

struct Resolved {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<double> sheddable;
};

Resolved resolve(const Network& network, const ControlInput& in) {
    const std::size_t n = network.bus_count();
    if (in.r.size() != n) throw std::invalid_argument("controller: imbalance vector size mismatch");
    Resolved out;
    out.lo = in.d_min;
    out.hi = in.d_max;
    out.sheddable = in.sheddable;
    if (out.lo.empty()) {
        for (const Bus& b : network.buses) out.lo.push_back(b.d_min);
    }
    if (out.hi.empty()) {
        for (const Bus& b : network.buses) out.hi.push_back(b.d_max);
    }
    if (out.sheddable.empty()) {
        for (const Bus& b : network.buses) out.sheddable.push_back(std::max(0.0, -b.demand));
    }
    return out;
}

// Spread `amount` over `members` pro rata to `weight`, capped by `cap`.
// Returns what could not be placed.
double spread(std::span<const std::size_t> members, std::span<const double> weight, std::span<const double> cap,
              double amount, std::vector<double>& into) {
    double left = amount;
    // A few passes so capped buses pass their share on.
    for (int pass = 0; pass < 8 && left > 1e-15; ++pass) {
        double w = 0.0;
        for (std::size_t j : members) {
            if (cap[j] - into[j] > 0.0) w += weight[j];
        }
        if (w <= 0.0) break;
        double placed = 0.0;
        for (std::size_t j : members) {
            const double room = cap[j] - into[j];
            if (room <= 0.0 || weight[j] <= 0.0) continue;
            const double take = std::min(room, left * weight[j] / w);
            into[j] += take;
            placed += take;
        }
        left -= placed;
    }
    return std::max(left, 0.0);
}

// Absorb an unabsorbed island/area residual: deficit by shedding load,
// surplus by curtailing generation. Returns what is still left.
double absorb_residual(const Network& network, std::span<const std::size_t> members, double residual,
                       const Resolved& res, EquilibriumPoint& eq) {
    const std::size_t n = network.bus_count();
    if (residual < 0.0) {
        std::vector<double> add(n, 0.0);
        const double left = spread(members, res.sheddable, res.sheddable, -residual, add);
        for (std::size_t j : members) {
            eq.shed[j] += add[j];
            eq.d[j] -= add[j];
        }
        return -left;
    }
    std::vector<double> weight(n, 0.0);
    std::vector<double> cap(n, 0.0);
    for (std::size_t j : members) {
        if (network.buses[j].has_generator()) {
            weight[j] = std::max(network.buses[j].gen_max, 1e-12);
            cap[j] = kInf;
        }
    }
    std::vector<double> add(n, 0.0);
    const double left = spread(members, weight, cap, residual, add);
    for (std::size_t j : members) {
        eq.curtailed[j] += add[j];
        eq.d[j] += add[j];
    }
    return left;
}

// Whatever remains is booked as unserved and spread evenly so the island
// still balances for the flow solve.
void book_unserved(std::span<const std::size_t> members, double left, EquilibriumPoint& eq) {
    if (left == 0.0) return;
    eq.unserved += std::abs(left);
    const double each = left / static_cast<double>(members.size());
    for (std::size_t j : members) eq.d[j] += each;
}

void finish_flows(const Network& network, const ControlInput& in, EquilibriumPoint& eq) {
    const std::size_t n = network.bus_count();
    std::vector<double> injection(n);
    double scale = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        injection[j] = in.r[j] - eq.d[j] - network.buses[j].damping * eq.omega[j];
        scale += std::abs(in.r[j]);
    }
    FlowSolution sol = dc_power_flow(network, injection, in.removed, {}, 1e-9 * scale);
    eq.flows = std::move(sol.flows);
    eq.theta = std::move(sol.theta);
}

EquilibriumPoint empty_point(std::size_t n) {
    EquilibriumPoint eq;
    eq.omega.assign(n, 0.0);
    eq.d.assign(n, 0.0);
    eq.shed.assign(n, 0.0);
    eq.curtailed.assign(n, 0.0);
    return eq;
}

std::vector<int> bus_ids(const Network& network) {
    std::vector<int> ids;
    for (const Bus& b : network.buses) ids.push_back(b.id);
    return ids;
}

template <class Fn>
void for_groups(const Network& network, const LineMask& removed, bool split_by_area, Fn&& fn) {
    const SubTopology sub = topology_of(network, removed);
    const Components comps = connected_components(sub.topology, bus_ids(network));
    for (const auto& island : comps.members) {
        if (!split_by_area) {
            fn(std::span<const std::size_t>(island));
            continue;
        }
        std::vector<std::vector<std::size_t>> by_area(network.area_count());
        for (std::size_t j : island) by_area[network.area_of()[j]].push_back(j);
        for (const auto& g : by_area) {
            if (!g.empty()) fn(std::span<const std::size_t>(g));
        }
    }
}

EquilibriumPoint equilibrium(const Network& network, const ControlInput& in, bool agc) {
    const Resolved res = resolve(network, in);
    const std::size_t n = network.bus_count();
    EquilibriumPoint eq = empty_point(n);
    for_groups(network, in.removed, agc, [&](std::span<const std::size_t> members) {
        std::vector<double> k, dmp, lo, hi;
        double total = 0.0;
        for (std::size_t j : members) {
            k.push_back(network.buses[j].droop_gain);
            dmp.push_back(agc ? 0.0 : network.buses[j].damping);
            lo.push_back(res.lo[j]);
            hi.push_back(res.hi[j]);
            total += in.r[j];
        }
        const Allocation a = allocate_by_participation(k, dmp, lo, hi, total);
        for (std::size_t t = 0; t < members.size(); ++t) {
            eq.d[members[t]] = a.d[t];
            if (!agc) eq.omega[members[t]] = a.nu;
        }
        if (a.residual != 0.0) {
            if (!agc) eq.unserved += std::abs(a.residual);
            const double left = absorb_residual(network, members, a.residual, res, eq);
            if (agc) {
                book_unserved(members, left, eq);
            } else if (left != 0.0) {
                const double each = left / static_cast<double>(members.size());
                for (std::size_t j : members) eq.d[j] += each;
            }
        }
    });
    finish_flows(network, in, eq);
    return eq;
}

ControlInput plain_input(std::span<const double> r, const LineMask& removed) {
    ControlInput in;
    in.r.assign(r.begin(), r.end());
    in.removed = removed;
    return in;
}

}  // namespace

EquilibriumPoint droop_equilibrium(const Network& network, const ControlInput& input) {
    return equilibrium(network, input, false);
}

EquilibriumPoint droop_equilibrium(const Network& network, std::span<const double> r, const LineMask& removed) {
    return droop_equilibrium(network, plain_input(r, removed));
}

EquilibriumPoint agc_equilibrium(const Network& network, const ControlInput& input) {
    return equilibrium(network, input, true);
}

EquilibriumPoint agc_equilibrium(const Network& network, std::span<const double> r, const LineMask& removed) {
    return agc_equilibrium(network, plain_input(r, removed));
}

DispatchResult dc_opf(const Network& network, std::span<const double> demand) {
    const std::size_t n = network.bus_count();
    if (demand.size() != n) throw std::invalid_argument("dc_opf: demand vector size mismatch");
    std::vector<std::size_t> gens;
    for (std::size_t j = 0; j < n; ++j) {
        if (network.buses[j].has_generator()) gens.push_back(j);
    }
    const std::size_t g = gens.size();
    DispatchResult out;
    if (g == 0) return out;
    bool has_costs = false;
    for (std::size_t j : gens) has_costs = has_costs || network.buses[j].cost_a > 0.0 || network.buses[j].cost_b != 0.0;

    // Sensitivities of every line flow to an injection at each generator bus
    // (and to the demand vector), slack at the smallest bus id.
    std::vector<double> zero(n, 0.0);
    auto flows_for = [&](std::vector<double> inj) {
        const double sum = std::accumulate(inj.begin(), inj.end(), 0.0);
        std::size_t slack = 0;
        for (std::size_t j = 1; j < n; ++j) {
            if (network.buses[j].id < network.buses[slack].id) slack = j;
        }
        inj[slack] -= sum;
        return dc_power_flow(network, inj, {}, {}, 1e-6).flows;
    };
    const std::vector<double> base_flow = flows_for(std::vector<double>(demand.begin(), demand.end()));
    std::vector<std::vector<double>> ptdf(g);
    for (std::size_t t = 0; t < g; ++t) {
        std::vector<double> unit(n, 0.0);
        unit[gens[t]] = 1.0;
        ptdf[t] = flows_for(unit);
    }

    QpProblem qp;
    qp.n = g;
    qp.h = DenseMatrix(g, g);
    qp.q.assign(g, 0.0);
    double scale = 1.0;
    for (std::size_t t = 0; t < g; ++t) {
        const Bus& b = network.buses[gens[t]];
        qp.h(t, t) = has_costs ? b.cost_a : 1.0;
        qp.q[t] = has_costs ? b.cost_b : 0.0;
        scale = std::max(scale, qp.h(t, t));
    }
    // Keep the problem well scaled and strictly convex.
    for (std::size_t t = 0; t < g; ++t) {
        qp.h(t, t) = std::max(qp.h(t, t), 1e-6 * scale) / scale;
        qp.q[t] /= scale;
    }
    SparseRow balance;
    for (std::size_t t = 0; t < g; ++t) balance.add(t, 1.0);
    const double total_demand = -std::accumulate(demand.begin(), demand.end(), 0.0);
    qp.add_row(std::move(balance), total_demand, total_demand);
    for (std::size_t t = 0; t < g; ++t) {
        SparseRow box;
        box.add(t, 1.0);
        const Bus& b = network.buses[gens[t]];
        qp.add_row(std::move(box), b.gen_min, b.gen_max);
    }
    for (std::size_t e = 0; e < network.line_count(); ++e) {
        const double cap = network.lines[e].capacity;
        if (!std::isfinite(cap)) continue;
        SparseRow row;
        for (std::size_t t = 0; t < g; ++t) {
            if (std::abs(ptdf[t][e]) > 1e-14) row.add(t, ptdf[t][e]);
        }
        // Tighten a hair so the dispatch is strictly secure.
        const double margin = 1e-7 * cap;
        qp.add_row(std::move(row), -cap + margin - base_flow[e], cap - margin - base_flow[e]);
    }

    const FeasibilityResult feas = check_feasibility(qp);
    if (!feas.feasible) return out;
    const QpResult sol = solve_qp(qp);
    if (!sol.converged) return out;

    out.gen_output.assign(n, 0.0);
    out.p.assign(demand.begin(), demand.end());
    for (std::size_t t = 0; t < g; ++t) {
        const Bus& b = network.buses[gens[t]];
        const double v = std::clamp(sol.x[t], b.gen_min, b.gen_max);
        out.gen_output[gens[t]] = v;
        out.p[gens[t]] += v;
        const double a = has_costs ? b.cost_a : 1.0;
        out.cost += 0.5 * a * v * v + (has_costs ? b.cost_b : 0.0) * v;
    }
    // Absorb the last rounding of the balance at the largest unit with room.
    const double mismatch = std::accumulate(out.p.begin(), out.p.end(), 0.0);
    if (mismatch != 0.0) {
        std::size_t best = gens.front();
        double room = -1.0;
        for (std::size_t j : gens) {
            const Bus& b = network.buses[j];
            const double r = mismatch > 0.0 ? out.gen_output[j] - b.gen_min : b.gen_max - out.gen_output[j];
            if (r > room) {
                room = r;
                best = j;
            }
        }
        out.gen_output[best] -= mismatch;
        out.p[best] -= mismatch;
    }
    const FlowSolution check = dc_power_flow(network, out.p);
    for (std::size_t e = 0; e < network.line_count(); ++e) {
        if (std::abs(check.flows[e]) > network.lines[e].capacity) return DispatchResult{};
    }
    out.feasible = true;
    return out;
}

Network apply_dispatch(const Network& network, std::span<const double> demand, const DispatchResult& dispatch) {
    Network out = network;
    for (std::size_t j = 0; j < out.buses.size(); ++j) {
        Bus& b = out.buses[j];
        b.demand = demand[j];
        if (!b.has_generator()) continue;
        b.gen_p = dispatch.gen_output[j];
        b.d_min = b.gen_p - b.gen_max;
        b.d_max = b.gen_p - b.gen_min;
    }
    return out;
}

}  // namespace gridcascade
