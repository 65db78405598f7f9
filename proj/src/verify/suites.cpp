#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "gridcascade/cascade.hpp"
#include "gridcascade/controllers.hpp"
#include "gridcascade/errors.hpp"
#include "gridcascade/graph.hpp"
#include "gridcascade/powerflow.hpp"
#include "gridcascade/uc.hpp"
#include "gridcascade/verify.hpp"

namespace gridcascade::verify {

namespace {

constexpr std::size_t kFailureLog = 8;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void note(SuiteResult& s, const std::string& msg) {
    if (s.failures.size() < kFailureLog) s.failures.push_back(msg);
}

void record(SuiteResult& s, bool pass, double value, const std::string& label) {
    ++s.cases;
    s.worst = std::max(s.worst, value);
    if (pass) {
        ++s.passed;
    } else {
        std::ostringstream os;
        os << label << ": " << value;
        note(s, os.str());
    }
}

// Single-line failure on a planted tree-partition, stated in deviations.
struct UcCase {
    PartitionedInstance inst;
    TreePartition partition;
    int line = 0;
    UcProblem problem;
    UcSolution solution;
};

UcProblem failure_problem(const Network& net, std::span<const double> injections,
                          const std::vector<std::vector<int>>& areas, std::size_t e) {
    const std::vector<double> f0 = dc_power_flow(net, injections).flows;
    std::vector<double> r(net.bus_count(), 0.0);
    r[net.from_index(e)] += f0[e];
    r[net.to_index(e)] -= f0[e];
    LineMask removed(net.line_count(), 0);
    removed[e] = 1;
    std::vector<std::pair<double, double>> headroom(net.line_count());
    for (std::size_t k = 0; k < net.line_count(); ++k) {
        headroom[k] = {-net.lines[k].capacity - f0[k], net.lines[k].capacity - f0[k]};
    }
    return build_uc_problem(net, areas, r, removed, headroom);
}

bool same_partition(std::vector<std::vector<int>> a, std::vector<std::vector<int>> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

// Calls `check` for `count` non-critical failures. Instances where every line
// is critical are replaced by fresh draws.
void for_each_uc_case(std::size_t count, std::uint64_t seed, SuiteResult& suite,
                      const std::function<void(const UcCase&)>& check) {
    SeededUniform rng(seed);
    std::size_t done = 0;
    std::size_t draws = 0;
    while (done < count && draws < 20 * count) {
        ++draws;
        UcCase c;
        c.inst = random_tree_partitioned(rng, 20, 2, 4);
        const Network& net = c.inst.network;
        c.partition = tree_partition(net);
        if (!same_partition(c.partition.regions, c.inst.regions)) {
            note(suite, "generator produced a partition that is not irreducible");
            ++suite.cases;
            ++done;
            continue;
        }
        std::vector<std::size_t> order(net.line_count());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        bool found = false;
        for (std::size_t e : order) {
            UcProblem p = failure_problem(net, c.inst.injections, c.inst.regions, e);
            if (!check_feasible(p).feasible) continue;
            c.line = net.lines[e].id;
            c.problem = std::move(p);
            found = true;
            break;
        }
        if (!found) continue;
        try {
            c.solution = solve_uc(c.problem);
        } catch (const std::exception& ex) {
            ++suite.cases;
            note(suite, std::string("solve_uc threw: ") + ex.what());
            ++done;
            continue;
        }
        check(c);
        ++done;
    }
    if (done < count) note(suite, "ran out of draws with non-critical failures");
}

}  // namespace

SuiteResult bridge_nulling_suite(std::size_t count, std::uint64_t seed) {
    Timer timer;
    SuiteResult s;
    s.name = "bridge flow deviation on tree-partitioned areas";
    for_each_uc_case(count, seed, s, [&](const UcCase& c) {
        const Network& net = c.inst.network;
        double worst = 0.0;
        for (int id : c.partition.bridges) {
            if (id == c.line) continue;
            const std::size_t e = net.line_index(id);
            const auto it = std::find(c.problem.line.begin(), c.problem.line.end(), e);
            worst = std::max(worst, std::abs(c.solution.flows[static_cast<std::size_t>(it - c.problem.line.begin())]));
        }
        record(s, worst <= 1e-6, worst, "line " + std::to_string(c.line));
    });
    s.seconds = timer.seconds();
    return s;
}

SuiteResult localization_suite(std::size_t count, std::uint64_t seed) {
    Timer timer;
    SuiteResult s;
    s.name = "adjustments outside the associated regions";
    for_each_uc_case(count, seed, s, [&](const UcCase& c) {
        const Network& net = c.inst.network;
        const int failed[] = {c.line};
        const std::vector<std::size_t> assoc = associated_regions(net, c.partition, failed);
        double worst = 0.0;
        for (std::size_t j = 0; j < net.bus_count(); ++j) {
            if (std::find(assoc.begin(), assoc.end(), c.partition.region_of[j]) != assoc.end()) continue;
            worst = std::max(worst, std::abs(c.solution.d[j]));
        }
        record(s, worst <= 1e-6, worst, "line " + std::to_string(c.line));
    });
    s.seconds = timer.seconds();
    return s;
}

SuiteResult closure_potential_suite(std::size_t count, std::uint64_t seed) {
    Timer timer;
    SuiteResult s;
    s.name = "equal potential on a region closure";
    SeededUniform rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const PartitionedInstance inst = random_tree_partitioned(rng, 20, 2, 4);
        const Network& net = inst.network;
        const TreePartition tp = tree_partition(net);
        const std::size_t k = rng.index(tp.regions.size());
        std::vector<double> b(net.bus_count(), 0.0);
        for (std::size_t g = 0; g < tp.regions.size(); ++g) {
            if (g == k) continue;
            double sum = 0.0;
            for (int id : tp.regions[g]) sum += b[net.bus_index(id)] = rng.next(-1.0, 1.0);
            const double shift = sum / static_cast<double>(tp.regions[g].size());
            for (int id : tp.regions[g]) b[net.bus_index(id)] -= shift;
        }
        // the shifted values can leave a rounding-level total; put it on one bus outside k
        double total = std::accumulate(b.begin(), b.end(), 0.0);
        for (std::size_t j = 0; j < net.bus_count() && total != 0.0; ++j) {
            if (tp.region_of[j] != k) {
                b[j] -= total;
                total = 0.0;
            }
        }
        const std::vector<double> theta = dc_power_flow(net, b).theta;
        const Closure cl = closure(net, tp, k);
        double lo = kInf;
        double hi = -kInf;
        for (int id : cl.closure) {
            lo = std::min(lo, theta[net.bus_index(id)]);
            hi = std::max(hi, theta[net.bus_index(id)]);
        }
        record(s, hi - lo <= 1e-8, hi - lo, "instance " + std::to_string(i));
    }
    s.seconds = timer.seconds();
    return s;
}

SuiteResult matrix_forest_suite(std::size_t max_nodes, std::uint64_t seed) {
    Timer timer;
    SuiteResult s;
    s.name = "reduced Laplacian minors against two-tree forests";
    SeededUniform rng(seed);
    for (std::size_t n = 2; n <= max_nodes; ++n) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
        const std::size_t m = pairs.size();
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << m); ++mask) {
            Topology t{n, {}};
            for (std::size_t e = 0; e < m; ++e) {
                if (mask >> e & 1U) t.edges.push_back(pairs[e]);
            }
            {
                std::vector<std::size_t> reach{0};
                std::vector<char> seen(n, 0);
                seen[0] = 1;
                for (std::size_t q = 0; q < reach.size(); ++q) {
                    for (const auto& [a, b] : t.edges) {
                        const std::size_t o = a == reach[q] ? b : b == reach[q] ? a : n;
                        if (o < n && !seen[o]) {
                            seen[o] = 1;
                            reach.push_back(o);
                        }
                    }
                }
                if (reach.size() != n) continue;
            }
            Network net;
            for (std::size_t j = 0; j < n; ++j) {
                Bus b;
                b.id = static_cast<int>(j) + 1;
                net.buses.push_back(b);
            }
            DenseMatrix lap(n, n);
            for (const auto& [a, b] : t.edges) {
                Line l;
                l.id = static_cast<int>(net.lines.size()) + 1;
                l.from = static_cast<int>(a) + 1;
                l.to = static_cast<int>(b) + 1;
                l.susceptance = rng.next(0.5, 2.0);
                net.lines.push_back(l);
                lap(a, a) += l.susceptance;
                lap(b, b) += l.susceptance;
                lap(a, b) -= l.susceptance;
                lap(b, a) -= l.susceptance;
            }
            net.reindex();
            for (std::size_t z = 0; z < n; ++z) {
                std::vector<std::size_t> keep;
                for (std::size_t j = 0; j < n; ++j)
                    if (j != z) keep.push_back(j);
                const std::size_t k = keep.size();
                for (std::size_t l = 0; l < k; ++l) {
                    for (std::size_t i = 0; i < k; ++i) {
                        DenseMatrix minor(k - 1, k - 1);
                        for (std::size_t r = 0, rr = 0; r < k; ++r) {
                            if (r == l) continue;
                            for (std::size_t c = 0, cc = 0; c < k; ++c) {
                                if (c == i) continue;
                                minor(rr, cc++) = lap(keep[r], keep[c]);
                            }
                            ++rr;
                        }
                        const double det = lu_determinant(minor);
                        std::vector<int> set1{static_cast<int>(keep[l]) + 1};
                        if (i != l) set1.push_back(static_cast<int>(keep[i]) + 1);
                        const int set2[] = {static_cast<int>(z) + 1};
                        const double sign = (l + i) % 2 == 0 ? 1.0 : -1.0;
                        const double expect = sign * forest_weight(net, set1, set2);
                        const double scale = std::max(std::abs(expect), 1e-300);
                        const double rel = expect == 0.0 ? std::abs(det) : std::abs(det - expect) / scale;
                        record(s, rel <= 1e-9, rel,
                               "n=" + std::to_string(n) + " mask=" + std::to_string(mask) + " z=" +
                                   std::to_string(z));
                    }
                }
            }
        }
    }
    s.seconds = timer.seconds();
    return s;
}

SuiteResult detector_suite(std::size_t per_class, std::uint64_t seed, DetectorCounts* counts) {
    Timer timer;
    SuiteResult s;
    s.name = "divergence detector against phase-1 feasibility";
    DetectorCounts local;
    SeededUniform rng(seed);
    const IntegratorSettings settings;   // shipped defaults

    auto judge = [&](const UcProblem& p, bool intended_feasible, const std::string& label) {
        const bool oracle = check_feasible(p).feasible;
        if (oracle != intended_feasible) {
            ++local.oracle_mismatches;
            note(s, label + ": construction and oracle disagree");
        }
        const Trajectory traj = integrate_primal_dual(p, settings);
        const DivergenceStatus v = traj.verdict.status;
        bool pass = true;
        if (oracle) {
            ++local.feasible;
            if (v == DivergenceStatus::diverged) {
                ++local.false_positives;
                pass = false;
            }
            if (v == DivergenceStatus::undecided) ++local.undecided_feasible;
        } else {
            ++local.infeasible;
            if (v != DivergenceStatus::diverged) {
                ++local.false_negatives;
                pass = false;
            }
        }
        record(s, pass, traj.verdict.time, label);
    };

    std::size_t made_infeasible = 0;
    std::size_t made_feasible = 0;
    while (made_infeasible < per_class || made_feasible < per_class) {
        const PartitionedInstance inst = random_tree_partitioned(rng, 10, 2, 3);
        const Network& net = inst.network;
        const std::size_t n = net.bus_count();
        if (made_infeasible < per_class) {
            // A bus cut off from the grid with no control range and a nonzero imbalance.
            const std::size_t j = rng.index(n);
            LineMask removed(net.line_count(), 0);
            for (std::size_t e = 0; e < net.line_count(); ++e) {
                if (net.from_index(e) == j || net.to_index(e) == j) removed[e] = 1;
            }
            std::vector<double> r(n, 0.0);
            r[j] = (rng.next() < 0.5 ? -1.0 : 1.0) * rng.next(0.8, 1.5);
            UcProblem p = build_uc_problem(net, inst.regions, r, removed);
            std::vector<double> lo = p.d_min;
            std::vector<double> hi = p.d_max;
            lo[j] = 0.0;
            hi[j] = 0.0;
            set_boxes(p, lo, hi);
            judge(p, false, "islanded bus " + std::to_string(net.buses[j].id));
            ++made_infeasible;
        }
        if (made_feasible < per_class) {
            // Released flow of a line whose loss the areas can absorb.
            const std::size_t e = rng.index(net.line_count());
            UcProblem p = failure_problem(net, inst.injections, inst.regions, e);
            if (!check_feasible(p).feasible) continue;
            judge(p, true, "failure of line " + std::to_string(net.lines[e].id));
            ++made_feasible;
        }
    }
    if (counts) *counts = local;
    s.seconds = timer.seconds();
    return s;
}

SuiteResult droop_suite(std::size_t count, std::uint64_t seed) {
    Timer timer;
    SuiteResult s;
    s.name = "droop equilibrium against the primal problem";
    SeededUniform rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        Scenario sc = random_scenario(rng, 3 + rng.index(8), 0.3, 1.5, 3.0);
        Network& net = sc.network;
        const std::size_t n = net.bus_count();
        const bool tight = i % 2 == 1;
        if (tight) {
            for (Bus& b : net.buses) {
                b.d_min *= rng.next(0.05, 0.4);
                b.d_max *= rng.next(0.05, 0.4);
            }
        }
        std::vector<double> r(n, 0.0);
        LineMask removed(net.line_count(), 0);
        const std::size_t e = rng.index(net.line_count());
        if (i % 3 == 0) {
            const std::vector<double> f0 = dc_power_flow(net, sc.injections).flows;
            removed[e] = 1;
            r[net.from_index(e)] += 2.0 * f0[e];
            r[net.to_index(e)] -= 0.5 * f0[e];
        } else {
            for (double& v : r) v = rng.next() < 0.5 ? rng.next(-1.5, 1.5) : 0.0;
        }
        std::vector<double> lo(n), hi(n);
        for (std::size_t j = 0; j < n; ++j) {
            lo[j] = net.buses[j].d_min;
            hi[j] = net.buses[j].d_max;
        }
        ControlInput in;
        in.r = r;
        in.removed = removed;
        in.d_min = lo;
        in.d_max = hi;
        const EquilibriumPoint eq = droop_equilibrium(net, in);
        const DroopReference ref = droop_reference(net, r, removed, lo, hi);
        double err = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            err = std::max(err, std::abs(eq.d[j] - ref.d[j]));
            if (net.buses[j].damping > 0.0) err = std::max(err, std::abs(eq.omega[j] - ref.omega[j]));
        }
        record(s, err <= 1e-6, err, "instance " + std::to_string(i) + (tight ? " (tight boxes)" : ""));

        // A lost line that leaves its island connected changes nothing.
        net.reindex();
        const TreePartition tp = tree_partition(net);
        for (std::size_t k = 0; k < net.line_count(); ++k) {
            const int id = net.lines[k].id;
            if (std::binary_search(tp.bridges.begin(), tp.bridges.end(), id)) continue;
            const std::vector<double> f0 = dc_power_flow(net, sc.injections).flows;
            std::vector<double> rel(n, 0.0);
            rel[net.from_index(k)] += f0[k];
            rel[net.to_index(k)] -= f0[k];
            LineMask cut(net.line_count(), 0);
            cut[k] = 1;
            const EquilibriumPoint z = droop_equilibrium(net, rel, cut);
            const bool zero = std::all_of(z.d.begin(), z.d.end(), [](double v) { return v == 0.0; }) &&
                              std::all_of(z.omega.begin(), z.omega.end(), [](double v) { return v == 0.0; });
            double mag = 0.0;
            for (std::size_t j = 0; j < n; ++j) mag = std::max({mag, std::abs(z.d[j]), std::abs(z.omega[j])});
            record(s, zero, mag, "instance " + std::to_string(i) + " non-bridge line " + std::to_string(id));
            break;
        }
    }
    s.seconds = timer.seconds();
    return s;
}

namespace {

double stage_mismatch(const Network& net, const CascadeTrace& trace) {
    double worst = 0.0;
    for (const StageRecord& st : trace.stages) {
        const LineMask removed = line_mask(net, st.tripped);
        const std::vector<double> ref = absolute_flows(net, st.injections, removed);
        for (std::size_t e = 0; e < net.line_count(); ++e) worst = std::max(worst, std::abs(ref[e] - st.flows[e]));
    }
    return worst;
}

Scenario vee_scenario() {
    Scenario sc;
    Network& net = sc.network;
    net.buses.resize(3);
    for (int j = 0; j < 3; ++j) net.buses[static_cast<std::size_t>(j)].id = j + 1;
    Bus& g1 = net.buses[0];
    g1.kind = BusKind::generator;
    g1.gen_p = 2.0;
    g1.gen_max = 3.0;
    g1.d_min = -1.0;
    g1.d_max = 2.0;
    g1.droop_gain = 3.0;
    Bus& g2 = net.buses[1];
    g2.kind = BusKind::generator;
    g2.gen_max = 2.0;
    g2.d_min = -2.0;
    g2.d_max = 0.0;
    g2.droop_gain = 2.0;
    net.buses[2].demand = -2.0;
    net.lines = {Line{1, 1, 3, 1.0, 1.5}, Line{2, 1, 2, 1.0, 2.0}, Line{3, 2, 3, 1.0, 2.0}};
    net.reindex();
    sc.injections = net.injections();
    return sc;
}

}  // namespace

SuiteResult cascade_oracle_suite(std::size_t count, std::uint64_t seed) {
    Timer timer;
    SuiteResult s;
    s.name = "staged deviations against absolute DC flows";

    {
        const Scenario vee = vee_scenario();
        CascadeConfig cfg;
        cfg.controller = ControllerKind::droop;
        const int fail[] = {2};
        const CascadeTrace t = run_cascade(vee, fail, cfg);
        const bool shape = t.stages.size() == 2 && t.stages[0].new_failures == std::vector<int>{1} &&
                           t.stages[1].new_failures.empty() && std::abs(t.stages[0].flows[0] - 2.0) <= 1e-12 &&
                           std::abs(t.stages[1].flows[2] - 2.0) <= 1e-12;
        const double err = stage_mismatch(vee.network, t);
        record(s, shape && err <= 1e-8, err, shape ? "VEE flows" : "VEE trace shape");
    }

    SeededUniform rng(seed);
    const ControllerKind kinds[] = {ControllerKind::droop, ControllerKind::agc, ControllerKind::uc};
    for (std::size_t i = 0; i < count; ++i) {
        const Scenario sc = random_scenario(rng, 4 + rng.index(7), 0.3, 1.05, 1.6);
        const int fail[] = {sc.network.lines[rng.index(sc.network.line_count())].id};
        for (ControllerKind kind : kinds) {
            CascadeConfig cfg;
            cfg.controller = kind;
            const std::string label =
                "instance " + std::to_string(i) + " " + std::string(controller_name(kind));
            try {
                const CascadeTrace t = run_cascade(sc, fail, cfg);
                const double err = stage_mismatch(sc.network, t);
                record(s, err <= 1e-8, err, label);
            } catch (const std::exception& ex) {
                ++s.cases;
                note(s, label + " threw: " + ex.what());
            }
        }
    }
    s.seconds = timer.seconds();
    return s;
}

namespace {

void check_graph(SuiteResult& s, const Topology& t, std::uint64_t mask) {
    const EdgeDecomposition dec = two_edge_decomposition(t);
    const std::vector<std::size_t> bridges = brute_force_bridges(t);
    const std::vector<std::size_t> label = brute_force_regions(t);
    bool ok = dec.bridges == bridges;
    for (std::size_t u = 0; u < t.vertex_count && ok; ++u) {
        for (std::size_t v = u + 1; v < t.vertex_count; ++v) {
            if ((dec.region_of[u] == dec.region_of[v]) != (label[u] == label[v])) {
                ok = false;
                break;
            }
        }
    }
    // each collapsed component is a tree
    if (ok) {
        std::vector<std::size_t> comp(t.vertex_count);
        std::iota(comp.begin(), comp.end(), 0);
        std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
            return comp[x] == x ? x : comp[x] = find(comp[x]);
        };
        for (const auto& [a, b] : t.edges) comp[find(a)] = find(b);
        std::size_t parts = 0;
        for (std::size_t v = 0; v < t.vertex_count; ++v) parts += find(v) == v;
        ok = dec.regions.size() == dec.bridges.size() + parts;
    }
    ++s.cases;
    if (ok) {
        ++s.passed;
    } else {
        note(s, "n=" + std::to_string(t.vertex_count) + " mask=" + std::to_string(mask));
    }
}

}  // namespace

SuiteResult partition_sweep(std::size_t max_nodes, std::size_t labelled_nodes) {
    Timer timer;
    SuiteResult s;
    s.name = "bridges and regions against brute force";
    for (std::size_t n = 1; n <= max_nodes; ++n) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
        const std::size_t m = pairs.size();
        std::vector<std::uint64_t> incident(n, 0);
        for (std::size_t e = 0; e < m; ++e) {
            incident[pairs[e].first] |= std::uint64_t{1} << e;
            incident[pairs[e].second] |= std::uint64_t{1} << e;
        }
        const bool all = n <= labelled_nodes;
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
            if (!all) {
                bool sorted = true;
                int prev = std::popcount(mask & incident[0]);
                for (std::size_t v = 1; v < n; ++v) {
                    const int deg = std::popcount(mask & incident[v]);
                    if (deg > prev) {
                        sorted = false;
                        break;
                    }
                    prev = deg;
                }
                if (!sorted) continue;
            }
            Topology t{n, {}};
            for (std::size_t e = 0; e < m; ++e) {
                if (mask >> e & 1U) t.edges.push_back(pairs[e]);
            }
            check_graph(s, t, mask);
        }
    }
    s.seconds = timer.seconds();
    return s;
}

std::string describe(const SuiteResult& r) {
    std::ostringstream os;
    os << r.name << ": " << r.passed << "/" << r.cases << " passed, worst " << r.worst << ", " << r.seconds << " s";
    for (const std::string& f : r.failures) os << "\n    " << f;
    return os.str();
}

}  // namespace gridcascade::verify
