#include "gridcascade/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "gridcascade/errors.hpp"
#include "gridcascade/graph.hpp"
#include "gridcascade/powerflow.hpp"

namespace gridcascade {

ControllerKind parse_controller(std::string_view name) {
    if (name == "droop") return ControllerKind::droop;
    if (name == "agc") return ControllerKind::agc;
    if (name == "uc") return ControllerKind::uc;
    throw std::invalid_argument("unknown controller '" + std::string(name) + "' (droop, agc, uc)");
}

std::string_view controller_name(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::droop:
            return "droop";
        case ControllerKind::agc:
            return "agc";
        case ControllerKind::uc:
            return "uc";
    }
    return "?";
}

DetectMode parse_detect(std::string_view name) {
    if (name == "exact") return DetectMode::exact;
    if (name == "dynamic") return DetectMode::dynamic;
    throw std::invalid_argument("unknown detect mode '" + std::string(name) + "' (exact, dynamic)");
}

bool CascadeTrace::critical() const {
    return std::any_of(stages.begin(), stages.end(), [](const StageRecord& s) { return s.critical; });
}

std::size_t CascadeTrace::successive_failures() const {
    std::size_t n = 0;
    for (const StageRecord& s : stages) n += s.new_failures.size();
    return n;
}

std::size_t CascadeTrace::adjusted_generators(const Network& network, double tol) const {
    std::size_t n = 0;
    for (std::size_t j = 0; j < cumulative_d.size(); ++j) {
        if (network.buses[j].has_generator() && std::abs(cumulative_d[j]) > tol) ++n;
    }
    return n;
}

namespace {

struct UcStage {
    EquilibriumPoint eq;
    bool critical = false;
    std::vector<LiftAction> actions;
    bool terminal = false;
    std::optional<DivergenceVerdict> verdict;
};

UcStage uc_stage(const Network& network, const CascadeConfig& config, const ControlInput& in,
                 std::span<const double> flows, std::span<const std::size_t> tripped_now) {
    const std::size_t m = network.line_count();
    std::vector<std::pair<double, double>> headroom(m);
    for (std::size_t e = 0; e < m; ++e) {
        const double cap = network.lines[e].capacity;
        headroom[e] = {-cap - flows[e], cap - flows[e]};
    }
    UcProblem problem = build_uc_problem(network, config.uc_areas, in.r, in.removed, headroom);
    set_boxes(problem, in.d_min, in.d_max);

    UcStage out;
    bool decided = false;
    if (config.detect == DetectMode::dynamic) {
        const Trajectory traj = integrate_primal_dual(problem, config.integrator);
        out.verdict = traj.verdict;
        if (traj.verdict.status != DivergenceStatus::undecided) {
            out.critical = traj.verdict.status == DivergenceStatus::diverged;
            decided = true;
        }
    }
    if (!decided) out.critical = !check_feasible(problem).feasible;

    if (out.critical) {
        std::vector<std::size_t> assoc;
        for (std::size_t e : tripped_now) {
            assoc.push_back(problem.area_of[network.from_index(e)]);
            assoc.push_back(problem.area_of[network.to_index(e)]);
        }
        std::sort(assoc.begin(), assoc.end());
        assoc.erase(std::unique(assoc.begin(), assoc.end()), assoc.end());
        const LiftingLadder ladder =
            config.ladder ? *config.ladder : default_ladder(network, problem, assoc, in.sheddable);
        LiftResult lifted = lift_constraints(problem, ladder, in.sheddable);
        out.actions = std::move(lifted.applied);
        out.terminal = lifted.terminal;
        problem = std::move(lifted.problem);
    }
    const UcSolution sol = solve_uc(problem);
    out.eq = to_equilibrium(network, problem, sol, in.d_min, in.d_max);
    return out;
}

}  // namespace

CascadeTrace run_cascade(const Scenario& scenario, std::span<const int> initial_failure, const CascadeConfig& config) {
    const Network& net = scenario.network;
    const std::size_t n = net.bus_count();
    const std::size_t m = net.line_count();
    if (initial_failure.empty()) throw std::invalid_argument("run_cascade: empty initial failure");
    if (scenario.injections.size() != n) throw std::invalid_argument("run_cascade: injection vector size mismatch");

    std::vector<double> p = scenario.injections;
    LineMask removed(m, 0);
    std::vector<double> flows = dc_power_flow(net, p).flows;

    std::vector<double> d_cum(n, 0.0);    // in-box adjustment so far
    std::vector<double> shed_cum(n, 0.0);
    CascadeTrace trace;
    trace.cumulative_d.assign(n, 0.0);
    trace.total_demand = 0.0;
    for (std::size_t j = 0; j < n; ++j) trace.total_demand += std::max(0.0, -net.buses[j].demand);

    std::vector<std::size_t> trip;
    for (int id : initial_failure) {
        const bool known = std::any_of(net.lines.begin(), net.lines.end(), [id](const Line& l) { return l.id == id; });
        if (!known) throw std::invalid_argument("run_cascade: unknown line id " + std::to_string(id));
        trip.push_back(net.line_index(id));
    }
    std::sort(trip.begin(), trip.end());
    trip.erase(std::unique(trip.begin(), trip.end()), trip.end());

    const std::size_t guard = config.max_stages > 0 ? config.max_stages : 10 * std::max<std::size_t>(m, 1);
    trace.status = CascadeStatus::contained;

    for (std::size_t stage = 1;; ++stage) {
        if (stage > guard) {
            trace.status = CascadeStatus::exhausted;
            break;
        }
        // release the flows of the lines tripping now
        ControlInput in;
        in.r.assign(n, 0.0);
        for (std::size_t e : trip) {
            in.r[net.from_index(e)] += flows[e];
            in.r[net.to_index(e)] -= flows[e];
            flows[e] = 0.0;
            removed[e] = 1;
        }
        in.removed = removed;
        in.d_min.resize(n);
        in.d_max.resize(n);
        in.sheddable.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const Bus& b = net.buses[j];
            in.d_min[j] = std::min(b.d_min - d_cum[j], 0.0);
            in.d_max[j] = std::max(b.d_max - d_cum[j], 0.0);
            in.sheddable[j] = std::max(0.0, -b.demand - shed_cum[j]);
        }

        StageRecord rec;
        rec.stage = stage;
        switch (config.controller) {
            case ControllerKind::droop:
                rec.equilibrium = droop_equilibrium(net, in);
                break;
            case ControllerKind::agc:
                rec.equilibrium = agc_equilibrium(net, in);
                break;
            case ControllerKind::uc: {
                UcStage st = uc_stage(net, config, in, flows, trip);
                rec.equilibrium = std::move(st.eq);
                rec.critical = st.critical;
                rec.actions = std::move(st.actions);
                rec.terminal_lift = st.terminal;
                rec.verdict = st.verdict;
                break;
            }
        }
        const EquilibriumPoint& eq = rec.equilibrium;
        const std::vector<double> change = eq.injection_change(net);
        for (std::size_t j = 0; j < n; ++j) {
            p[j] += change[j];
            const double outside = eq.curtailed[j] - eq.shed[j];
            d_cum[j] += eq.d[j] - outside;
            shed_cum[j] += eq.shed[j];
            trace.cumulative_d[j] += eq.d[j];
            rec.shed += eq.shed[j];
        }
        for (std::size_t e = 0; e < m; ++e) {
            if (!removed[e]) flows[e] += eq.flows[e];
        }
        trace.total_shed += rec.shed;

        for (std::size_t e = 0; e < m; ++e) {
            if (removed[e]) rec.tripped.push_back(net.lines[e].id);
        }
        const std::vector<std::size_t> over = overloaded_line_indices(net, flows, config.overload_tol, removed);
        for (std::size_t e : over) rec.new_failures.push_back(net.lines[e].id);
        rec.flows = flows;
        rec.injections = p;
        trace.stages.push_back(std::move(rec));
        if (over.empty()) break;
        trip = over;
    }
    return trace;
}

std::string trace_to_json(const Network& network, const CascadeTrace& trace) {
    using nlohmann::json;
    json doc;
    doc["status"] = trace.status == CascadeStatus::contained ? "contained" : "exhausted";
    doc["total_shed"] = trace.total_shed;
    doc["total_demand"] = trace.total_demand;
    doc["load_loss_rate"] = trace.total_demand > 0.0 ? trace.total_shed / trace.total_demand : 0.0;
    doc["adjusted_generators"] = trace.adjusted_generators(network);
    json stages = json::array();
    for (const StageRecord& s : trace.stages) {
        json js;
        js["stage"] = s.stage;
        js["tripped"] = s.tripped;
        js["new_failures"] = s.new_failures;
        js["critical"] = s.critical;
        js["shed"] = s.shed;
        js["unserved"] = s.equilibrium.unserved;
        json adjust = json::object();
        for (std::size_t j = 0; j < s.equilibrium.d.size(); ++j) {
            if (std::abs(s.equilibrium.d[j]) > 1e-12)
                adjust[std::to_string(network.buses[j].id)] = s.equilibrium.d[j];
        }
        js["d"] = adjust;
        if (!s.equilibrium.omega.empty()) {
            const auto [lo, hi] = std::minmax_element(s.equilibrium.omega.begin(), s.equilibrium.omega.end());
            js["omega_range"] = {*lo, *hi};
        }
        json flows = json::object();
        for (std::size_t e = 0; e < network.line_count(); ++e) {
            flows[std::to_string(network.lines[e].id)] = s.flows[e];
        }
        js["flows"] = flows;
        json actions = json::array();
        for (const LiftAction& a : s.actions) {
            if (a.kind == LiftAction::Kind::lift_ace) {
                actions.push_back({{"lift_ace", {a.area_a, a.area_b}}});
            } else {
                std::vector<int> ids;
                for (std::size_t j : a.buses) ids.push_back(network.buses[j].id);
                actions.push_back({{"allow_shed", ids}, {"increment", a.increment}});
            }
        }
        js["actions"] = actions;
        js["terminal_lift"] = s.terminal_lift;
        if (s.verdict) {
            const char* status = s.verdict->status == DivergenceStatus::converged  ? "converged"
                                 : s.verdict->status == DivergenceStatus::diverged ? "diverged"
                                                                                   : "undecided";
            js["detector"] = {{"status", status}, {"peak_dual", s.verdict->peak_dual}, {"time", s.verdict->time}};
        }
        stages.push_back(std::move(js));
    }
    doc["stages"] = std::move(stages);
    return doc.dump(2);
}

}  // namespace gridcascade
