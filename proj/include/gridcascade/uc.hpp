#pragma once

// Unified Controller: the post-contingency dispatch problem
//
//   min  sum_j w_j d_j^2 / 2
//   s.t. r - d - C f = 0,  f = B C^T theta,  E C f = 0,
//        f_lo <= f <= f_hi,  d_min <= d <= d_max
//
// together with its feasibility test, a projected primal-dual integrator
// that mimics the closed-loop controller, and constraint lifting.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gridcascade/controllers.hpp"
#include "gridcascade/dense.hpp"
#include "gridcascade/graph.hpp"
#include "gridcascade/netmodel.hpp"
#include "gridcascade/qp.hpp"

namespace gridcascade {

/// Canonical form over x = (f, d, theta):  A x <= g,  Ceq x = h,  box on d.
struct UcCanonical {
    std::size_t nf = 0;
    std::size_t nd = 0;
    std::size_t ntheta = 0;
    std::vector<double> weight;   // objective 1/2 sum weight_j d_j^2
    DenseMatrix a;
    std::vector<double> g;
    DenseMatrix ceq;
    std::vector<double> h;
    std::vector<double> box_lo;
    std::vector<double> box_hi;

    [[nodiscard]] std::size_t size() const { return nf + nd + ntheta; }
};

struct UcProblem {
    std::size_t bus_count = 0;
    /// Surviving lines: network position, endpoints (bus positions), susceptance.
    std::vector<std::size_t> line;
    std::vector<std::pair<std::size_t, std::size_t>> ends;
    std::vector<double> susceptance;
    std::vector<double> flow_lo;
    std::vector<double> flow_hi;

    std::vector<double> r;
    std::vector<double> d_min;
    std::vector<double> d_max;
    std::vector<double> weight;
    /// Shed allowance already granted per bus by lifting.
    std::vector<double> allowance;
    /// Planning area of each bus.
    std::vector<std::size_t> area_of;

    /// One zero-ACE row per group of buses (areas, possibly merged).
    std::vector<std::vector<std::size_t>> ace_groups;
    /// Area indices making up each group.
    std::vector<std::vector<std::size_t>> ace_areas;

    /// One pinned angle per island (the smallest bus id).
    std::vector<std::size_t> pins;

    [[nodiscard]] std::size_t line_count() const { return line.size(); }
    [[nodiscard]] UcCanonical canonical() const;
    /// Reduced QP over the unpinned angles; d and f are eliminated.
    [[nodiscard]] QpProblem reduced() const;
};

/// `flow_headroom` holds per network line [lo, hi] bounds on the flow
/// deviation; empty means +-capacity. Buses are grouped by `areas` (bus ids);
/// empty means the network's own areas.
UcProblem build_uc_problem(const Network& network, const std::vector<std::vector<int>>& areas,
                           std::span<const double> r, const LineMask& removed,
                           std::span<const std::pair<double, double>> flow_headroom = {});

/// Replace the network's d-boxes.
void set_boxes(UcProblem& problem, std::span<const double> d_min, std::span<const double> d_max);

struct FeasibilityReport {
    bool feasible = false;
    double min_relaxation = 0.0;
    double slack_sum = 0.0;
    /// Least-violation point in canonical layout (f, d, theta).
    std::vector<double> certificate;
};

FeasibilityReport check_feasible(const UcProblem& problem);

struct UcSolution {
    std::vector<double> d;
    std::vector<double> flows;   // per surviving line
    std::vector<double> theta;
    double objective = 0.0;
    double kkt_residual = 0.0;
    bool converged = false;
};

struct UcSolveOptions {
    std::optional<std::vector<double>> start_theta;
};

/// Throws SolverError when the problem is infeasible.
UcSolution solve_uc(const UcProblem& problem, const UcSolveOptions& options = {});

/// Expand a solution into per-network-line flows and an EquilibriumPoint.
/// Usage of d beyond [base_min, base_max] is reported as shed (below, at
/// consuming buses) or curtailment (above).
EquilibriumPoint to_equilibrium(const Network& network, const UcProblem& problem, const UcSolution& solution,
                                std::span<const double> base_min, std::span<const double> base_max);

enum class DivergenceStatus { converged, diverged, undecided };

struct DivergenceVerdict {
    DivergenceStatus status = DivergenceStatus::undecided;
    double peak_dual = 0.0;
    /// Index into the concatenated duals (inequality rows, then equality rows).
    std::size_t trigger_index = 0;
    double time = 0.0;
};

struct IntegratorSettings {
    double step = 0.01;
    double horizon = 5000.0;
    /// Zero picks 1e3 * (max|r| + 1).
    double dual_cap = 0.0;
    double window = 10.0;
    /// Augmented-Lagrangian weight on the primal dynamics.
    double penalty = 1.0;
    double kkt_tolerance = 1e-6;
    /// Keep every n-th state in the trajectory (0 keeps only the last).
    std::size_t record_every = 0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> primal;
    std::vector<std::vector<double>> dual_ineq;
    std::vector<std::vector<double>> dual_eq;
    DivergenceVerdict verdict;
    double final_kkt = 0.0;
};

Trajectory integrate_primal_dual(const UcProblem& problem, const IntegratorSettings& settings = {});

struct LiftAction {
    enum class Kind { lift_ace, allow_shed };
    Kind kind = Kind::lift_ace;
    std::size_t area_a = 0;
    std::size_t area_b = 0;
    std::vector<std::size_t> buses;   // bus positions
    double increment = 0.0;
};

struct LiftingLadder {
    std::vector<LiftAction> actions;
};

struct LiftResult {
    UcProblem problem;
    std::vector<LiftAction> applied;
    /// True when the ladder ran out and every box was opened.
    bool terminal = false;
};

/// Apply one action. AllowShed lowers d_min by the increment at listed
/// buses, not past `-sheddable` when that is given.
void apply_action(UcProblem& problem, const LiftAction& action, std::span<const double> sheddable = {});

LiftResult lift_constraints(const UcProblem& problem, const LiftingLadder& ladder,
                            std::span<const double> sheddable = {});

/// Merge ACE areas outward from `associated` through the area adjacency of
/// the surviving network, then widen load boxes with doubling increments,
/// first in the associated areas and then everywhere.
LiftingLadder default_ladder(const Network& network, const UcProblem& problem,
                             std::span<const std::size_t> associated_areas, std::span<const double> sheddable);

/// Ladder from its JSON form: [{"lift_ace": [a, b]}, {"allow_shed": [ids], "increment": x}].
LiftingLadder parse_ladder(const std::string& json_text, const Network& network);

}  // namespace gridcascade
