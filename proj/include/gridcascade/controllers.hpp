#pragma once

// Equilibria reached by droop control and by a congestion-blind AGC after a
// power imbalance, plus the DC-OPF used to dispatch scenarios.
//
// `r` is the per-bus imbalance (released injection) and `d` the controller
// adjustment. The deviation injected into the network is r - d - D*omega.
// Load shedding and generation curtailment beyond the boxes are folded into d
// (shedding is negative d at a consuming bus) and also reported separately.

#include <span>
#include <vector>

#include "gridcascade/graph.hpp"
#include "gridcascade/netmodel.hpp"

namespace gridcascade {

struct EquilibriumPoint {
    std::vector<double> omega;
    std::vector<double> d;
    std::vector<double> flows;   // deviation flows
    std::vector<double> theta;   // deviation angles
    std::vector<double> shed;    // >= 0, load dropped at consuming buses
    std::vector<double> curtailed;
    /// Imbalance nothing could absorb (droop with no damping, empty islands).
    double unserved = 0.0;

    /// Change of the absolute injection at bus j: -(d_j + D_j omega_j).
    [[nodiscard]] std::vector<double> injection_change(const Network& network) const;
    [[nodiscard]] double total_shed() const;
};

/// Inputs shared by the controllers. Empty vectors default to the network data.
struct ControlInput {
    std::vector<double> r;
    LineMask removed;
    std::vector<double> d_min;
    std::vector<double> d_max;
    /// Load that may still be shed per bus (>= 0). Defaults to -demand.
    std::vector<double> sheddable;
};

EquilibriumPoint droop_equilibrium(const Network& network, const ControlInput& input);
EquilibriumPoint droop_equilibrium(const Network& network, std::span<const double> r, const LineMask& removed = {});

EquilibriumPoint agc_equilibrium(const Network& network, const ControlInput& input);
EquilibriumPoint agc_equilibrium(const Network& network, std::span<const double> r, const LineMask& removed = {});

/// Solution of sum_j clamp(K_j nu, lo_j, hi_j) + sum_j D_j nu = total over the
/// listed buses. `residual` is the part of `total` left over when every box
/// saturates and no damping is present.
struct Allocation {
    double nu = 0.0;
    std::vector<double> d;
    double residual = 0.0;
};

Allocation allocate_by_participation(std::span<const double> gain, std::span<const double> damping,
                                     std::span<const double> lo, std::span<const double> hi, double total);

struct DispatchResult {
    bool feasible = false;
    std::vector<double> p;         // absolute injections per bus
    std::vector<double> gen_output;  // per bus, zero on load buses
    double cost = 0.0;
};

/// Economic dispatch of the generators against the given per-bus demand
/// (negative injections) with line limits. Uses the bus cost coefficients, or
/// identical quadratics when the case carries none.
DispatchResult dc_opf(const Network& network, std::span<const double> demand);

/// Copy demand and dispatch into the network and recentre the generator
/// d-boxes on the new operating point.
Network apply_dispatch(const Network& network, std::span<const double> demand, const DispatchResult& dispatch);

}  // namespace gridcascade
