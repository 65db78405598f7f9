#pragma once

// Staged cascade: trip lines, let the controller settle, trip whatever is
// overloaded, repeat.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridcascade/controllers.hpp"
#include "gridcascade/netmodel.hpp"
#include "gridcascade/uc.hpp"

namespace gridcascade {

enum class ControllerKind { droop, agc, uc };
enum class DetectMode { exact, dynamic };

ControllerKind parse_controller(std::string_view name);
std::string_view controller_name(ControllerKind kind);
DetectMode parse_detect(std::string_view name);

struct CascadeConfig {
    ControllerKind controller = ControllerKind::uc;
    DetectMode detect = DetectMode::exact;
    /// UC control areas as bus ids; empty uses the network's areas.
    std::vector<std::vector<int>> uc_areas;
    /// Fixed ladder for critical stages; empty builds the default one per stage.
    std::optional<LiftingLadder> ladder;
    IntegratorSettings integrator;
    double overload_tol = 1e-9;
    /// Zero means 10 * |E|.
    std::size_t max_stages = 0;
};

struct StageRecord {
    std::size_t stage = 0;
    std::vector<int> tripped;        // B(n), line ids
    std::vector<int> new_failures;   // F(n), line ids
    EquilibriumPoint equilibrium;
    std::vector<double> flows;       // absolute, after the controller
    std::vector<double> injections;  // absolute, after the controller
    double shed = 0.0;
    bool critical = false;
    std::vector<LiftAction> actions;
    bool terminal_lift = false;
    std::optional<DivergenceVerdict> verdict;
};

enum class CascadeStatus { contained, exhausted };

struct CascadeTrace {
    std::vector<StageRecord> stages;
    CascadeStatus status = CascadeStatus::contained;
    /// Sum of all controller adjustments per bus.
    std::vector<double> cumulative_d;
    double total_shed = 0.0;
    double total_demand = 0.0;

    [[nodiscard]] bool critical() const;
    /// Lines tripped after the initial failure.
    [[nodiscard]] std::size_t successive_failures() const;
    [[nodiscard]] std::size_t adjusted_generators(const Network& network, double tol = 1e-6) const;
};

/// Throws std::invalid_argument for an empty or unknown initial failure.
CascadeTrace run_cascade(const Scenario& scenario, std::span<const int> initial_failure, const CascadeConfig& config);

std::string trace_to_json(const Network& network, const CascadeTrace& trace);

}  // namespace gridcascade
