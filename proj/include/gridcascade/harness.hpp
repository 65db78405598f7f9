#pragma once

// Experiment orchestration: random load profiles, N-1 scans and the
// statistics written out for plotting.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gridcascade/cascade.hpp"
#include "gridcascade/netmodel.hpp"

namespace gridcascade {

struct ProfileSet {
    std::vector<Scenario> scenarios;
    /// Draws rejected because the OPF had no secure dispatch.
    std::size_t rejected = 0;
};

/// perturb_loads + dc_opf per profile. Throws Error after 1000 consecutive
/// rejected draws.
ProfileSet generate_profiles(const Network& network, std::size_t count, double magnitude, std::uint64_t seed);

struct ScenarioMetrics {
    std::size_t profile = 0;
    int line = 0;
    ControllerKind controller = ControllerKind::uc;
    bool vulnerable = false;
    double load_loss_rate = 0.0;
    std::size_t adjusted_generators = 0;
    std::size_t stages = 0;
    bool critical = false;
    /// Set when the cascade itself threw; the message is kept.
    bool failed = false;
    std::string error;
};

struct SpreadStats {
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
};

SpreadStats spread_of(std::span<const double> values);

using CcdfSeries = std::vector<std::pair<double, double>>;

/// Sorted unique thresholds (0 always included) with the fraction of values
/// strictly greater than each.
CcdfSeries emit_ccdf(std::span<const double> values);

struct ScanReport {
    std::vector<ScenarioMetrics> cells;   // sorted by (profile, line)
    std::vector<double> vulnerable_per_profile;
    SpreadStats vulnerable;
    CcdfSeries loss_ccdf;
    CcdfSeries generator_ccdf;
    double max_loss_rate = 0.0;
    std::size_t failures = 0;
    std::string config_hash;
};

struct ScanConfig {
    CascadeConfig cascade;
    /// Zero picks the hardware concurrency, capped by GRIDCASCADE_THREADS.
    std::size_t threads = 0;
    /// Free-form description hashed into the report header.
    std::string description;
};

ScanReport n_minus_1_scan(std::span<const Scenario> scenarios, const ScanConfig& config);

/// Stable 64-bit FNV-1a digest as 16 hex digits.
std::string config_digest(std::string_view text);

/// Writes cells.csv, summary.json, ccdf_loss.csv and ccdf_generators.csv.
void write_report(const ScanReport& report, const std::filesystem::path& dir);

/// Worker count honouring GRIDCASCADE_THREADS.
std::size_t worker_count(std::size_t requested);

}  // namespace gridcascade
