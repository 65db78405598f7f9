#pragma once

// Network data model, case-file ingestion and scenario transformations.
//
// All quantities are per-unit on Network::base_mva. Injections are positive
// into the network. The controllable adjustment d_j of a bus is counted the
// way the swing equation counts it: it is subtracted from the bus injection,
// so a generator raising output has d_j < 0 and a load shedding has d_j < 0.

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gridcascade {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class BusKind { generator, load };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::load;
    /// Fixed consumption written as an injection (<= 0 for a consuming bus).
    double demand = 0.0;
    /// Box on the adjustment d_j, containing 0.
    double d_min = 0.0;
    double d_max = 0.0;
    /// Participation factor K_j.
    double droop_gain = 0.0;
    /// Frequency sensitivity D_j.
    double damping = 0.0;
    std::optional<double> inertia;

    // Generator data; all zero on pure load buses.
    double gen_p = 0.0;
    double gen_min = 0.0;
    double gen_max = 0.0;
    /// Generation cost a/2 * P^2 + b * P with P in per-unit.
    double cost_a = 0.0;
    double cost_b = 0.0;

    [[nodiscard]] double injection() const { return gen_p + demand; }
    [[nodiscard]] bool has_generator() const { return kind == BusKind::generator; }
};

struct Line {
    int id = 0;
    int from = 0;
    int to = 0;
    double susceptance = 1.0;
    /// Symmetric rating |f| <= capacity; kInf when the case gives none.
    double capacity = kInf;
};

class Network {
public:
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Line> lines;
    /// Control areas as lists of bus ids. Empty means a single area.
    std::vector<std::vector<int>> areas;

    /// Rebuild the id lookup tables. Call after editing buses or lines.
    void reindex();
    /// Check the model invariants; throws TopologyError or std::invalid_argument.
    void validate(bool require_connected = true) const;

    [[nodiscard]] std::size_t bus_count() const { return buses.size(); }
    [[nodiscard]] std::size_t line_count() const { return lines.size(); }

    /// Position of a bus id in `buses`; throws TopologyError if unknown.
    [[nodiscard]] std::size_t bus_index(int id) const;
    /// Position of a line id in `lines`; throws TopologyError if unknown.
    [[nodiscard]] std::size_t line_index(int id) const;
    /// Position of the line joining two bus ids in either orientation.
    [[nodiscard]] std::optional<std::size_t> find_line(int bus_a, int bus_b) const;

    [[nodiscard]] std::size_t from_index(std::size_t line) const { return line_ends_[line].first; }
    [[nodiscard]] std::size_t to_index(std::size_t line) const { return line_ends_[line].second; }

    /// Area index per bus position (0..area_count-1).
    [[nodiscard]] const std::vector<std::size_t>& area_of() const { return area_of_; }
    [[nodiscard]] std::size_t area_count() const { return area_count_; }

    /// Net injections gen_p + demand per bus.
    [[nodiscard]] std::vector<double> injections() const;
    /// Total consumption (positive number).
    [[nodiscard]] double total_demand() const;

    friend bool operator==(const Network& a, const Network& b);

private:
    std::vector<std::pair<int, std::size_t>> bus_lookup_;
    std::vector<std::pair<int, std::size_t>> line_lookup_;
    std::vector<std::pair<std::size_t, std::size_t>> line_ends_;
    std::vector<std::size_t> area_of_;
    std::size_t area_count_ = 1;
};

bool operator==(const Bus& a, const Bus& b);
bool operator==(const Line& a, const Line& b);

struct Scenario {
    Network network;
    /// Post-dispatch absolute injections, balanced and secure.
    std::vector<double> injections;
    std::uint64_t seed = 0;
    double alpha_line = 1.0;
    double alpha_gen = 1.0;
};

enum class CaseFormat { native_json, matpower };

/// Parse a case. Parallel branches are merged (susceptances and capacities
/// summed) and a message is appended to `warnings`; when `warnings` is null the
/// message goes to stderr.
Network parse_case(std::string_view text, CaseFormat format, std::vector<std::string>* warnings = nullptr);

/// Read from disk; the format is picked from the extension (.m = matpower).
Network load_case(const std::string& path, std::vector<std::string>* warnings = nullptr);

/// Native JSON text of a network.
std::string serialize_case(const Network& network);

/// Scale every load bus injection by (1 + u_j), u_j ~ U[-magnitude, magnitude]
/// drawn from a seeded generator in bus order. Generator buses are kept.
std::vector<double> perturb_loads(const Network& network, std::span<const double> base, double magnitude,
                                  std::uint64_t seed);

/// Multiply line ratings by alpha_line and generator limits (including the
/// d-box of generator buses) by alpha_gen.
Network scale_capacities(const Network& network, double alpha_line, double alpha_gen);

/// Remove the lines joining the given bus-id pairs. Throws TopologyError if a
/// pair has no line.
Network switch_off(const Network& network, std::span<const std::pair<int, int>> pairs);

/// Parse "i-j,k-l" into bus-id pairs.
std::vector<std::pair<int, int>> parse_line_pairs(std::string_view text);

/// Seeded uniform draws on [0, 1). The engine is std::mt19937_64; the mapping
/// to doubles is done here so sequences match across standard libraries.
class SeededUniform {
public:
    explicit SeededUniform(std::uint64_t seed) : engine_(seed) {}
    double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double next(double lo, double hi) { return lo + (hi - lo) * next(); }
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() * static_cast<double>(n)) % n; }

private:
    std::mt19937_64 engine_;
};

}  // namespace gridcascade
