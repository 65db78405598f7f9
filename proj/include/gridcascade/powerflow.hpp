#pragma once

// DC power flow on a network with some lines out of service.

#include <span>
#include <vector>

#include "gridcascade/dense.hpp"
#include "gridcascade/graph.hpp"
#include "gridcascade/netmodel.hpp"

namespace gridcascade {

struct FlowSolution {
    std::vector<double> theta;   // per bus, zero at each island's slack
    std::vector<double> flows;   // per line, zero on removed lines
};

/// Per island: pin the slack (smallest bus id unless `slack_ids` names one
/// bus of the island), solve the reduced Laplacian system and set f = B C^T theta.
/// Throws ImbalanceError if an island's injections do not sum to zero within
/// `balance_tol`.
FlowSolution dc_power_flow(const Network& network, std::span<const double> injections, const LineMask& removed = {},
                           std::span<const int> slack_ids = {}, double balance_tol = 1e-9);

/// Weighted Laplacian C B C^T on the surviving lines.
DenseMatrix laplacian(const Network& network, const LineMask& removed = {});

/// Line positions with |flow| > capacity * (1 + rel_tol).
std::vector<std::size_t> overloaded_line_indices(const Network& network, std::span<const double> flows,
                                                 double rel_tol = 1e-9, const LineMask& removed = {});

/// Same, as line ids.
std::vector<int> overloaded_lines(const Network& network, std::span<const double> flows, double rel_tol = 1e-9);

/// Sum over spanning forests with exactly two trees, one containing `set1` and
/// the other `set2`, of the product of susceptances. Brute-force enumeration.
double forest_weight(const Network& network, std::span<const int> set1, std::span<const int> set2);

}  // namespace gridcascade
