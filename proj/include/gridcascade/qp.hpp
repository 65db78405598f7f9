#pragma once

// Convex quadratic programs with linear constraints, solved by a dense
// primal-dual interior point method (Mehrotra predictor-corrector).
//
//   minimise    1/2 x^T H x + q^T x
//   subject to  lo_i <= g_i^T x <= hi_i     for every row i
//
// Rows with lo == hi are treated as equalities; infinite bounds are dropped.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gridcascade/dense.hpp"

namespace gridcascade {

struct SparseRow {
    std::vector<std::size_t> index;
    std::vector<double> value;

    void add(std::size_t i, double v) {
        index.push_back(i);
        value.push_back(v);
    }
    [[nodiscard]] double dot(std::span<const double> x) const {
        double s = 0.0;
        for (std::size_t k = 0; k < index.size(); ++k) s += value[k] * x[index[k]];
        return s;
    }
};

struct QpProblem {
    std::size_t n = 0;
    DenseMatrix h;   // empty means zero
    std::vector<double> q;
    std::vector<SparseRow> rows;
    std::vector<double> lo;
    std::vector<double> hi;

    void add_row(SparseRow row, double lower, double upper) {
        rows.push_back(std::move(row));
        lo.push_back(lower);
        hi.push_back(upper);
    }
};

struct QpOptions {
    double tolerance = 1e-10;
    int max_iterations = 200;
    /// When `tolerance` is out of reach, the best iterate is accepted if its
    /// scaled residuals are below this.
    double acceptable = 1e-8;
    /// Optional primal starting point.
    std::optional<std::vector<double>> start;
};

struct QpResult {
    std::vector<double> x;
    /// Signed multiplier per row: positive when pressing on the upper bound.
    std::vector<double> multipliers;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    /// Scaled residual of the returned iterate; the best one seen when not converged.
    double merit = 0.0;
    bool converged = false;
};

QpResult solve_qp(const QpProblem& problem, const QpOptions& options = {});

/// Max of stationarity, bound violation and complementarity at (x, multipliers).
double kkt_residual(const QpProblem& problem, std::span<const double> x, std::span<const double> multipliers);

struct FeasibilityResult {
    bool feasible = false;
    /// Smallest uniform relaxation t making every row satisfiable.
    double min_relaxation = 0.0;
    /// Sum of row violations at the returned point.
    double slack_sum = 0.0;
    std::vector<double> point;
};

/// Phase-1 test: minimise t subject to lo - t <= g x <= hi + t, t >= 0.
FeasibilityResult check_feasibility(const QpProblem& problem, double threshold = 1e-8);

}  // namespace gridcascade
