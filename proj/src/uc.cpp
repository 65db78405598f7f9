#include "gridcascade/uc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <Eigen/Sparse>
#include <json.hpp>

#include "gridcascade/errors.hpp"

namespace gridcascade {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

std::vector<int> bus_ids(const Network& network) {
    std::vector<int> ids;
    for (const Bus& b : network.buses) ids.push_back(b.id);
    return ids;
}

// Canonical rows as sparse vectors, shared by canonical() and the integrator.
struct CanonicalRows {
    std::size_t nf = 0;
    std::size_t nd = 0;
    std::size_t nth = 0;
    std::vector<SparseRow> a;
    std::vector<double> g;
    std::vector<SparseRow> c;
    std::vector<double> h;
};

CanonicalRows canonical_rows(const UcProblem& p) {
    CanonicalRows out;
    const std::size_t ne = p.line_count();
    const std::size_t n = p.bus_count;
    out.nf = ne;
    out.nd = n;
    out.nth = n;
    const std::size_t d0 = ne;
    const std::size_t t0 = ne + n;

    for (std::size_t e = 0; e < ne; ++e) {
        SparseRow row;
        row.add(e, 1.0);
        out.a.push_back(row);
        out.g.push_back(p.flow_hi[e]);
    }
    for (std::size_t e = 0; e < ne; ++e) {
        SparseRow row;
        row.add(e, -1.0);
        out.a.push_back(row);
        out.g.push_back(-p.flow_lo[e]);
    }

    // balance: d_j + (C f)_j = r_j
    std::vector<SparseRow> balance(n);
    for (std::size_t j = 0; j < n; ++j) balance[j].add(d0 + j, 1.0);
    for (std::size_t e = 0; e < ne; ++e) {
        balance[p.ends[e].first].add(e, 1.0);
        balance[p.ends[e].second].add(e, -1.0);
    }
    for (std::size_t j = 0; j < n; ++j) {
        out.c.push_back(std::move(balance[j]));
        out.h.push_back(p.r[j]);
    }
    // flow: f_e - B_e (theta_i - theta_k) = 0
    for (std::size_t e = 0; e < ne; ++e) {
        SparseRow row;
        row.add(e, 1.0);
        row.add(t0 + p.ends[e].first, -p.susceptance[e]);
        row.add(t0 + p.ends[e].second, p.susceptance[e]);
        out.c.push_back(std::move(row));
        out.h.push_back(0.0);
    }
    // ACE: (E C f)_l = 0
    for (const auto& group : p.ace_groups) {
        std::vector<char> in(n, 0);
        for (std::size_t j : group) in[j] = 1;
        SparseRow row;
        for (std::size_t e = 0; e < ne; ++e) {
            const double v = (in[p.ends[e].first] ? 1.0 : 0.0) - (in[p.ends[e].second] ? 1.0 : 0.0);
            if (v != 0.0) row.add(e, v);
        }
        out.c.push_back(std::move(row));
        out.h.push_back(0.0);
    }
    return out;
}

DenseMatrix densify(const std::vector<SparseRow>& rows, std::size_t cols) {
    DenseMatrix m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < rows[i].index.size(); ++k) m(i, rows[i].index[k]) += rows[i].value[k];
    }
    return m;
}

// Map from bus position to reduced variable (kNone for pins).
std::vector<std::size_t> variable_map(const UcProblem& p) {
    std::vector<std::size_t> var(p.bus_count, 0);
    for (std::size_t pin : p.pins) var[pin] = kNone;
    std::size_t next = 0;
    for (std::size_t j = 0; j < p.bus_count; ++j) {
        if (var[j] != kNone) var[j] = next++;
    }
    return var;
}

// Rows of the weighted Laplacian restricted to the reduced variables.
std::vector<SparseRow> laplacian_rows(const UcProblem& p, const std::vector<std::size_t>& var) {
    std::vector<std::map<std::size_t, double>> acc(p.bus_count);
    for (std::size_t e = 0; e < p.line_count(); ++e) {
        const auto [a, b] = p.ends[e];
        const double w = p.susceptance[e];
        if (var[a] != kNone) {
            acc[a][var[a]] += w;
            acc[b][var[a]] -= w;
        }
        if (var[b] != kNone) {
            acc[b][var[b]] += w;
            acc[a][var[b]] -= w;
        }
    }
    std::vector<SparseRow> rows(p.bus_count);
    for (std::size_t j = 0; j < p.bus_count; ++j) {
        for (const auto& [k, v] : acc[j]) rows[j].add(k, v);
    }
    return rows;
}

std::vector<double> full_theta(const UcProblem& p, const std::vector<std::size_t>& var, std::span<const double> x) {
    std::vector<double> theta(p.bus_count, 0.0);
    for (std::size_t j = 0; j < p.bus_count; ++j) {
        if (var[j] != kNone) theta[j] = x[var[j]];
    }
    return theta;
}

}  // namespace

UcCanonical UcProblem::canonical() const {
    const CanonicalRows rows = canonical_rows(*this);
    UcCanonical out;
    out.nf = rows.nf;
    out.nd = rows.nd;
    out.ntheta = rows.nth;
    out.weight = weight;
    out.a = densify(rows.a, out.size());
    out.g = rows.g;
    out.ceq = densify(rows.c, out.size());
    out.h = rows.h;
    out.box_lo = d_min;
    out.box_hi = d_max;
    return out;
}

namespace {

struct RowTag {
    enum class Kind { line, box, ace } kind;
    std::size_t index;
};

QpProblem reduced_problem(const UcProblem& p, std::vector<RowTag>* tags) {
    const std::vector<std::size_t> var = variable_map(p);
    const std::size_t nv = p.bus_count - p.pins.size();
    const std::vector<SparseRow> lrows = laplacian_rows(p, var);

    QpProblem qp;
    qp.n = nv;
    qp.h = DenseMatrix(nv, nv);
    qp.q.assign(nv, 0.0);
    for (std::size_t j = 0; j < p.bus_count; ++j) {
        const SparseRow& l = lrows[j];
        const double w = p.weight[j];
        for (std::size_t a = 0; a < l.index.size(); ++a) {
            qp.q[l.index[a]] -= w * p.r[j] * l.value[a];
            for (std::size_t b = 0; b < l.index.size(); ++b) qp.h(l.index[a], l.index[b]) += w * l.value[a] * l.value[b];
        }
    }

    RowTag tag{RowTag::Kind::line, 0};
    auto push = [&](SparseRow row, double lo, double hi) {
        if (!std::isfinite(lo) && !std::isfinite(hi)) return;
        if (row.index.empty() && lo <= 0.0 && 0.0 <= hi) return;
        qp.add_row(std::move(row), lo, hi);
        if (tags) tags->push_back(tag);
    };
    for (std::size_t e = 0; e < p.line_count(); ++e) {
        const auto [a, b] = p.ends[e];
        SparseRow row;
        if (var[a] != kNone) row.add(var[a], p.susceptance[e]);
        if (var[b] != kNone) row.add(var[b], -p.susceptance[e]);
        tag = {RowTag::Kind::line, e};
        push(std::move(row), p.flow_lo[e], p.flow_hi[e]);
    }
    // d = p.r - L theta in [p.d_min, p.d_max]
    for (std::size_t j = 0; j < p.bus_count; ++j) {
        tag = {RowTag::Kind::box, j};
        push(lrows[j], p.r[j] - p.d_max[j], p.r[j] - p.d_min[j]);
    }
    // zero net interchange of each ACE group
    for (std::size_t g = 0; g < p.ace_groups.size(); ++g) {
        const auto& group = p.ace_groups[g];
        tag = {RowTag::Kind::ace, g};
        std::vector<char> in(p.bus_count, 0);
        for (std::size_t j : group) in[j] = 1;
        std::map<std::size_t, double> acc;
        for (std::size_t e = 0; e < p.line_count(); ++e) {
            const auto [a, b] = p.ends[e];
            const double sign = (in[a] ? 1.0 : 0.0) - (in[b] ? 1.0 : 0.0);
            if (sign == 0.0) continue;
            if (var[a] != kNone) acc[var[a]] += sign * p.susceptance[e];
            if (var[b] != kNone) acc[var[b]] -= sign * p.susceptance[e];
        }
        SparseRow row;
        for (const auto& [k, v] : acc) {
            if (v != 0.0) row.add(k, v);
        }
        push(std::move(row), 0.0, 0.0);
    }
    return qp;
}

}  // namespace

QpProblem UcProblem::reduced() const { return reduced_problem(*this, nullptr); }

UcProblem build_uc_problem(const Network& network, const std::vector<std::vector<int>>& areas,
                           std::span<const double> r, const LineMask& removed,
                           std::span<const std::pair<double, double>> flow_headroom) {
    const std::size_t n = network.bus_count();
    if (r.size() != n) throw std::invalid_argument("build_uc_problem: imbalance vector size mismatch");
    if (!flow_headroom.empty() && flow_headroom.size() != network.line_count())
        throw std::invalid_argument("build_uc_problem: headroom vector size mismatch");
    UcProblem p;
    p.bus_count = n;
    for (std::size_t e = 0; e < network.line_count(); ++e) {
        if (!removed.empty() && removed[e]) continue;
        p.line.push_back(e);
        p.ends.emplace_back(network.from_index(e), network.to_index(e));
        p.susceptance.push_back(network.lines[e].susceptance);
        if (flow_headroom.empty()) {
            p.flow_lo.push_back(-network.lines[e].capacity);
            p.flow_hi.push_back(network.lines[e].capacity);
        } else {
            p.flow_lo.push_back(flow_headroom[e].first);
            p.flow_hi.push_back(flow_headroom[e].second);
        }
    }
    p.r.assign(r.begin(), r.end());
    for (const Bus& b : network.buses) {
        p.d_min.push_back(b.d_min);
        p.d_max.push_back(b.d_max);
    }
    p.weight.assign(n, 1.0);
    p.allowance.assign(n, 0.0);

    if (areas.empty()) {
        p.area_of = network.area_of();
        p.ace_groups.assign(network.area_count(), {});
    } else {
        p.area_of.assign(n, kNone);
        p.ace_groups.assign(areas.size(), {});
        for (std::size_t a = 0; a < areas.size(); ++a) {
            for (int id : areas[a]) p.area_of[network.bus_index(id)] = a;
        }
        if (std::find(p.area_of.begin(), p.area_of.end(), kNone) != p.area_of.end())
            throw std::invalid_argument("build_uc_problem: areas do not cover every bus");
    }
    for (std::size_t j = 0; j < n; ++j) p.ace_groups[p.area_of[j]].push_back(j);
    for (std::size_t a = 0; a < p.ace_groups.size(); ++a) p.ace_areas.push_back({a});

    Topology t;
    t.vertex_count = n;
    t.edges = p.ends;
    const Components comps = connected_components(t, bus_ids(network));
    for (const auto& m : comps.members) p.pins.push_back(m.front());
    return p;
}

void set_boxes(UcProblem& problem, std::span<const double> d_min, std::span<const double> d_max) {
    if (d_min.size() != problem.bus_count || d_max.size() != problem.bus_count)
        throw std::invalid_argument("set_boxes: size mismatch");
    problem.d_min.assign(d_min.begin(), d_min.end());
    problem.d_max.assign(d_max.begin(), d_max.end());
}

namespace {

std::vector<double> canonical_point(const UcProblem& p, std::span<const double> theta) {
    const std::size_t ne = p.line_count();
    const std::size_t n = p.bus_count;
    std::vector<double> x(ne + 2 * n, 0.0);
    std::vector<double> lt(n, 0.0);
    for (std::size_t e = 0; e < ne; ++e) {
        const auto [a, b] = p.ends[e];
        const double f = p.susceptance[e] * (theta[a] - theta[b]);
        x[e] = f;
        lt[a] += f;
        lt[b] -= f;
    }
    for (std::size_t j = 0; j < n; ++j) {
        x[ne + j] = p.r[j] - lt[j];
        x[ne + n + j] = theta[j];
    }
    return x;
}


// Re-solve the equality QP on the active set found by the interior point, in
// the (theta, d) space where the KKT matrix is not squared. Rows with a wrong
// multiplier sign are released and violated rows added, a few rounds at most.
struct Polished {
    std::vector<double> x;
    std::vector<double> multipliers;
};

struct ActiveRow {
    std::size_t row;   // qp row
    double bound;      // bound on g x in the reduced row
    int side;          // +1 upper, -1 lower, 0 equality, in reduced terms
};

std::optional<Polished> solve_active_set(const UcProblem& p, const QpProblem& qp, const std::vector<RowTag>& tags,
                                         const std::vector<SparseRow>& lrows, const std::vector<ActiveRow>& active,
                                         std::vector<double>& nu_out) {
    using Triplet = Eigen::Triplet<double>;
    const std::size_t nv = qp.n;
    const std::size_t n = p.bus_count;
    // unknowns: theta (nv), d (n), balance multipliers (n), active multipliers
    const std::size_t d0 = nv;
    const std::size_t l0 = nv + n;
    const std::size_t a0 = nv + 2 * n;
    const std::size_t dim = a0 + active.size();
    const double delta = 1e-8;
    std::vector<Triplet> trip;
    auto sym = [&](std::size_t a, std::size_t b, double v) {
        trip.emplace_back(a, b, v);
        if (a != b) trip.emplace_back(b, a, v);
    };
    for (std::size_t j = 0; j < n; ++j) {
        trip.emplace_back(d0 + j, d0 + j, p.weight[j]);
        sym(l0 + j, d0 + j, 1.0);
        for (std::size_t t = 0; t < lrows[j].index.size(); ++t) sym(l0 + j, lrows[j].index[t], lrows[j].value[t]);
    }
    const auto sdim = static_cast<Eigen::Index>(dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sdim);
    for (std::size_t j = 0; j < n; ++j) rhs[static_cast<Eigen::Index>(l0 + j)] = p.r[j];
    for (std::size_t k = 0; k < active.size(); ++k) {
        const std::size_t i = active[k].row;
        if (tags[i].kind == RowTag::Kind::box) {
            // L_j theta = r_j - d_j
            const std::size_t j = tags[i].index;
            sym(a0 + k, d0 + j, 1.0);
            rhs[static_cast<Eigen::Index>(a0 + k)] = p.r[j] - active[k].bound;
        } else {
            for (std::size_t t = 0; t < qp.rows[i].index.size(); ++t)
                sym(a0 + k, qp.rows[i].index[t], qp.rows[i].value[t]);
            rhs[static_cast<Eigen::Index>(a0 + k)] = active[k].bound;
        }
    }
    Eigen::SparseMatrix<double> exact(sdim, sdim);
    exact.setFromTriplets(trip.begin(), trip.end());
    for (std::size_t k = 0; k < l0; ++k) trip.emplace_back(k, k, delta);
    for (std::size_t k = l0; k < dim; ++k) trip.emplace_back(k, k, -delta);
    Eigen::SparseMatrix<double> reg(sdim, sdim);
    reg.setFromTriplets(trip.begin(), trip.end());

    // LDLT without pivoting hits zero pivots on degenerate active sets
    reg.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(reg);
    if (lu.info() != Eigen::Success) return std::nullopt;
    Eigen::VectorXd sol = lu.solve(rhs);
    const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
    for (int it = 0; it < 50; ++it) {
        const Eigen::VectorXd res = rhs - exact * sol;
        if (!res.allFinite()) return std::nullopt;
        if (res.cwiseAbs().maxCoeff() <= 1e-13 * scale) break;
        sol += lu.solve(res);
    }
    if ((rhs - exact * sol).cwiseAbs().maxCoeff() > 1e-10 * scale) return std::nullopt;

    Polished out;
    out.x.assign(sol.data(), sol.data() + nv);
    out.multipliers.assign(qp.rows.size(), 0.0);
    nu_out.assign(active.size(), 0.0);
    for (std::size_t k = 0; k < active.size(); ++k) {
        const double nu = sol[static_cast<Eigen::Index>(a0 + k)];
        const std::size_t i = active[k].row;
        // d_j = r_j - L_j theta flips the sign back to the reduced row
        out.multipliers[i] = tags[i].kind == RowTag::Kind::box ? -nu : nu;
        nu_out[k] = out.multipliers[i];
    }
    return out;
}

std::optional<Polished> polish_from(const UcProblem& p, const QpProblem& qp, const std::vector<RowTag>& tags,
                                    const std::vector<SparseRow>& lrows, const QpResult& ipm, double ratio) {
    // a row starts active when its slack is small against its multiplier
    std::vector<ActiveRow> active;
    for (std::size_t i = 0; i < qp.rows.size(); ++i) {
        const double lo = qp.lo[i];
        const double hi = qp.hi[i];
        const double y = ipm.multipliers[i];
        const double gx = qp.rows[i].dot(ipm.x);
        if (lo == hi) {
            active.push_back({i, lo, 0});
        } else if (y > 0.0 && hi - gx < ratio * y) {
            active.push_back({i, hi, 1});
        } else if (y < 0.0 && gx - lo < -ratio * y) {
            active.push_back({i, lo, -1});
        }
    }
    std::vector<double> nu;
    for (int round = 0; round < 8; ++round) {
        auto sol = solve_active_set(p, qp, tags, lrows, active, nu);
        if (!sol) return std::nullopt;
        std::vector<ActiveRow> keep;
        bool dropped = false;
        for (std::size_t k = 0; k < active.size(); ++k) {
            const double tol = 1e-10 * (1.0 + std::abs(nu[k]));
            if ((active[k].side > 0 && nu[k] < -tol) || (active[k].side < 0 && nu[k] > tol)) {
                dropped = true;
                continue;
            }
            keep.push_back(active[k]);
        }
        if (dropped) {
            active = std::move(keep);
            continue;
        }
        std::vector<char> in(qp.rows.size(), 0);
        for (const ActiveRow& a : active) in[a.row] = 1;
        bool added = false;
        for (std::size_t i = 0; i < qp.rows.size(); ++i) {
            if (in[i]) continue;
            const double gx = qp.rows[i].dot(sol->x);
            const double tol = 1e-10 * (1.0 + std::abs(gx));
            if (gx > qp.hi[i] + tol) {
                active.push_back({i, qp.hi[i], 1});
                added = true;
            } else if (gx < qp.lo[i] - tol) {
                active.push_back({i, qp.lo[i], -1});
                added = true;
            }
        }
        if (!added) return sol;
    }
    return std::nullopt;
}

// Weakly active rows guessed wrongly can make the equality system
// inconsistent; retry with stricter guesses and let the rounds add rows back.
std::optional<Polished> polish(const UcProblem& p, const QpProblem& qp, const std::vector<RowTag>& tags,
                               const QpResult& ipm) {
    const std::vector<std::size_t> var = variable_map(p);
    const std::vector<SparseRow> lrows = laplacian_rows(p, var);
    for (const double ratio : {1.0, 1e-2, 1e-4}) {
        if (auto sol = polish_from(p, qp, tags, lrows, ipm, ratio)) return sol;
    }
    return std::nullopt;
}

}  // namespace

FeasibilityReport check_feasible(const UcProblem& problem) {
    const QpProblem qp = problem.reduced();
    const FeasibilityResult f = check_feasibility(qp);
    FeasibilityReport out;
    out.feasible = f.feasible;
    out.min_relaxation = f.min_relaxation;
    out.slack_sum = f.slack_sum;
    const std::vector<std::size_t> var = variable_map(problem);
    out.certificate = canonical_point(problem, full_theta(problem, var, f.point));
    return out;
}

UcSolution solve_uc(const UcProblem& problem, const UcSolveOptions& options) {
    std::vector<RowTag> tags;
    const QpProblem qp = reduced_problem(problem, &tags);
    const std::vector<std::size_t> var = variable_map(problem);
    QpOptions opt;
    if (options.start_theta) {
        if (options.start_theta->size() != problem.bus_count)
            throw std::invalid_argument("solve_uc: start has wrong size");
        std::vector<double> start(qp.n, 0.0);
        for (std::size_t j = 0; j < problem.bus_count; ++j) {
            if (var[j] != kNone) start[var[j]] = (*options.start_theta)[j];
        }
        opt.start = std::move(start);
    }
    QpResult res = solve_qp(qp, opt);
    // A stalled interior point close to the optimum still gives a usable active set.
    if (res.converged || res.merit <= 1e-4) {
        if (const auto pol = polish(problem, qp, tags, res)) {
            const double kkt = kkt_residual(qp, pol->x, pol->multipliers);
            if (kkt <= (res.converged ? std::max(res.kkt_residual, 1e-9) : 1e-9)) {
                res.x = pol->x;
                res.multipliers = pol->multipliers;
                res.kkt_residual = kkt;
                res.converged = true;
            }
        }
    }
    if (!res.converged) {
        std::ostringstream msg;
        msg << "solve_uc: interior point did not converge (kkt " << res.kkt_residual
            << "); the problem is probably infeasible";
        throw SolverError(msg.str());
    }
    UcSolution out;
    out.theta = full_theta(problem, var, res.x);
    const std::vector<double> x = canonical_point(problem, out.theta);
    const std::size_t ne = problem.line_count();
    out.flows.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(ne));
    out.d.assign(x.begin() + static_cast<std::ptrdiff_t>(ne),
                 x.begin() + static_cast<std::ptrdiff_t>(ne + problem.bus_count));
    out.objective = 0.0;
    for (std::size_t j = 0; j < problem.bus_count; ++j) out.objective += 0.5 * problem.weight[j] * out.d[j] * out.d[j];
    out.kkt_residual = res.kkt_residual;
    out.converged = true;
    return out;
}

EquilibriumPoint to_equilibrium(const Network& network, const UcProblem& problem, const UcSolution& solution,
                                std::span<const double> base_min, std::span<const double> base_max) {
    const std::size_t n = problem.bus_count;
    EquilibriumPoint eq;
    eq.omega.assign(n, 0.0);
    eq.d = solution.d;
    eq.theta = solution.theta;
    eq.flows.assign(network.line_count(), 0.0);
    for (std::size_t e = 0; e < problem.line_count(); ++e) eq.flows[problem.line[e]] = solution.flows[e];
    eq.shed.assign(n, 0.0);
    eq.curtailed.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double below = base_min[j] - eq.d[j];
        const double above = eq.d[j] - base_max[j];
        // Ignore solver-level overshoot of the box.
        const double slack = 1e-9 * (1.0 + std::abs(base_min[j]) + std::abs(base_max[j]));
        if (below > slack) {
            if (network.buses[j].demand < 0.0) {
                eq.shed[j] = below;
            } else {
                eq.unserved += below;
            }
        }
        if (above > slack) eq.curtailed[j] = above;
    }
    return eq;
}

Trajectory integrate_primal_dual(const UcProblem& problem, const IntegratorSettings& s) {
    if (!(s.step > 0.0)) throw std::invalid_argument("integrate_primal_dual: step must be positive");
    const CanonicalRows rows = canonical_rows(problem);
    const std::size_t nx = rows.nf + rows.nd + rows.nth;
    const std::size_t d0 = rows.nf;
    const std::size_t na = rows.a.size();
    const std::size_t nc = rows.c.size();
    const double rho = s.penalty;

    double r_max = 0.0;
    for (double v : problem.r) r_max = std::max(r_max, std::abs(v));
    const double cap = s.dual_cap > 0.0 ? s.dual_cap : 1e3 * (r_max + 1.0);

    std::vector<double> x(nx, 0.0);
    for (std::size_t j = 0; j < rows.nd; ++j) x[d0 + j] = std::clamp(0.0, problem.d_min[j], problem.d_max[j]);
    std::vector<double> l1(na, 0.0), l2(nc, 0.0);
    std::vector<double> u(na), v(nc), grad(nx);

    auto residuals = [&] {
        for (std::size_t i = 0; i < na; ++i) u[i] = std::isfinite(rows.g[i]) ? rows.a[i].dot(x) - rows.g[i] : -kInf;
        for (std::size_t i = 0; i < nc; ++i) v[i] = rows.c[i].dot(x) - rows.h[i];
    };
    // Gradient of the (optionally augmented) Lagrangian in x.
    auto lagrangian_gradient = [&](double penalty) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t j = 0; j < rows.nd; ++j) grad[d0 + j] = problem.weight[j] * x[d0 + j];
        for (std::size_t i = 0; i < na; ++i) {
            if (!std::isfinite(u[i])) continue;
            const double m = l1[i] + penalty * std::max(u[i], 0.0);
            if (m == 0.0) continue;
            const SparseRow& row = rows.a[i];
            for (std::size_t k = 0; k < row.index.size(); ++k) grad[row.index[k]] += m * row.value[k];
        }
        for (std::size_t i = 0; i < nc; ++i) {
            const double m = l2[i] + penalty * v[i];
            if (m == 0.0) continue;
            const SparseRow& row = rows.c[i];
            for (std::size_t k = 0; k < row.index.size(); ++k) grad[row.index[k]] += m * row.value[k];
        }
    };
    auto kkt = [&] {
        lagrangian_gradient(0.0);
        double worst = 0.0;
        for (std::size_t k = 0; k < nx; ++k) {
            double moved = x[k] - grad[k];
            if (k >= d0 && k < d0 + rows.nd) {
                const std::size_t j = k - d0;
                moved = std::clamp(moved, problem.d_min[j], problem.d_max[j]);
            }
            worst = std::max(worst, std::abs(x[k] - moved));
        }
        for (std::size_t i = 0; i < na; ++i) {
            if (!std::isfinite(u[i])) continue;
            worst = std::max(worst, std::max(u[i], 0.0));
            worst = std::max(worst, std::abs(l1[i] * u[i]));
        }
        for (std::size_t i = 0; i < nc; ++i) worst = std::max(worst, std::abs(v[i]));
        return worst;
    };

    Trajectory traj;
    auto record = [&](double t) {
        traj.times.push_back(t);
        traj.primal.push_back(x);
        traj.dual_ineq.push_back(l1);
        traj.dual_eq.push_back(l2);
    };

    const std::size_t nl = na + nc;
    std::vector<double> block_min(nl, kInf), prev_min(nl, kInf);
    bool have_prev = false;
    double block_start = 0.0;
    const auto steps = static_cast<std::size_t>(std::ceil(s.horizon / s.step));
    double t = 0.0;
    residuals();
    if (s.record_every > 0) record(0.0);

    for (std::size_t k = 0; k <= steps; ++k) {
        t = static_cast<double>(k) * s.step;
        if (k % 10 == 0) {
            const double r = kkt();
            traj.final_kkt = r;
            if (r <= s.kkt_tolerance) {
                traj.verdict.status = DivergenceStatus::converged;
                break;
            }
        }
        // divergence bookkeeping on |lambda|
        double peak = 0.0;
        for (std::size_t i = 0; i < nl; ++i) {
            const double m = std::abs(i < na ? l1[i] : l2[i - na]);
            block_min[i] = std::min(block_min[i], m);
            peak = std::max(peak, m);
        }
        traj.verdict.peak_dual = std::max(traj.verdict.peak_dual, peak);
        if (t - block_start >= s.window) {
            if (have_prev) {
                for (std::size_t i = 0; i < nl; ++i) {
                    const double m = std::abs(i < na ? l1[i] : l2[i - na]);
                    if (m > cap && block_min[i] > prev_min[i]) {
                        traj.verdict.status = DivergenceStatus::diverged;
                        traj.verdict.trigger_index = i;
                        break;
                    }
                }
            }
            if (traj.verdict.status == DivergenceStatus::diverged) break;
            prev_min = block_min;
            std::fill(block_min.begin(), block_min.end(), kInf);
            have_prev = true;
            block_start = t;
        }
        if (k == steps) break;

        lagrangian_gradient(rho);
        for (std::size_t q = 0; q < nx; ++q) x[q] -= s.step * grad[q];
        for (std::size_t j = 0; j < rows.nd; ++j)
            x[d0 + j] = std::clamp(x[d0 + j], problem.d_min[j], problem.d_max[j]);
        for (std::size_t i = 0; i < na; ++i) {
            if (std::isfinite(u[i])) l1[i] = std::max(0.0, l1[i] + s.step * u[i]);
        }
        for (std::size_t i = 0; i < nc; ++i) l2[i] += s.step * v[i];
        residuals();

        double probe = 0.0;
        for (double val : x) probe += val;
        for (double val : l2) probe += val;
        if (!std::isfinite(probe)) {
            std::ostringstream msg;
            msg << "integrate_primal_dual: state became non-finite at t=" << t << "; use a smaller step than "
                << s.step;
            throw SolverError(msg.str());
        }
        if (s.record_every > 0 && (k + 1) % s.record_every == 0) record(t + s.step);
    }
    traj.verdict.time = t;
    if (s.record_every == 0 || traj.times.empty() || traj.times.back() != t) record(t);
    if (traj.verdict.status != DivergenceStatus::diverged) traj.final_kkt = kkt();
    return traj;
}

void apply_action(UcProblem& problem, const LiftAction& action, std::span<const double> sheddable) {
    if (action.kind == LiftAction::Kind::lift_ace) {
        std::size_t ga = kNone;
        std::size_t gb = kNone;
        for (std::size_t g = 0; g < problem.ace_areas.size(); ++g) {
            const auto& areas = problem.ace_areas[g];
            if (std::find(areas.begin(), areas.end(), action.area_a) != areas.end()) ga = g;
            if (std::find(areas.begin(), areas.end(), action.area_b) != areas.end()) gb = g;
        }
        if (ga == kNone || gb == kNone) throw std::invalid_argument("lift_ace: unknown area");
        if (ga == gb) return;
        if (gb < ga) std::swap(ga, gb);
        auto& buses = problem.ace_groups[ga];
        buses.insert(buses.end(), problem.ace_groups[gb].begin(), problem.ace_groups[gb].end());
        std::sort(buses.begin(), buses.end());
        auto& areas = problem.ace_areas[ga];
        areas.insert(areas.end(), problem.ace_areas[gb].begin(), problem.ace_areas[gb].end());
        std::sort(areas.begin(), areas.end());
        problem.ace_groups.erase(problem.ace_groups.begin() + static_cast<std::ptrdiff_t>(gb));
        problem.ace_areas.erase(problem.ace_areas.begin() + static_cast<std::ptrdiff_t>(gb));
        return;
    }
    for (std::size_t j : action.buses) {
        if (j >= problem.bus_count) throw std::invalid_argument("allow_shed: bus out of range");
        double grant = action.increment;
        if (!sheddable.empty()) grant = std::clamp(sheddable[j] - problem.allowance[j], 0.0, grant);
        problem.allowance[j] += grant;
        problem.d_min[j] -= grant;
    }
}

LiftResult lift_constraints(const UcProblem& problem, const LiftingLadder& ladder, std::span<const double> sheddable) {
    LiftResult out;
    out.problem = problem;
    if (check_feasible(out.problem).feasible) return out;
    for (const LiftAction& action : ladder.actions) {
        apply_action(out.problem, action, sheddable);
        out.applied.push_back(action);
        if (check_feasible(out.problem).feasible) return out;
    }
    std::fill(out.problem.d_min.begin(), out.problem.d_min.end(), -kInf);
    std::fill(out.problem.d_max.begin(), out.problem.d_max.end(), kInf);
    out.terminal = true;
    return out;
}

LiftingLadder default_ladder(const Network& network, const UcProblem& problem,
                             std::span<const std::size_t> associated_areas, std::span<const double> sheddable) {
    LiftingLadder ladder;
    std::size_t area_count = 0;
    for (std::size_t a : problem.area_of) area_count = std::max(area_count, a + 1);

    // area adjacency over surviving lines
    std::vector<std::vector<char>> adjacent(area_count, std::vector<char>(area_count, 0));
    for (const auto& [a, b] : problem.ends) {
        const std::size_t x = problem.area_of[a];
        const std::size_t y = problem.area_of[b];
        if (x != y) adjacent[x][y] = adjacent[y][x] = 1;
    }
    std::vector<char> merged(area_count, 0);
    std::vector<std::size_t> order(associated_areas.begin(), associated_areas.end());
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());
    if (order.empty() && area_count > 0) order.push_back(0);
    const std::size_t anchor = order.front();
    for (std::size_t a : order) {
        if (!merged[a] && a != anchor) {
            LiftAction act;
            act.kind = LiftAction::Kind::lift_ace;
            act.area_a = anchor;
            act.area_b = a;
            ladder.actions.push_back(act);
        }
        merged[a] = 1;
    }
    // breadth-first outward, then whatever is unreachable
    for (std::size_t head = 0; head < order.size(); ++head) {
        for (std::size_t b = 0; b < area_count; ++b) {
            if (merged[b] || !adjacent[order[head]][b]) continue;
            merged[b] = 1;
            order.push_back(b);
            LiftAction act;
            act.kind = LiftAction::Kind::lift_ace;
            act.area_a = anchor;
            act.area_b = b;
            ladder.actions.push_back(act);
        }
    }
    for (std::size_t b = 0; b < area_count; ++b) {
        if (merged[b]) continue;
        LiftAction act;
        act.kind = LiftAction::Kind::lift_ace;
        act.area_a = anchor;
        act.area_b = b;
        ladder.actions.push_back(act);
    }

    auto shed_steps = [&](const std::vector<std::size_t>& buses) {
        double largest = 0.0;
        for (std::size_t j : buses) largest = std::max(largest, sheddable[j]);
        if (buses.empty() || largest <= 0.0) return;
        double step = largest / 64.0;
        double granted = 0.0;
        while (granted < largest * (1.0 - 1e-12)) {
            LiftAction act;
            act.kind = LiftAction::Kind::allow_shed;
            act.buses = buses;
            act.increment = step;
            ladder.actions.push_back(act);
            granted += step;
            step = granted;
        }
    };
    std::vector<char> assoc(area_count, 0);
    for (std::size_t a : associated_areas) assoc[a] = 1;
    std::vector<std::size_t> local_loads;
    std::vector<std::size_t> all_loads;
    for (std::size_t j = 0; j < problem.bus_count; ++j) {
        if (sheddable.empty() || sheddable[j] <= 0.0 || network.buses[j].demand >= 0.0) continue;
        all_loads.push_back(j);
        if (assoc[problem.area_of[j]]) local_loads.push_back(j);
    }
    if (!sheddable.empty()) {
        shed_steps(local_loads);
        if (all_loads.size() > local_loads.size()) shed_steps(all_loads);
    }
    return ladder;
}

LiftingLadder parse_ladder(const std::string& json_text, const Network& network) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("ladder: ") + e.what(), 1, e.byte);
    }
    if (!doc.is_array()) throw ParseError("ladder: expected a JSON array of actions", 1, 1);
    LiftingLadder ladder;
    for (const auto& item : doc) {
        LiftAction act;
        if (item.contains("lift_ace")) {
            const auto pair = item["lift_ace"].get<std::vector<std::size_t>>();
            if (pair.size() != 2) throw ParseError("ladder: lift_ace needs two area indices", 1, 1);
            act.kind = LiftAction::Kind::lift_ace;
            act.area_a = pair[0];
            act.area_b = pair[1];
        } else if (item.contains("allow_shed")) {
            act.kind = LiftAction::Kind::allow_shed;
            for (int id : item["allow_shed"].get<std::vector<int>>()) act.buses.push_back(network.bus_index(id));
            act.increment = item.value("increment", 0.0);
            if (!(act.increment > 0.0)) throw ParseError("ladder: allow_shed needs a positive increment", 1, 1);
        } else {
            throw ParseError("ladder: unknown action " + item.dump(), 1, 1);
        }
        ladder.actions.push_back(std::move(act));
    }
    return ladder;
}

}  // namespace gridcascade
