#include "gridcascade/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gridcascade/errors.hpp"

namespace gridcascade {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

struct OneSided {
    std::size_t row;
    double sign;   // sign * g x <= rhs
    double rhs;
};

// Largest step in (0, 1] keeping v + a dv >= 0.
double max_step(std::span<const double> v, std::span<const double> dv) {
    double a = 1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    }
    return a;
}

class InteriorPoint {
public:
    InteriorPoint(const QpProblem& p, const QpOptions& o) : p_(p), opt_(o), n_(p.n) {
        for (std::size_t i = 0; i < p.rows.size(); ++i) {
            const double lo = p.lo[i];
            const double hi = p.hi[i];
            if (lo > hi) {
                // Contradictory row; keep both sides so the solver reports non-convergence.
                ineq_.push_back({i, 1.0, hi});
                ineq_.push_back({i, -1.0, -lo});
            } else if (lo == hi) {
                eq_.push_back(i);
            } else {
                if (std::isfinite(hi)) ineq_.push_back({i, 1.0, hi});
                if (std::isfinite(lo)) ineq_.push_back({i, -1.0, -lo});
            }
        }
        has_h_ = p.h.rows() == n_;
    }

    QpResult run() {
        const std::size_t m = eq_.size();
        const std::size_t k = ineq_.size();
        std::vector<double> x(n_, 0.0);
        if (opt_.start) {
            if (opt_.start->size() != n_) throw std::invalid_argument("solve_qp: start has wrong size");
            x = *opt_.start;
        }
        std::vector<double> y(m, 0.0);
        std::vector<double> z(k, 1.0);
        std::vector<double> s(k, 1.0);
        {
            for (std::size_t i = 0; i < k; ++i) {
                const double slack = ineq_[i].rhs - ineq_[i].sign * p_.rows[ineq_[i].row].dot(x);
                s[i] = std::max(slack, 1.0);
            }
        }

        double q_norm = inf_norm(p_.q);
        double b_norm = 0.0;
        for (std::size_t e : eq_) b_norm = std::max(b_norm, std::abs(p_.lo[e]));
        double h_norm = 0.0;
        for (const auto& c : ineq_) h_norm = std::max(h_norm, std::abs(c.rhs));

        std::vector<double> rd(n_), rp(m), rg(k), rc(k);
        std::vector<double> dx(n_), dy(m), dz(k), ds(k);
        std::vector<double> dx_a(n_), dy_a(m), dz_a(k), ds_a(k);
        QpResult res;
        const double tol = opt_.tolerance;
        double best_merit = kInfinity;
        std::vector<double> best_x = x, best_y = y, best_z = z;

        for (int it = 0; it <= opt_.max_iterations; ++it) {
            residuals(x, y, z, s, rd, rp, rg);
            const double mu = k > 0 ? dot(s, z) / static_cast<double>(k) : 0.0;
            const bool done = inf_norm(rd) <= tol * (1.0 + q_norm) && inf_norm(rp) <= tol * (1.0 + b_norm) &&
                              inf_norm(rg) <= tol * (1.0 + h_norm) && mu <= tol;
            res.iterations = it;
            const double merit = std::max({inf_norm(rd) / (1.0 + q_norm), inf_norm(rp) / (1.0 + b_norm),
                                           inf_norm(rg) / (1.0 + h_norm), mu});
            if (merit < best_merit) {
                best_merit = merit;
                best_x = x;
                best_y = y;
                best_z = z;
            }
            if (done) {
                res.converged = true;
                break;
            }
            if (it == opt_.max_iterations) break;
            if (!std::isfinite(merit)) break;
            // Past the attainable accuracy the iterates only degrade.
            if (best_merit <= opt_.acceptable && merit > 1e4 * best_merit) break;

            if (!assemble(z, s)) break;

            // predictor
            for (std::size_t i = 0; i < k; ++i) rc[i] = s[i] * z[i];
            direction(z, s, rd, rp, rg, rc, dx_a, dy_a, dz_a, ds_a);
            const double ap = max_step(s, ds_a);
            const double ad = max_step(z, dz_a);
            const double a_aff = std::min(ap, ad);
            double mu_aff = 0.0;
            for (std::size_t i = 0; i < k; ++i) mu_aff += (s[i] + a_aff * ds_a[i]) * (z[i] + a_aff * dz_a[i]);
            if (k > 0) mu_aff /= static_cast<double>(k);
            const double sigma = mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;

            // corrector
            for (std::size_t i = 0; i < k; ++i) rc[i] = s[i] * z[i] + ds_a[i] * dz_a[i] - sigma * mu;
            direction(z, s, rd, rp, rg, rc, dx, dy, dz, ds);
            double alpha = std::min(max_step(s, ds), max_step(z, dz));
            alpha = std::min(1.0, 0.995 * alpha);
            if (k == 0) alpha = 1.0;

            for (std::size_t j = 0; j < n_; ++j) x[j] += alpha * dx[j];
            for (std::size_t j = 0; j < m; ++j) y[j] += alpha * dy[j];
            for (std::size_t i = 0; i < k; ++i) {
                z[i] = std::max(z[i] + alpha * dz[i], 1e-300);
                s[i] = std::max(s[i] + alpha * ds[i], 1e-300);
            }
        }

        if (!res.converged) {
            x = best_x;
            y = best_y;
            z = best_z;
            res.converged = best_merit <= opt_.acceptable;
        }
        res.merit = best_merit;
        res.x = x;
        res.multipliers.assign(p_.rows.size(), 0.0);
        for (std::size_t j = 0; j < m; ++j) res.multipliers[eq_[j]] += y[j];
        for (std::size_t i = 0; i < k; ++i) res.multipliers[ineq_[i].row] += ineq_[i].sign * z[i];
        res.objective = objective(x);
        res.kkt_residual = kkt_residual(p_, res.x, res.multipliers);
        return res;
    }

private:
    static double dot(std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    }

    double objective(std::span<const double> x) const {
        double v = dot(p_.q, x);
        if (has_h_) {
            const std::vector<double> hx = p_.h.multiply(x);
            v += 0.5 * dot(hx, x);
        }
        return v;
    }

    void residuals(std::span<const double> x, std::span<const double> y, std::span<const double> z,
                   std::span<const double> s, std::vector<double>& rd, std::vector<double>& rp,
                   std::vector<double>& rg) const {
        if (has_h_) {
            rd = p_.h.multiply(x);
        } else {
            std::fill(rd.begin(), rd.end(), 0.0);
        }
        for (std::size_t j = 0; j < n_; ++j) rd[j] += p_.q[j];
        for (std::size_t j = 0; j < eq_.size(); ++j) {
            const SparseRow& r = p_.rows[eq_[j]];
            rp[j] = r.dot(x) - p_.lo[eq_[j]];
            for (std::size_t t = 0; t < r.index.size(); ++t) rd[r.index[t]] += y[j] * r.value[t];
        }
        for (std::size_t i = 0; i < ineq_.size(); ++i) {
            const SparseRow& r = p_.rows[ineq_[i].row];
            const double sg = ineq_[i].sign;
            rg[i] = sg * r.dot(x) + s[i] - ineq_[i].rhs;
            for (std::size_t t = 0; t < r.index.size(); ++t) rd[r.index[t]] += z[i] * sg * r.value[t];
        }
    }

    // M = H + G^T (Z/S) G + delta I, then the equality Schur complement.
    bool assemble(std::span<const double> z, std::span<const double> s) {
        mat_ = has_h_ ? p_.h : DenseMatrix(n_, n_);
        for (std::size_t i = 0; i < ineq_.size(); ++i) {
            const SparseRow& r = p_.rows[ineq_[i].row];
            const double w = z[i] / s[i];
            for (std::size_t a = 0; a < r.index.size(); ++a) {
                const double wa = w * r.value[a];
                for (std::size_t b = 0; b < r.index.size(); ++b) mat_(r.index[a], r.index[b]) += wa * r.value[b];
            }
        }
        for (std::size_t j = 0; j < n_; ++j) mat_(j, j) += 1e-10;
        chol_.factor(mat_, 1e-16);

        const std::size_t m = eq_.size();
        if (m == 0) return true;
        v_.assign(m, std::vector<double>(n_, 0.0));
        for (std::size_t j = 0; j < m; ++j) {
            const SparseRow& r = p_.rows[eq_[j]];
            for (std::size_t t = 0; t < r.index.size(); ++t) v_[j][r.index[t]] += r.value[t];
            chol_.solve_in_place(v_[j]);
        }
        DenseMatrix schur(m, m);
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = 0; b <= a; ++b) {
                const double val = p_.rows[eq_[a]].dot(v_[b]);
                schur(a, b) = val;
                schur(b, a) = val;
            }
        }
        schur_.factor(schur, 1e-12);
        return true;
    }

    void direction(std::span<const double> z, std::span<const double> s, std::span<const double> rd,
                   std::span<const double> rp, std::span<const double> rg, std::span<const double> rc,
                   std::vector<double>& dx, std::vector<double>& dy, std::vector<double>& dz,
                   std::vector<double>& ds) const {
        // rhs1 = -rd - G^T S^-1 (Z rg - rc)
        std::vector<double> rhs(n_);
        for (std::size_t j = 0; j < n_; ++j) rhs[j] = -rd[j];
        for (std::size_t i = 0; i < ineq_.size(); ++i) {
            const SparseRow& r = p_.rows[ineq_[i].row];
            const double c = ineq_[i].sign * (z[i] * rg[i] - rc[i]) / s[i];
            for (std::size_t t = 0; t < r.index.size(); ++t) rhs[r.index[t]] -= c * r.value[t];
        }
        chol_.solve_in_place(rhs);
        const std::size_t m = eq_.size();
        if (m > 0) {
            std::vector<double> w(m);
            for (std::size_t j = 0; j < m; ++j) w[j] = p_.rows[eq_[j]].dot(rhs) + rp[j];
            schur_.solve_in_place(w);
            for (std::size_t j = 0; j < m; ++j) {
                dy[j] = w[j];
                for (std::size_t t = 0; t < n_; ++t) rhs[t] -= v_[j][t] * w[j];
            }
        }
        dx = rhs;
        for (std::size_t i = 0; i < ineq_.size(); ++i) {
            const double gdx = ineq_[i].sign * p_.rows[ineq_[i].row].dot(dx);
            ds[i] = -rg[i] - gdx;
            dz[i] = (-rc[i] - z[i] * ds[i]) / s[i];
        }
    }

    const QpProblem& p_;
    const QpOptions& opt_;
    std::size_t n_;
    bool has_h_ = false;
    std::vector<std::size_t> eq_;
    std::vector<OneSided> ineq_;
    DenseMatrix mat_;
    Cholesky chol_;
    Cholesky schur_;
    std::vector<std::vector<double>> v_;
};

}  // namespace

QpResult solve_qp(const QpProblem& problem, const QpOptions& options) {
    if (problem.q.size() != problem.n) throw std::invalid_argument("solve_qp: q has wrong size");
    if (problem.lo.size() != problem.rows.size() || problem.hi.size() != problem.rows.size())
        throw std::invalid_argument("solve_qp: bound vectors do not match rows");
    InteriorPoint ipm(problem, options);
    return ipm.run();
}

double kkt_residual(const QpProblem& problem, std::span<const double> x, std::span<const double> multipliers) {
    std::vector<double> grad(problem.n, 0.0);
    if (problem.h.rows() == problem.n) grad = problem.h.multiply(x);
    for (std::size_t j = 0; j < problem.n; ++j) grad[j] += problem.q[j];
    double worst = 0.0;
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
        const SparseRow& r = problem.rows[i];
        const double y = multipliers[i];
        for (std::size_t t = 0; t < r.index.size(); ++t) grad[r.index[t]] += y * r.value[t];
        const double gx = r.dot(x);
        const double lo = problem.lo[i];
        const double hi = problem.hi[i];
        worst = std::max(worst, std::max(lo - gx, gx - hi));
        if (lo == hi) continue;
        if (y > 0.0) {
            worst = std::max(worst, std::isfinite(hi) ? y * std::abs(hi - gx) : y);
        } else if (y < 0.0) {
            worst = std::max(worst, std::isfinite(lo) ? -y * std::abs(gx - lo) : -y);
        }
    }
    return std::max(worst, inf_norm(grad));
}

FeasibilityResult check_feasibility(const QpProblem& problem, double threshold) {
    const std::size_t n = problem.n;
    QpProblem aux;
    aux.n = n + 1;
    aux.q.assign(n + 1, 0.0);
    aux.q[n] = 1.0;
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
        const double lo = problem.lo[i];
        const double hi = problem.hi[i];
        if (std::isfinite(hi)) {
            SparseRow r = problem.rows[i];
            r.add(n, -1.0);
            aux.add_row(std::move(r), -kInfinity, hi);
        }
        if (std::isfinite(lo)) {
            SparseRow r = problem.rows[i];
            r.add(n, 1.0);
            aux.add_row(std::move(r), lo, kInfinity);
        }
    }
    SparseRow t_row;
    t_row.add(n, 1.0);
    aux.add_row(std::move(t_row), 0.0, kInfinity);

    QpOptions opt;
    opt.tolerance = 1e-11;
    opt.max_iterations = 300;
    const QpResult sol = solve_qp(aux, opt);

    FeasibilityResult out;
    out.point.assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(n));
    double max_violation = 0.0;
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
        const double gx = problem.rows[i].dot(out.point);
        const double v = std::max({0.0, problem.lo[i] - gx, gx - problem.hi[i]});
        out.slack_sum += v;
        max_violation = std::max(max_violation, v);
    }
    // The point itself is the certificate; its worst violation is the relaxation it needs.
    out.min_relaxation = std::min(std::max(sol.x[n], 0.0), max_violation);
    if (!sol.converged) out.min_relaxation = max_violation;
    out.feasible = out.min_relaxation <= threshold;
    return out;
}

}  // namespace gridcascade
