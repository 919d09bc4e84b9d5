#pragma once

// Full (non-restarted) left-preconditioned GMRES with Givens rotations.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pddsparse/sparse.hpp"
#include "pddsparse/types.hpp"

namespace pddsparse {

using LinearOperator = std::function<Vector(const Vector&)>;

struct SolveReport {
    Vector x;
    int iterations = 0;
    std::vector<double> history;  ///< ||M(b - A x_k)|| / ||M b||, k = 0..iterations
    bool converged = false;
    bool breakdown = false;
    double true_residual = 0.0;            ///< ||b - A x|| / ||b||, recomputed explicitly
    double preconditioned_residual = 0.0;  ///< ||M(b - A x)|| / ||M b||, recomputed explicitly
    int operator_applications = 0;
};

inline SolveReport gmres(const LinearOperator& A, const Vector& b, const Vector& x0, const LinearOperator& M,
                         double tol, int maxit) {
    if (!(tol > 0.0)) throw ParameterError("tolerance must be positive");
    if (maxit < 1) throw ParameterError("maxit must be at least 1");
    if (x0.size() != b.size()) throw ParameterError("x0 and b sizes differ");
    const auto precond = [&](const Vector& v) { return M ? M(v) : v; };

    SolveReport rep;
    const double mb = precond(b).norm();
    const Vector r0 = precond(b - A(x0));
    ++rep.operator_applications;
    const double beta = r0.norm();
    const double scale = mb > 0.0 ? mb : 1.0;
    rep.history.push_back(beta / scale);
    rep.x = x0;
    if (beta / scale <= tol || beta == 0.0) {
        rep.converged = true;
        rep.true_residual = (b - A(rep.x)).norm() / std::max(b.norm(), 1e-300);
        rep.preconditioned_residual = beta / scale;
        return rep;
    }

    const Eigen::Index n = b.size();
    std::vector<Vector> V;
    V.reserve(static_cast<std::size_t>(std::min<Eigen::Index>(maxit, n)) + 1);
    V.push_back(r0 / beta);
    DenseMatrix H = DenseMatrix::Zero(maxit + 1, maxit);
    std::vector<double> cs(maxit), sn(maxit);
    Vector g = Vector::Zero(maxit + 1);
    g[0] = beta;
    int k = 0;
    for (; k < maxit; ++k) {
        Vector w = precond(A(V[k]));
        ++rep.operator_applications;
        const double before = w.norm();
        for (int j = 0; j <= k; ++j) {
            const double h = V[j].dot(w);
            H(j, k) += h;
            w -= h * V[j];
        }
        if (w.norm() < before / std::sqrt(2.0)) {
            for (int j = 0; j <= k; ++j) {
                const double h = V[j].dot(w);
                H(j, k) += h;
                w -= h * V[j];
            }
        }
        const double next = w.norm();
        H(k + 1, k) = next;
        for (int j = 0; j < k; ++j) {
            const double a = H(j, k), c = H(j + 1, k);
            H(j, k) = cs[j] * a + sn[j] * c;
            H(j + 1, k) = -sn[j] * a + cs[j] * c;
        }
        const double denom = std::hypot(H(k, k), H(k + 1, k));
        cs[k] = denom > 0.0 ? H(k, k) / denom : 1.0;
        sn[k] = denom > 0.0 ? H(k + 1, k) / denom : 0.0;
        H(k, k) = denom;
        H(k + 1, k) = 0.0;
        g[k + 1] = -sn[k] * g[k];
        g[k] = cs[k] * g[k];
        rep.history.push_back(std::abs(g[k + 1]) / scale);
        const bool happy = next <= 1e-14 * std::max(before, 1e-300);
        if (rep.history.back() <= tol || happy) {
            rep.breakdown = happy;
            ++k;
            break;
        }
        V.push_back(w / next);
    }
    rep.iterations = k;
    // Back substitution on the rotated triangular system.
    Vector y = Vector::Zero(k);
    for (int i = k - 1; i >= 0; --i) {
        double s = g[i];
        for (int j = i + 1; j < k; ++j) s -= H(i, j) * y[j];
        y[i] = s / H(i, i);
    }
    for (int j = 0; j < k; ++j) rep.x += y[j] * V[j];
    const Vector r = b - A(rep.x);
    rep.true_residual = r.norm() / std::max(b.norm(), 1e-300);
    rep.preconditioned_residual = precond(r).norm() / scale;
    rep.converged = rep.history.back() <= tol || (rep.breakdown && rep.preconditioned_residual <= std::max(tol, 1e-10));
    return rep;
}

struct CostVerdict {
    long cost = 0;
    bool pays = false;
};

/// Matvec cost t (r + it) of a preconditioned solve against the raw count.
/// The raw configuration (t, r) = (0, 0) is the baseline and never pays.
inline CostVerdict cost_model(int t, int r, int it_precond, int it_raw) {
    if (t < 0 || r < 0 || it_precond < 0 || it_raw < 0) throw ParameterError("cost model inputs must be nonnegative");
    CostVerdict v;
    v.cost = static_cast<long>(t) * (r + it_precond);
    v.pays = !(t == 0 && r == 0) && v.cost < it_raw;
    return v;
}

inline nlohmann::json to_json(const SolveReport& r) {
    return {{"iterations", r.iterations},
            {"converged", r.converged},
            {"breakdown", r.breakdown},
            {"true_residual", r.true_residual},
            {"preconditioned_residual", r.preconditioned_residual},
            {"operator_applications", r.operator_applications},
            {"history", r.history}};
}

}  // namespace pddsparse
