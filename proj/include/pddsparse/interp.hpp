#pragma once

// One-dimensional cardinal functions over equispaced stencils.
//
// Gaussian cardinals H_j(z) = sum_k A_jk phi(|z - z_k|), A = Phi^{-1}, are
// extremely ill-conditioned for wide kernels: |A| reaches 1e20 and beyond
// while H_j stays O(1). They are therefore built in 100-digit arithmetic in
// the normalised coordinate t = (z - z_0)/dz and tabulated, together with
// their first two derivatives, at spacing 1/kSubdivision. Evaluation in
// double uses quintic Hermite interpolation of the table.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "pddsparse/geometry.hpp"
#include "pddsparse/types.hpp"

namespace pddsparse {

enum class BasisMode { gaussian_rbf, sinc_limit };

inline constexpr std::string_view to_string(BasisMode m) {
    return m == BasisMode::gaussian_rbf ? "rbf" : "sinc";
}

inline double gaussian_rbf(double z, double c) {
    if (!(c > 0.0)) throw ParameterError("shape parameter must be positive");
    return std::exp(-(z * z) / (c * c));
}

inline double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

/// Trapezoidal approximation of the integral of sinc(z) sinc(z - n) over [-R, R].
inline double sinc_orthonormality_check(int n_shift, double range, double step) {
    if (!(range > 0.0) || !(step > 0.0)) throw ParameterError("range and step must be positive");
    const auto count = static_cast<long>(std::ceil(2.0 * range / step));
    const double h = 2.0 * range / static_cast<double>(count);
    double sum = 0.0;
    for (long k = 0; k <= count; ++k) {
        const double z = -range + static_cast<double>(k) * h;
        const double w = (k == 0 || k == count) ? 0.5 : 1.0;
        sum += w * sinc(z) * sinc(z - n_shift);
    }
    return sum * h;
}

namespace detail {

using hp_float = boost::multiprecision::cpp_bin_float_100;

/// Tabulated Gaussian cardinals for M unit-spaced nodes at t = 0..M-1.
class CardinalTable {
public:
    static constexpr int kSubdivision = 16;
    // Beyond this the 100-digit inverse keeps too few correct digits.
    static constexpr double kMaxCondition = 1e80;

    CardinalTable(int nodes, double shape, double ridge) : nodes_(nodes), shape_(shape) {
        if (nodes < 2) throw ParameterError("stencil needs at least 2 nodes");
        if (!(shape > 0.0)) throw ParameterError("shape parameter must be positive");
        if (ridge < 0.0) throw ParameterError("ridge must be non-negative");
        build_inverse(ridge);
        tabulate();
    }

    int nodes() const { return nodes_; }
    double shape() const { return shape_; }
    double condition_estimate() const { return condition_; }

    /// Writes H_j(t) for every j into out. Requires 0 <= t <= M-1.
    void eval(double t, std::span<double> out) const {
        const int cells = (nodes_ - 1) * kSubdivision;
        double u = t * kSubdivision;
        int g = static_cast<int>(std::floor(u));
        g = std::clamp(g, 0, cells - 1);
        const double s = u - g;
        if (s == 0.0) {
            const double* row = &table_[static_cast<std::size_t>(g) * nodes_ * 3];
            for (int j = 0; j < nodes_; ++j) out[j] = row[3 * j];
            return;
        }
        const double hh = 1.0 / kSubdivision;
        const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
        const double h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        const double h1 = (s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5) * hh;
        const double h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5) * hh * hh;
        const double h3 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        const double h4 = (-4.0 * s3 + 7.0 * s4 - 3.0 * s5) * hh;
        const double h5 = 0.5 * (s3 - 2.0 * s4 + s5) * hh * hh;
        const double* a = &table_[static_cast<std::size_t>(g) * nodes_ * 3];
        const double* b = a + static_cast<std::size_t>(nodes_) * 3;
        for (int j = 0; j < nodes_; ++j) {
            out[j] = h0 * a[3 * j] + h1 * a[3 * j + 1] + h2 * a[3 * j + 2] + h3 * b[3 * j] + h4 * b[3 * j + 1] +
                     h5 * b[3 * j + 2];
        }
    }

    /// Direct high-precision evaluation, valid for any t.
    void eval_exact(double t, std::span<double> out) const {
        std::vector<hp_float> w(nodes_);
        const hp_float tt = t;
        for (int k = 0; k < nodes_; ++k) w[k] = kernel(tt - k);
        for (int j = 0; j < nodes_; ++j) {
            hp_float acc = 0;
            for (int k = 0; k < nodes_; ++k) acc += inverse_[j * nodes_ + k] * w[k];
            out[j] = static_cast<double>(acc);
        }
    }

private:
    int nodes_;
    double shape_;
    double condition_ = 0.0;
    std::vector<hp_float> inverse_;  // row-major M x M
    std::vector<double> table_;      // [grid point][node][value, d1, d2]

    hp_float kernel(const hp_float& d) const {
        const hp_float c = shape_;
        return exp(-(d * d) / (c * c));
    }

    void build_inverse(double ridge) {
        const int M = nodes_;
        std::vector<hp_float> phi(static_cast<std::size_t>(M) * M);
        for (int i = 0; i < M; ++i) {
            for (int j = 0; j < M; ++j) phi[i * M + j] = kernel(hp_float(i - j));
            phi[i * M + i] += ridge;
        }
        // Cholesky factor L, Phi = L L^T.
        std::vector<hp_float> L(static_cast<std::size_t>(M) * M, hp_float(0));
        for (int j = 0; j < M; ++j) {
            hp_float d = phi[j * M + j];
            for (int k = 0; k < j; ++k) d -= L[j * M + k] * L[j * M + k];
            if (d <= 0) throw ConditioningError("interpolation matrix is not numerically positive definite", INFINITY);
            L[j * M + j] = sqrt(d);
            for (int i = j + 1; i < M; ++i) {
                hp_float s = phi[i * M + j];
                for (int k = 0; k < j; ++k) s -= L[i * M + k] * L[j * M + k];
                L[i * M + j] = s / L[j * M + j];
            }
        }
        // Inverse column by column.
        inverse_.assign(static_cast<std::size_t>(M) * M, hp_float(0));
        std::vector<hp_float> y(M);
        for (int col = 0; col < M; ++col) {
            for (int i = 0; i < M; ++i) {
                hp_float s = (i == col) ? hp_float(1) : hp_float(0);
                for (int k = 0; k < i; ++k) s -= L[i * M + k] * y[k];
                y[i] = s / L[i * M + i];
            }
            for (int i = M - 1; i >= 0; --i) {
                hp_float s = y[i];
                for (int k = i + 1; k < M; ++k) s -= L[k * M + i] * inverse_[k * M + col];
                inverse_[i * M + col] = s / L[i * M + i];
            }
        }
        hp_float norm_phi = 0, norm_inv = 0;
        for (int j = 0; j < M; ++j) {
            hp_float a = 0, b = 0;
            for (int i = 0; i < M; ++i) {
                a += abs(phi[i * M + j]);
                b += abs(inverse_[i * M + j]);
            }
            norm_phi = std::max(norm_phi, a);
            norm_inv = std::max(norm_inv, b);
        }
        condition_ = static_cast<double>(norm_phi * norm_inv);
        if (!(condition_ <= kMaxCondition)) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3e", condition_);
            throw ConditioningError(std::string("Gaussian interpolation matrix too ill-conditioned (estimate ") + buf + ")",
                                    condition_);
        }
    }

    void tabulate() {
        const int M = nodes_;
        const int points = (M - 1) * kSubdivision + 1;
        table_.assign(static_cast<std::size_t>(points) * M * 3, 0.0);
        const hp_float c2 = hp_float(shape_) * hp_float(shape_);
        std::vector<hp_float> w0(M), w1(M), w2(M);
        for (int g = 0; g < points; ++g) {
            double* row = &table_[static_cast<std::size_t>(g) * M * 3];
            if (g % kSubdivision == 0) {
                // Nodes: the cardinal values are exact by definition.
                const int node = g / kSubdivision;
                for (int j = 0; j < M; ++j) row[3 * j] = (j == node) ? 1.0 : 0.0;
            }
            const hp_float t = hp_float(g) / kSubdivision;
            for (int k = 0; k < M; ++k) {
                const hp_float d = t - k;
                const hp_float e = exp(-(d * d) / c2);
                w0[k] = e;
                w1[k] = -2 * d / c2 * e;
                w2[k] = (4 * d * d / (c2 * c2) - 2 / c2) * e;
            }
            for (int j = 0; j < M; ++j) {
                hp_float v = 0, d1 = 0, d2 = 0;
                const hp_float* a = &inverse_[static_cast<std::size_t>(j) * M];
                for (int k = 0; k < M; ++k) {
                    v += a[k] * w0[k];
                    d1 += a[k] * w1[k];
                    d2 += a[k] * w2[k];
                }
                if (g % kSubdivision != 0) row[3 * j] = static_cast<double>(v);
                row[3 * j + 1] = static_cast<double>(d1);
                row[3 * j + 2] = static_cast<double>(d2);
            }
        }
    }
};

class CardinalTableCache {
public:
    std::shared_ptr<const CardinalTable> get(int nodes, double shape, double ridge) {
        const auto key = std::make_tuple(nodes, shape, ridge);
        {
            std::lock_guard lock(mutex_);
            if (auto it = tables_.find(key); it != tables_.end()) return it->second;
        }
        // Built outside the lock; a concurrent duplicate build is harmless.
        auto table = std::make_shared<const CardinalTable>(nodes, shape, ridge);
        std::lock_guard lock(mutex_);
        return tables_.emplace(key, std::move(table)).first->second;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return tables_.size();
    }

private:
    mutable std::mutex mutex_;
    std::map<std::tuple<int, double, double>, std::shared_ptr<const CardinalTable>> tables_;
};

inline CardinalTableCache& table_cache() {
    static CardinalTableCache cache;
    return cache;
}

}  // namespace detail

struct BasisOptions {
    BasisMode mode = BasisMode::gaussian_rbf;
    double shape_ratio = 5.0;  ///< c / dz
    double ridge = 0.0;        ///< added to the diagonal of Phi (whose diagonal is 1)
};

/// Cardinal functions of one equispaced stencil, addressed by arc coordinate.
class CardinalBasis {
public:
    CardinalBasis(std::vector<double> nodes, double spacing, BasisOptions opts)
        : nodes_(std::move(nodes)), spacing_(spacing), opts_(opts) {
        if (nodes_.size() < 2) throw ParameterError("stencil needs at least 2 nodes");
        if (!(spacing > 0.0)) throw ParameterError("node spacing must be positive");
        for (std::size_t k = 1; k < nodes_.size(); ++k) {
            const double gap = (nodes_[k] - nodes_[k - 1]) / spacing;
            if (std::abs(gap - 1.0) > 1e-9) throw ParameterError("stencil nodes must be equispaced");
        }
        if (opts_.mode == BasisMode::gaussian_rbf) {
            if (!(opts_.shape_ratio > 0.0)) throw ParameterError("shape parameter must be positive");
            table_ = detail::table_cache().get(static_cast<int>(nodes_.size()), opts_.shape_ratio, opts_.ridge);
        }
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<double>& nodes() const { return nodes_; }
    double spacing() const { return spacing_; }
    double shape() const { return opts_.shape_ratio * spacing_; }
    BasisMode mode() const { return opts_.mode; }
    double condition_estimate() const { return table_ ? table_->condition_estimate() : 1.0; }

    /// True when z lies inside the tabulated range [z_0, z_{M-1}].
    bool covers(double z) const {
        const double t = normalised(z);
        return t >= -1e-12 && t <= static_cast<double>(nodes_.size() - 1) + 1e-12;
    }

    /// All cardinal values at z; out must have size() entries.
    void eval_all(double z, std::span<double> out) const {
        const double t = normalised(z);
        if (opts_.mode == BasisMode::sinc_limit) {
            const double r = std::round(t);
            if (std::abs(t - r) <= 1e-12) {
                for (std::size_t j = 0; j < nodes_.size(); ++j) out[j] = (static_cast<double>(j) == r) ? 1.0 : 0.0;
                return;
            }
            for (std::size_t j = 0; j < nodes_.size(); ++j) out[j] = sinc(t - static_cast<double>(j));
            return;
        }
        const double last = static_cast<double>(nodes_.size() - 1);
        if (t >= -1e-12 && t <= last + 1e-12) {
            table_->eval(std::clamp(t, 0.0, last), out);
        } else {
            table_->eval_exact(t, out);
        }
    }

    double eval(std::size_t j, double z) const {
        std::vector<double> all(nodes_.size());
        eval_all(z, all);
        return all.at(j);
    }

private:
    std::vector<double> nodes_;
    double spacing_;
    BasisOptions opts_;
    std::shared_ptr<const detail::CardinalTable> table_;

    double normalised(double z) const { return (z - nodes_.front()) / spacing_; }
};

inline CardinalBasis build_cardinal_basis(const Stencil& stencil, double spacing, BasisOptions opts) {
    return CardinalBasis(stencil.arc, spacing, opts);
}

/// Equispaced nodes 0, dz, ..., (count-1) dz, for tests and tools.
inline std::vector<double> equispaced_nodes(std::size_t count, double spacing, double origin = 0.0) {
    std::vector<double> z(count);
    for (std::size_t k = 0; k < count; ++k) z[k] = origin + static_cast<double>(k) * spacing;
    return z;
}

/// max |sum_j H_j(z) - 1| over `samples` equispaced points of [lo, hi].
inline double unity_defect(const CardinalBasis& basis, double lo, double hi, int samples = 101) {
    std::vector<double> v(basis.size());
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const double z = lo + (hi - lo) * s / (samples - 1);
        basis.eval_all(z, v);
        double sum = 0.0;
        for (double x : v) sum += x;
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    return worst;
}

}  // namespace pddsparse
