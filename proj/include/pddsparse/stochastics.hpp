#pragma once

// Euler-Maruyama simulation of dX = b dt + sigma dW confined to a region,
// with the Feynman-Kac weights Y (discount) and Z (accumulated source),
// plus analytic mean first-exit-time oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "pddsparse/parallel.hpp"
#include "pddsparse/random.hpp"
#include "pddsparse/types.hpp"

namespace pddsparse {

/// Elliptic operator 1/2 a:D^2 + b.grad + c with a = sigma sigma^T, source f and
/// Dirichlet data g. Empty functions mean b = 0, sigma = I, c = 0, f = 0, g = 0.
struct ProblemSpec {
    std::function<Vec2(Vec2)> drift;
    std::function<Mat2(Vec2)> diffusion;
    std::function<double(Vec2)> potential;  ///< c(x) <= 0
    std::function<double(Vec2)> source;
    std::function<double(Vec2)> dirichlet;
    std::function<double(Vec2)> exact;  ///< optional, benchmarking only

    double g(Vec2 x) const { return dirichlet ? dirichlet(x) : 0.0; }
};

struct McParams {
    double timestep = 1e-4;
    std::size_t samples = 10000;
    std::uint64_t seed = 20240601;
    std::uint64_t max_steps = 100'000'000;
    unsigned threads = 0;
};

/// Axis-aligned rectangle with absorbing boundary.
struct RectRegion {
    double x0, x1, y0, y1;

    bool inside(Vec2 p) const { return p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1; }

    struct Crossing {
        double fraction;
        Vec2 point;
        int side;
    };

    /// First boundary crossing of the segment a -> b, with a inside and b not.
    /// Sides are numbered E, N, W, S; exact ties go to the lower number.
    Crossing crossing(Vec2 a, Vec2 b) const {
        const double dx = b.x - a.x;
        const double dy = b.y - a.y;
        double best = 2.0;
        int side = -1;
        const auto consider = [&](bool crossed, double s, int id) {
            if (crossed && s < best) {
                best = s;
                side = id;
            }
        };
        consider(b.x >= x1, (x1 - a.x) / dx, 0);
        consider(b.y >= y1, (y1 - a.y) / dy, 1);
        consider(b.x <= x0, (x0 - a.x) / dx, 2);
        consider(b.y <= y0, (y0 - a.y) / dy, 3);
        best = std::min(best, 1.0);
        Vec2 p{a.x + best * dx, a.y + best * dy};
        switch (side) {
            case 0: p = {x1, std::clamp(p.y, y0, y1)}; break;
            case 1: p = {std::clamp(p.x, x0, x1), y1}; break;
            case 2: p = {x0, std::clamp(p.y, y0, y1)}; break;
            default: p = {std::clamp(p.x, x0, x1), y0}; break;
        }
        return {best, p, side};
    }
};

/// Open disc with absorbing boundary.
struct DiscRegion {
    Vec2 center;
    double radius;

    bool inside(Vec2 p) const {
        const Vec2 d = p - center;
        return d.x * d.x + d.y * d.y < radius * radius;
    }

    RectRegion::Crossing crossing(Vec2 a, Vec2 b) const {
        // Smallest root in (0, 1] of |a - c + s (b - a)| = R.
        const Vec2 d = b - a;
        const Vec2 f = a - center;
        const double A = d.x * d.x + d.y * d.y;
        const double B = 2.0 * (f.x * d.x + f.y * d.y);
        const double C = f.x * f.x + f.y * f.y - radius * radius;
        double s = 1.0;
        if (A > 0.0) {
            const double disc = std::max(0.0, B * B - 4.0 * A * C);
            s = std::clamp((-B + std::sqrt(disc)) / (2.0 * A), 0.0, 1.0);
        }
        Vec2 p = a + s * d;
        const Vec2 r = p - center;
        const double len = norm(r);
        if (len > 0.0) p = center + (radius / len) * r;
        return {s, p, -1};
    }
};

struct ExitRecord {
    Vec2 point;
    int side = -1;  ///< crossing side of a RectRegion (E, N, W, S = 0..3); -1 otherwise
    double tau = 0.0;
    double Y = 1.0;
    double Z = 0.0;
    std::uint64_t steps = 0;
    bool truncated = false;
};

template <class Region>
ExitRecord simulate_exit(const Region& region, Vec2 start, const ProblemSpec& problem, double h,
                         std::uint64_t max_steps, NormalStream& stream) {
    const double sqrt_h = std::sqrt(h);
    Vec2 x = start;
    double Y = 1.0;
    double Z = 0.0;
    for (std::uint64_t k = 0; k < max_steps; ++k) {
        const auto [n1, n2] = stream.next();
        Vec2 noise{sqrt_h * n1, sqrt_h * n2};
        if (problem.diffusion) noise = problem.diffusion(x) * noise;
        Vec2 next = x + noise;
        if (problem.drift) next = next + h * problem.drift(x);
        const double f = problem.source ? problem.source(x) : 0.0;
        const double c = problem.potential ? problem.potential(x) : 0.0;
        if (region.inside(next)) {
            if (problem.source) Z += f * Y * h;
            if (problem.potential) Y *= 1.0 + c * h;
            x = next;
            continue;
        }
        const auto cross = region.crossing(x, next);
        const double part = cross.fraction * h;
        if (problem.source) Z += f * Y * part;
        if (problem.potential) Y *= 1.0 + c * part;
        ExitRecord rec;
        rec.point = cross.point;
        rec.side = cross.side;
        rec.tau = static_cast<double>(k) * h + part;
        rec.Y = Y;
        rec.Z = Z;
        rec.steps = k + 1;
        return rec;
    }
    ExitRecord rec;
    rec.point = x;
    rec.tau = static_cast<double>(max_steps) * h;
    rec.Y = Y;
    rec.Z = Z;
    rec.steps = max_steps;
    rec.truncated = true;
    return rec;
}

/// Mean FET of Brownian motion from distance r of the centre of a disc of radius R.
inline double fet_circle(double R, double r) {
    if (r < 0.0 || r > R) throw ParameterError("fet_circle needs 0 <= r <= R");
    return 0.5 * (R * R - r * r);
}

/// Mean FET of Brownian motion (generator Laplacian/2) in [-a,a]x[-b,b] from
/// (x,y), double cosine series truncated at K odd modes per direction.
inline double fet_rect_series(double a, double b, Vec2 p, int K = 200) {
    if (!(a > 0.0) || !(b > 0.0)) throw ParameterError("half widths must be positive");
    if (std::abs(p.x) > a || std::abs(p.y) > b) throw ParameterError("point outside rectangle");
    const double pi = std::numbers::pi;
    std::vector<double> cx(K), cy(K);
    for (int p_ = 0; p_ < K; ++p_) {
        const int k = 2 * p_ + 1;
        cx[p_] = std::cos(k * pi * p.x / (2.0 * a));
        cy[p_] = std::cos(k * pi * p.y / (2.0 * b));
    }
    double sum = 0.0;
    for (int q = K - 1; q >= 0; --q) {
        const int l = 2 * q + 1;
        for (int p_ = K - 1; p_ >= 0; --p_) {
            const int k = 2 * p_ + 1;
            const double lambda = pi * pi * (k * k / (4.0 * a * a) + l * l / (4.0 * b * b));
            const double sign = ((p_ + q) % 2 == 0) ? 1.0 : -1.0;
            sum += sign * 32.0 / (k * l * pi * pi * lambda) * cx[p_] * cy[q];
        }
    }
    return sum;
}

struct FetEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t used = 0;
    std::size_t truncated = 0;
    bool flagged = false;  ///< truncation fraction above 1%
};

/// Sample mean and standard error of the Brownian exit time from start.
template <class Region>
FetEstimate mean_fet_mc(const Region& region, Vec2 start, const McParams& params, std::uint32_t row = 0) {
    if (!region.inside(start)) throw ParameterError("start point must lie inside the region");
    if (!(params.timestep > 0.0) || params.samples == 0) throw ParameterError("need h > 0 and at least one sample");
    std::vector<ExitRecord> records(params.samples);
    const ProblemSpec brownian;
    parallel_for(params.samples, params.threads, [&](std::size_t k) {
        NormalStream stream({params.seed, row, static_cast<std::uint32_t>(k), 0});
        records[k] = simulate_exit(region, start, brownian, params.timestep, params.max_steps, stream);
    });
    FetEstimate est;
    double sum = 0.0, sum_sq = 0.0;
    for (const ExitRecord& r : records) {
        if (r.truncated) {
            ++est.truncated;
            continue;
        }
        sum += r.tau;
        sum_sq += r.tau * r.tau;
        ++est.used;
    }
    if (est.used > 0) {
        const double n = static_cast<double>(est.used);
        est.mean = sum / n;
        const double var = est.used > 1 ? std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0)) : 0.0;
        est.standard_error = std::sqrt(var / n);
    }
    est.flagged = static_cast<double>(est.truncated) > 0.01 * static_cast<double>(params.samples);
    return est;
}

}  // namespace pddsparse
