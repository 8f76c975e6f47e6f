#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"
#include "grid.hpp"

namespace u1e {

// ---------------------------------------------------------------------------
// Cutoff function chi: smooth, 0 on [0,1], 1 on [2,inf), exp(-1/t) bridge.
// chi*ln carries the logarithmic end of the McOwen decomposition.

namespace cutoff {

inline double psi(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
inline double dpsi(double t) { return t > 0.0 ? psi(t) / (t * t) : 0.0; }
inline double d2psi(double t) { return t > 0.0 ? psi(t) * (1.0 - 2.0 * t) / (t * t * t * t) : 0.0; }

inline double chi(double s) {
    const double t = s - 1.0;
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double f = psi(t), g = psi(1.0 - t);
    return f / (f + g);
}

inline double dchi(double s) {
    const double t = s - 1.0;
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double f = psi(t), g = psi(1.0 - t);
    const double fp = dpsi(t), gp = -dpsi(1.0 - t);
    const double den = f + g;
    return (fp * g - f * gp) / (den * den);
}

inline double d2chi(double s) {
    const double t = s - 1.0;
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double f = psi(t), g = psi(1.0 - t);
    const double fp = dpsi(t), gp = -dpsi(1.0 - t);
    const double fpp = d2psi(t), gpp = d2psi(1.0 - t);
    const double den = f + g;
    return ((fpp * g - f * gpp) * den - 2.0 * (fp * g - f * gp) * (fp + gp)) / (den * den * den);
}

inline double chi_ln(double r) { return r <= 1.0 ? 0.0 : chi(r) * std::log(r); }

// radial derivative of chi(r) ln(r)
inline double chi_ln_dr(double r) {
    if (r <= 1.0) return 0.0;
    return dchi(r) * std::log(r) + chi(r) / r;
}

// Laplacian of chi(|x|) ln|x|; supported in the annulus 1 <= |x| <= 2
inline double chi_ln_lap(double r) {
    if (r <= 1.0 || r >= 2.0) return 0.0;
    return d2chi(r) * std::log(r) + dchi(r) * (2.0 + std::log(r)) / r;
}

} // namespace cutoff

// Precomputed chi*ln data on a grid. lap_discrete is the module Laplacian of
// the sampled field: the McOwen subtraction must use it so that the
// reconstruction u = c chi ln + tilde satisfies the discrete equation exactly.
struct ChiCutoff {
    GridSpec grid;
    ScalarField chi_ln;
    VectorField grad_chi_ln;   // analytic
    ScalarField lap_analytic;  // analytic, annulus-supported
    ScalarField lap_discrete;

    explicit ChiCutoff(const GridSpec& g)
        : grid(g),
          chi_ln(ScalarField::sample(g, [](double x, double y) {
              return cutoff::chi_ln(std::hypot(x, y));
          })),
          grad_chi_ln(g),
          lap_analytic(ScalarField::sample(g, [](double x, double y) {
              return cutoff::chi_ln_lap(std::hypot(x, y));
          })),
          lap_discrete(laplacian(chi_ln)) {
        grad_chi_ln.x = ScalarField::sample(g, [](double x, double y) {
            const double r = std::hypot(x, y);
            return r > 1.0 ? cutoff::chi_ln_dr(r) * x / r : 0.0;
        });
        grad_chi_ln.y = ScalarField::sample(g, [](double x, double y) {
            const double r = std::hypot(x, y);
            return r > 1.0 ? cutoff::chi_ln_dr(r) * y / r : 0.0;
        });
    }
};

inline std::shared_ptr<const ChiCutoff> chi_cutoff(const GridSpec& g) {
    return std::make_shared<const ChiCutoff>(g);
}

// Scalar split as c chi ln + tilde, with tilde decaying (Dirichlet-truncated).
struct LogDecomposedScalar {
    double log_coeff = 0.0;
    ScalarField tilde;

    LogDecomposedScalar() = default;
    explicit LogDecomposedScalar(const GridSpec& g) : tilde(g) {}

    ScalarField reconstruct(const ChiCutoff& chi, double offset = 0.0) const {
        ScalarField full = tilde;
        axpy(log_coeff, chi.chi_ln, full);
        if (offset != 0.0)
            for (double& u : full.v) u += offset;
        return full;
    }
};

enum class PoissonMethod { Auto, SineTransform, ConjugateGradient };

struct EllipticConfig {
    double delta = -0.5;        // weight in (-1, 0)
    double tol = 1e-10;         // residual tolerance, discrete sup norm
    int max_iter = 20000;       // Krylov iteration cap
    double mean_tol = 1e-8;     // mean-zero precondition tolerance
    double div_mean_tol = 1e-3; // tolerance on the divergence-source integral
    PoissonMethod method = PoissonMethod::Auto;

    void validate() const {
        if (!(delta > -1.0 && delta < 0.0))
            throw ValidationError("elliptic: delta must lie in (-1, 0)");
        if (!(tol > 0.0)) throw ValidationError("elliptic: tol must be positive");
        if (max_iter < 1) throw ValidationError("elliptic: max_iter must be positive");
    }
};

// ---------------------------------------------------------------------------
// Dirichlet inversion of the 5-point Laplacian on the truncated box.

namespace detail {

inline void dst2d(const SineTransform& plan, std::vector<double>& a, int m) {
    // rows
    parallel_rows(m, [&](int iy) {
        thread_local SineTransform::Scratch scratch;
        std::vector<double> out(static_cast<size_t>(m));
        plan.apply(&a[static_cast<size_t>(iy) * m], out.data(), scratch);
        for (int ix = 0; ix < m; ++ix) a[static_cast<size_t>(iy) * m + ix] = out[static_cast<size_t>(ix)];
    });
    // columns
    parallel_rows(m, [&](int ix) {
        thread_local SineTransform::Scratch scratch;
        std::vector<double> in(static_cast<size_t>(m)), out(static_cast<size_t>(m));
        for (int iy = 0; iy < m; ++iy) in[static_cast<size_t>(iy)] = a[static_cast<size_t>(iy) * m + ix];
        plan.apply(in.data(), out.data(), scratch);
        for (int iy = 0; iy < m; ++iy) a[static_cast<size_t>(iy) * m + ix] = out[static_cast<size_t>(iy)];
    });
}

inline ScalarField poisson_dst(const ScalarField& f) {
    const int n = f.grid.n;
    const int m = n - 2;
    const double h = f.grid.h();
    auto plan = sine_transform_for(m);

    std::vector<double> a(static_cast<size_t>(m) * m);
    for (int iy = 0; iy < m; ++iy)
        for (int ix = 0; ix < m; ++ix)
            a[static_cast<size_t>(iy) * m + ix] = f.at(ix + 1, iy + 1);

    dst2d(*plan, a, m);

    std::vector<double> lam(static_cast<size_t>(m));
    for (int k = 1; k <= m; ++k) {
        const double s = std::sin(0.5 * M_PI * k / (m + 1));
        lam[static_cast<size_t>(k - 1)] = -4.0 * s * s / (h * h);
    }
    const double scale = 2.0 / (m + 1);
    parallel_rows(m, [&](int iy) {
        for (int ix = 0; ix < m; ++ix)
            a[static_cast<size_t>(iy) * m + ix] *=
                scale * scale / (lam[static_cast<size_t>(ix)] + lam[static_cast<size_t>(iy)]);
    });

    dst2d(*plan, a, m);

    ScalarField u(f.grid);
    for (int iy = 0; iy < m; ++iy)
        for (int ix = 0; ix < m; ++ix)
            u.at(ix + 1, iy + 1) = a[static_cast<size_t>(iy) * m + ix];
    return u;
}

// Applies the interior 5-point Laplacian with zero Dirichlet boundary.
inline void apply_neg_lap_interior(const std::vector<double>& u, std::vector<double>& out,
                                   int m, double h) {
    const double c = 1.0 / (h * h);
    parallel_rows(m, [&](int iy) {
        for (int ix = 0; ix < m; ++ix) {
            const size_t id = static_cast<size_t>(iy) * m + ix;
            double s = 4.0 * u[id];
            if (ix > 0) s -= u[id - 1];
            if (ix < m - 1) s -= u[id + 1];
            if (iy > 0) s -= u[id - static_cast<size_t>(m)];
            if (iy < m - 1) s -= u[id + static_cast<size_t>(m)];
            out[id] = c * s;
        }
    });
}

inline double dot_rows(const std::vector<double>& a, const std::vector<double>& b, int m) {
    return parallel_row_sum(m, [&](int iy) {
        const size_t row = static_cast<size_t>(iy) * m;
        double s = 0.0;
        for (int ix = 0; ix < m; ++ix) s += a[row + ix] * b[row + ix];
        return s;
    });
}

inline ScalarField poisson_cg(const ScalarField& f, const EllipticConfig& cfg) {
    const int n = f.grid.n;
    const int m = n - 2;
    const double h = f.grid.h();
    const size_t N = static_cast<size_t>(m) * m;

    std::vector<double> b(N), x(N, 0.0), r(N), p(N), Ap(N);
    for (int iy = 0; iy < m; ++iy)
        for (int ix = 0; ix < m; ++ix)
            b[static_cast<size_t>(iy) * m + ix] = -f.at(ix + 1, iy + 1);

    r = b;
    p = r;
    double rr = dot_rows(r, r, m);
    double sup = 0.0;
    for (size_t i = 0; i < N; ++i) sup = std::max(sup, std::fabs(r[i]));

    int it = 0;
    while (sup > cfg.tol && it < cfg.max_iter) {
        apply_neg_lap_interior(p, Ap, m, h);
        const double pAp = dot_rows(p, Ap, m);
        if (pAp == 0.0) break;
        const double alpha = rr / pAp;
        parallel_rows(m, [&](int iy) {
            const size_t row = static_cast<size_t>(iy) * m;
            for (int ix = 0; ix < m; ++ix) {
                x[row + ix] += alpha * p[row + ix];
                r[row + ix] -= alpha * Ap[row + ix];
            }
        });
        const double rr_new = dot_rows(r, r, m);
        const double beta = rr_new / rr;
        rr = rr_new;
        parallel_rows(m, [&](int iy) {
            const size_t row = static_cast<size_t>(iy) * m;
            for (int ix = 0; ix < m; ++ix) p[row + ix] = r[row + ix] + beta * p[row + ix];
        });
        sup = parallel_row_max(m, [&](int iy) {
            const size_t row = static_cast<size_t>(iy) * m;
            double s = 0.0;
            for (int ix = 0; ix < m; ++ix) s = std::max(s, std::fabs(r[row + ix]));
            return s;
        });
        ++it;
    }
    if (sup > cfg.tol) throw NoConvergence("poisson_cg", sup, it);

    ScalarField u(f.grid);
    for (int iy = 0; iy < m; ++iy)
        for (int ix = 0; ix < m; ++ix) u.at(ix + 1, iy + 1) = x[static_cast<size_t>(iy) * m + ix];
    return u;
}

inline double interior_residual_sup(const ScalarField& u, const ScalarField& f) {
    const ScalarField lap = laplacian(u);
    const int n = u.grid.n;
    return parallel_row_max(n - 2, [&](int k) {
        const int iy = k + 1;
        double s = 0.0;
        for (int ix = 1; ix < n - 1; ++ix) s = std::max(s, std::fabs(lap.at(ix, iy) - f.at(ix, iy)));
        return s;
    });
}

// Core Dirichlet solve; no mean condition (callers enforce their own).
inline ScalarField poisson_dirichlet(const ScalarField& f, const EllipticConfig& cfg) {
    cfg.validate();
    ScalarField u = (cfg.method == PoissonMethod::ConjugateGradient) ? poisson_cg(f, cfg)
                                                                     : poisson_dst(f);
    const double res = interior_residual_sup(u, f);
    if (!(res <= cfg.tol)) throw NoConvergence("poisson_dirichlet", res, 0);
    return u;
}

} // namespace detail

// Poisson solve for mean-free sources: homogeneous Dirichlet data at the
// truncated boundary stands in for decay at infinity.
inline ScalarField solve_poisson_meanzero(const ScalarField& f, const EllipticConfig& cfg) {
    const double mean = integrate(f);
    if (std::fabs(mean) > cfg.mean_tol) throw NonZeroMean("solve_poisson_meanzero", mean);
    return detail::poisson_dirichlet(f, cfg);
}

// McOwen split: u = (1/2pi)(int f) chi ln + tilde. The log carrier absorbs
// the source mean; tilde solves the remainder with Dirichlet truncation.
inline LogDecomposedScalar solve_poisson_logasym(const ScalarField& f, const ChiCutoff& chi,
                                                 const EllipticConfig& cfg) {
    LogDecomposedScalar out;
    out.log_coeff = integrate(f) / (2.0 * M_PI);
    ScalarField src = f;
    axpy(-out.log_coeff, chi.lap_discrete, src);
    out.tilde = detail::poisson_dirichlet(src, cfg);
    return out;
}

// Euclidean conformal Killing operator: (L xi)_ij = d_i xi_j + d_j xi_i
// - delta_ij div xi. Traceless by construction (yy stored as -xx).
inline SymTensorField conformal_killing(const VectorField& xi) {
    SymTensorField out(xi.grid());
    const ScalarField dxx = deriv_x(xi.x);
    const ScalarField dyy = deriv_y(xi.y);
    out.xx = dxx - dyy;
    out.xy = deriv_y(xi.x) + deriv_x(xi.y);
    out.yy = -1.0 * out.xx;
    out.traceless = true;
    return out;
}

struct KillingInversion {
    VectorField beta;
    double residual_sup = 0.0;  // sup | L beta - w S |
    double source_mean_x = 0.0; // integral of the divergence source
    double source_mean_y = 0.0;
};

// Solves L beta = w S by inverting the component Laplacians of the divergence
// (div L = Laplacian on vectors). An exact discrete preimage xi0 of S, when
// known, is split off first so the Poisson step only carries the small
// (w - w_infinity) part.
inline KillingInversion invert_killing(const SymTensorField& S, const ScalarField& w,
                                       const EllipticConfig& cfg,
                                       const VectorField* exact_preimage = nullptr) {
    const GridSpec& g = S.grid();
    check_same_grid(g, w.grid);

    auto assemble = [&](const ScalarField& fac) {
        SymTensorField t(g);
        t.xx = fac * S.xx;
        t.xy = fac * S.xy;
        t.yy = fac * S.yy;
        return t;
    };
    auto div_rows = [&](const SymTensorField& t) {
        VectorField d(g);
        d.x = deriv_x(t.xx) + deriv_y(t.xy);
        d.y = deriv_x(t.xy) + deriv_y(t.yy);
        return d;
    };

    const SymTensorField target = assemble(w);
    KillingInversion out;

    if (exact_preimage) {
        // w -> c0 at the outer boundary; the correction source is O(w - c0) S
        const int mid = (g.n - 1) / 2;
        const double c0 = w.at(g.n - 1, mid);
        ScalarField dw = map_field(w, [c0](double u) { return u - c0; });
        const VectorField src = div_rows(assemble(dw));
        out.source_mean_x = integrate(src.x);
        out.source_mean_y = integrate(src.y);
        if (std::fabs(out.source_mean_x) > cfg.div_mean_tol ||
            std::fabs(out.source_mean_y) > cfg.div_mean_tol)
            throw NonZeroMean("invert_killing",
                              std::max(std::fabs(out.source_mean_x), std::fabs(out.source_mean_y)));
        out.beta = VectorField(g);
        out.beta.x = detail::poisson_dirichlet(src.x, cfg);
        out.beta.y = detail::poisson_dirichlet(src.y, cfg);
        axpy(c0, exact_preimage->x, out.beta.x);
        axpy(c0, exact_preimage->y, out.beta.y);
    } else {
        const VectorField src = div_rows(target);
        out.source_mean_x = integrate(src.x);
        out.source_mean_y = integrate(src.y);
        if (std::fabs(out.source_mean_x) > cfg.div_mean_tol ||
            std::fabs(out.source_mean_y) > cfg.div_mean_tol)
            throw NonZeroMean("invert_killing",
                              std::max(std::fabs(out.source_mean_x), std::fabs(out.source_mean_y)));
        out.beta = VectorField(g);
        out.beta.x = detail::poisson_dirichlet(src.x, cfg);
        out.beta.y = detail::poisson_dirichlet(src.y, cfg);
    }

    const SymTensorField lb = conformal_killing(out.beta);
    out.residual_sup = std::max({norm_sup(lb.xx - target.xx), norm_sup(lb.xy - target.xy),
                                 norm_sup(lb.yy - target.yy)});
    return out;
}

} // namespace u1e
