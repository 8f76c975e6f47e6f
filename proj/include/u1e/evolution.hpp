#pragma once

#include <functional>
#include <string>
#include <vector>

#include "constraints.hpp"
#include "geometry.hpp"
#include "state.hpp"

namespace u1e {

enum class Scheme { Free, Constrained };

struct SchemeConfig {
    Scheme scheme = Scheme::Free;
    double cfl = 0.25;
    double step_tol = 1e-10;
    int step_max_iter = 30;
    double t_end = 1.0;
    int snapshot_every = 0;   // 0: final snapshot only
    bool frozen_flat = false; // test mode: gauge pinned to Minkowski

    void validate() const {
        if (!(cfl > 0.0 && cfl <= 0.5))
            throw ValidationError("scheme: cfl must lie in (0, 0.5]");
        if (!(t_end >= 0.0)) throw ValidationError("scheme: t_end must be nonnegative");
        if (step_max_iter < 1) throw ValidationError("scheme: step_max_iter must be positive");
    }
};

inline double cfl_dt(const StateVector& s, const SchemeConfig& cfg) {
    return cfg.cfl * s.grid().h() / max_coordinate_speed(s);
}

// Stage-to-stage backward differences of the gauge quantities that enter the
// gamma wave equation: Q = div(beta)/N and Pchi = T(chi ln).
struct GaugeStageRates {
    ScalarField dQ_dt;
    ScalarField dPchi_dt;

    GaugeStageRates() = default;
    explicit GaugeStageRates(const GridSpec& g) : dQ_dt(g), dPchi_dt(g) {}
};

enum class WaveField { Gamma, Phi, Omega };

// Right side T^2(field) of the first-order reduction: the stepper advances
// (field, P = T field) via d_t field = N P + beta.grad field and
// d_t P = N T^2 field + beta.grad P.
inline ScalarField wave_rhs(const StateVector& s, const StateAux& a, WaveField which,
                            const GaugeStageRates* rates) {
    const GridSpec& g = s.grid();
    switch (which) {
        case WaveField::Phi: {
            ScalarField t2 = a.em2gamma * laplacian(s.phi) +
                             (a.em2gamma / a.N_full) * (a.grad_phi.x * a.grad_N.x + a.grad_phi.y * a.grad_N.y) +
                             s.tau * s.Pphi;
            const ScalarField e0om_sq = (a.N_full * a.N_full) * (s.Pomega * s.Pomega);
            const ScalarField go2 = a.grad_omega.x * a.grad_omega.x + a.grad_omega.y * a.grad_omega.y;
            axpy(0.5, a.em4phi * (e0om_sq + go2), t2);
            return t2;
        }
        case WaveField::Omega: {
            ScalarField t2 = a.em2gamma * laplacian(s.omega) +
                             (a.em2gamma / a.N_full) * (a.grad_omega.x * a.grad_N.x + a.grad_omega.y * a.grad_N.y) +
                             s.tau * s.Pomega;
            axpy(-4.0, (a.N_full * a.N_full) * (s.Pomega * s.Pphi), t2);
            axpy(-4.0, a.grad_omega.x * a.grad_phi.x + a.grad_omega.y * a.grad_phi.y, t2);
            return t2;
        }
        case WaveField::Gamma: {
            // T^2 gamma_tilde = e^{-2gamma} Lap gamma_tilde - tau^2/2
            //   + (1/2N) e0(div beta / N)
            //   + e^{-2gamma}(Lap N/2N + |grad phi|^2 + e^{-4phi}|grad omega|^2/4)
            //   + alpha Psi / N,  Psi/N = T^2(chi ln) - e^{-2gamma} Lap(chi ln)
            ScalarField t2 = a.em2gamma * laplacian(s.gamma.tilde);
            axpy(-0.5, s.tau * s.tau, t2);

            const ScalarField Q = a.div_beta / a.N_full;
            ScalarField e0Q = -1.0 * (s.beta.x * deriv_x(Q) + s.beta.y * deriv_y(Q));
            if (rates) e0Q = e0Q + rates->dQ_dt;
            t2 = t2 + e0Q / (2.0 * a.N_full);

            t2 = t2 + a.em2gamma * (laplacian(a.N_full) / (2.0 * a.N_full) +
                                    a.grad_phi.x * a.grad_phi.x + a.grad_phi.y * a.grad_phi.y +
                                    0.25 * (a.em4phi * (a.grad_omega.x * a.grad_omega.x +
                                                        a.grad_omega.y * a.grad_omega.y)));

            const double alpha = -s.gamma.log_coeff;
            if (alpha != 0.0) {
                const ScalarField Pchi =
                    -1.0 * ((s.beta.x * s.chi->grad_chi_ln.x + s.beta.y * s.chi->grad_chi_ln.y) / a.N_full);
                ScalarField e0Pchi = -1.0 * (s.beta.x * deriv_x(Pchi) + s.beta.y * deriv_y(Pchi));
                if (rates) e0Pchi = e0Pchi + rates->dPchi_dt;
                const ScalarField psi_over_N = e0Pchi / a.N_full - a.em2gamma * s.chi->lap_discrete;
                axpy(alpha, psi_over_N, t2);
            }
            return t2;
        }
    }
    return ScalarField(g);
}

// convenience overload matching the operation contract
inline ScalarField wave_rhs(const StateVector& s, WaveField which,
                            const GaugeStageRates* rates = nullptr) {
    const StateAux a = make_aux(s);
    return wave_rhs(s, a, which, rates);
}

// e0 H_ij of the transport equation; the (2 d_i d_j - delta_ij Lap)N block is
// assembled from the composed-stencil Hessian and its own trace so the right
// side is traceless up to the L beta = 2 e^{-2gamma} N H residual.
inline SymTensorField transport_rhs_H(const StateVector& s, const StateAux& a) {
    const GridSpec& g = s.grid();
    const ScalarField bxx = deriv_x(s.beta.x);
    const ScalarField bxy = deriv_y(s.beta.x);
    const ScalarField byx = deriv_x(s.beta.y);
    const ScalarField byy = deriv_y(s.beta.y);
    const SymTensorField hN = hessian(a.N_full);
    const ScalarField lapN_h = hN.xx + hN.yy;
    const ScalarField fac = a.em2gamma * a.N_full;
    const ScalarField gdot = a.grad_gamma.x * a.grad_N.x + a.grad_gamma.y * a.grad_N.y;
    const ScalarField gp2 = a.grad_phi.x * a.grad_phi.x + a.grad_phi.y * a.grad_phi.y;
    const ScalarField go2 = a.grad_omega.x * a.grad_omega.x + a.grad_omega.y * a.grad_omega.y;

    SymTensorField out(g);
    out.traceless = true;

    // xx
    out.xx = -2.0 * (fac * (s.H.xx * s.H.xx + s.H.xy * s.H.xy)) +
             2.0 * (bxx * s.H.xx + byx * s.H.xy) -
             (hN.xx - 0.5 * lapN_h) +
             (2.0 * (a.grad_gamma.x * a.grad_N.x) - gdot) -
             a.N_full * (2.0 * (a.grad_phi.x * a.grad_phi.x) - gp2) -
             0.25 * (a.em4phi * (a.N_full * (2.0 * (a.grad_omega.x * a.grad_omega.x) - go2)));
    // xy
    out.xy = -2.0 * (fac * (s.H.xx * s.H.xy + s.H.xy * s.H.yy)) +
             (bxy * s.H.xx + byy * s.H.xy + bxx * s.H.xy + byx * s.H.yy) -
             hN.xy +
             (a.grad_gamma.x * a.grad_N.y + a.grad_gamma.y * a.grad_N.x) -
             a.N_full * (2.0 * (a.grad_phi.x * a.grad_phi.y)) -
             0.25 * (a.em4phi * (a.N_full * (2.0 * (a.grad_omega.x * a.grad_omega.y))));
    // yy
    out.yy = -2.0 * (fac * (s.H.xy * s.H.xy + s.H.yy * s.H.yy)) +
             2.0 * (bxy * s.H.xy + byy * s.H.yy) -
             (hN.yy - 0.5 * lapN_h) +
             (2.0 * (a.grad_gamma.y * a.grad_N.y) - gdot) -
             a.N_full * (2.0 * (a.grad_phi.y * a.grad_phi.y) - gp2) -
             0.25 * (a.em4phi * (a.N_full * (2.0 * (a.grad_omega.y * a.grad_omega.y) - go2)));
    return out;
}

inline SymTensorField transport_rhs_H(const StateVector& s) {
    const StateAux a = make_aux(s);
    return transport_rhs_H(s, a);
}

struct GaugeSolveInfo {
    int iterations = 0;
    double final_change = 0.0;
    double killing_residual = 0.0;
    double tau_gauge_residual = 0.0; // sup |N tau + 2 e0 gamma - div beta|
};

// Per-stage inner fixed point: lag N and gamma in the right sides, resolve N
// (and gamma when constrained) through the log-split Poisson solve, beta
// through the Killing inversion, tau algebraically (free) or zero
// (constrained).
inline GaugeSolveInfo solve_gauge(StateVector& s, const SchemeConfig& cfg,
                                  const EllipticConfig& ell) {
    const GridSpec& g = s.grid();
    GaugeSolveInfo info;

    if (cfg.frozen_flat) {
        s.N = LogDecomposedScalar(g);
        s.beta = VectorField(g);
        s.tau = ScalarField(g);
        return info;
    }

    const ScalarField em4phi = map_field(s.phi, [](double u) { return std::exp(-4.0 * u); });
    const ScalarField hsq = s.H.xx * s.H.xx + 2.0 * (s.H.xy * s.H.xy) + s.H.yy * s.H.yy;
    const VectorField gp = gradient(s.phi);
    const VectorField go = gradient(s.omega);
    const ScalarField gp2 = gp.x * gp.x + gp.y * gp.y;
    const ScalarField go2 = go.x * go.x + go.y * go.y;

    detail::FixedPointMonitor fp;
    KillingInversion shift;
    for (;;) {
        const ScalarField N_old = s.N_full();
        const ScalarField gamma_old = s.gamma_full();
        const ScalarField em2g = map_field(gamma_old, [](double u) { return std::exp(-2.0 * u); });
        const ScalarField e2g = map_field(gamma_old, [](double u) { return std::exp(2.0 * u); });

        double change = 0.0;

        if (cfg.scheme == Scheme::Constrained) {
            // (elliptic gamma): Lap gamma = -|grad phi|^2 - e^{-4phi}|grad omega|^2/4
            //   - e^{2gamma} P_phi^2 - e^{2gamma-4phi} P_omega^2 / 4 - e^{-2gamma}|H|^2/2
            ScalarField rhs_gamma = -1.0 * gp2 - 0.25 * (em4phi * go2) -
                                    e2g * (s.Pphi * s.Pphi) -
                                    0.25 * (e2g * (em4phi * (s.Pomega * s.Pomega))) -
                                    0.5 * (em2g * hsq);
            LogDecomposedScalar gamma_new = solve_poisson_logasym(rhs_gamma, *s.chi, ell);
            change = std::max(change, norm_sup(gamma_new.reconstruct(*s.chi) - gamma_old));
            s.gamma = std::move(gamma_new);
        } else {
            // (EQ tau): N tau = -2 e0 gamma + div beta
            const double alpha = -s.gamma.log_coeff;
            ScalarField e0gamma = N_old * s.Pgamma;
            if (alpha != 0.0)
                axpy(alpha, s.beta.x * s.chi->grad_chi_ln.x + s.beta.y * s.chi->grad_chi_ln.y,
                     e0gamma);
            ScalarField tau_new = (divergence(s.beta) - 2.0 * e0gamma) / N_old;
            change = std::max(change, norm_sup(tau_new - s.tau));
            s.tau = std::move(tau_new);
        }

        // (EQ N): Lap N = e^{-2gamma} N |H|^2 + tau^2 e^{2gamma} N / 2
        //   + 2 e^{2gamma} N P_phi^2 + e^{2gamma-4phi} N P_omega^2 / 2
        const ScalarField gamma_cur = s.gamma_full();
        const ScalarField em2g_cur = map_field(gamma_cur, [](double u) { return std::exp(-2.0 * u); });
        const ScalarField e2g_cur = map_field(gamma_cur, [](double u) { return std::exp(2.0 * u); });
        ScalarField rhs_N = em2g_cur * (N_old * hsq) + 2.0 * (e2g_cur * (N_old * (s.Pphi * s.Pphi))) +
                            0.5 * (e2g_cur * (em4phi * (N_old * (s.Pomega * s.Pomega))));
        if (cfg.scheme == Scheme::Free) axpy(0.5, e2g_cur * (N_old * (s.tau * s.tau)), rhs_N);
        LogDecomposedScalar N_new = solve_poisson_logasym(rhs_N, *s.chi, ell);
        const ScalarField N_new_full = N_new.reconstruct(*s.chi, 1.0);
        double mn = N_new_full.v[0];
        for (double u : N_new_full.v) mn = std::min(mn, u);
        if (mn <= 0.1) throw LapseCollapse(mn);
        change = std::max(change, norm_sup(N_new_full - N_old));
        s.N = std::move(N_new);

        // (EQ beta): L beta = 2 e^{-2gamma} N H. Solved fresh each sweep: the
        // shift is then a function of (N, gamma, H) and the outer loop
        // contracts at the physical coupling rate.
        const ScalarField w = zip_fields(N_new_full, gamma_cur, [](double n, double gm) {
            return 2.0 * n * std::exp(-2.0 * gm);
        });
        const VectorField beta_old = s.beta;
        shift = invert_killing(s.H, w, ell);
        change = std::max({change, norm_sup(shift.beta.x - beta_old.x),
                           norm_sup(shift.beta.y - beta_old.y)});
        s.beta = shift.beta;

        info.final_change = change;
        ++info.iterations;
        if (change < cfg.step_tol) break;
        if (info.iterations >= cfg.step_max_iter)
            throw FixedPointDiverged("solve_gauge", change, info.iterations);
    }

    // close the algebraic relations on the converged gauge
    const ScalarField Nfull = s.N_full();
    if (cfg.scheme == Scheme::Free) {
        const double alpha = -s.gamma.log_coeff;
        ScalarField e0gamma = Nfull * s.Pgamma;
        if (alpha != 0.0)
            axpy(alpha, s.beta.x * s.chi->grad_chi_ln.x + s.beta.y * s.chi->grad_chi_ln.y, e0gamma);
        const ScalarField divb = divergence(s.beta);
        s.tau = (divb - 2.0 * e0gamma) / Nfull;
        info.tau_gauge_residual = norm_sup(Nfull * s.tau + 2.0 * e0gamma - divb);
    } else {
        s.tau = ScalarField(g);
        // P gamma_tilde from tau = 0: T gamma = div beta / 2N
        const double c = s.gamma.log_coeff;
        const ScalarField adv = s.beta.x * s.chi->grad_chi_ln.x + s.beta.y * s.chi->grad_chi_ln.y;
        s.Pgamma = (0.5 * divergence(s.beta) + c * adv) / Nfull;
        info.tau_gauge_residual = 0.0;
    }
    info.killing_residual = shift.residual_sup;
    return info;
}

// ---------------------------------------------------------------------------
// Time stepping: classic 4-stage explicit integrator on the first-order
// system, gauge re-solved at every stage.

namespace detail {

inline std::vector<ScalarField*> evolved_fields(StateVector& s, Scheme scheme) {
    std::vector<ScalarField*> f = {&s.phi, &s.Pphi, &s.omega, &s.Pomega,
                                   &s.H.xx, &s.H.xy, &s.H.yy};
    if (scheme == Scheme::Free) {
        f.push_back(&s.gamma.tilde);
        f.push_back(&s.Pgamma);
    }
    return f;
}

// Rolling gauge records at strictly decreasing times; enough depth for a
// second-order one-sided derivative at arbitrary stage spacing.
struct GaugeHistory {
    struct Entry {
        double t = 0.0;
        ScalarField Q, Pchi;
    };
    int count = 0;
    Entry e[3];

    void record(double t, ScalarField Q, ScalarField Pchi) {
        if (count > 0 && t <= e[0].t + 1e-14) {
            e[0] = Entry{t, std::move(Q), std::move(Pchi)};
            return;
        }
        if (count < 3) ++count;
        for (int k = count - 1; k > 0; --k) e[k] = std::move(e[k - 1]);
        e[0] = Entry{t, std::move(Q), std::move(Pchi)};
    }
};

// d/dt at t0 from up to three samples by Newton divided differences:
// f'(t0) ~ f[t0,t1] + (t0 - t1) f[t0,t1,t2]
inline ScalarField backward_rate(double t0, const ScalarField& f0, double t1,
                                 const ScalarField& f1, const double* t2, const ScalarField* f2) {
    ScalarField d01 = (1.0 / (t0 - t1)) * (f0 - f1);
    if (!t2) return d01;
    ScalarField d12 = (1.0 / (t1 - *t2)) * (f1 - *f2);
    ScalarField d012 = (1.0 / (t0 - *t2)) * (d01 - d12);
    axpy(t0 - t1, d012, d01);
    return d01;
}

} // namespace detail

class Stepper {
public:
    Stepper(SchemeConfig cfg, EllipticConfig ell) : cfg_(cfg), ell_(ell) {}

    const SchemeConfig& scheme() const { return cfg_; }
    const GaugeSolveInfo& last_gauge_info() const { return gauge_info_; }

    // Prepares the incoming state: gauge solve + history seed.
    void start(StateVector& s) {
        gauge_info_ = solve_gauge(s, cfg_, ell_);
        record_gauge(s);
    }

    // One step of size dt from s.t; throws CFLViolation when dt exceeds the
    // stability bound of the *incoming* state.
    void step(StateVector& s, double dt) {
        const double dt_max = cfl_dt(s, cfg_);
        if (dt > dt_max * (1.0 + 1e-9)) throw CFLViolation(dt, dt_max);

        StateVector k1 = derivative(s);
        StateVector y2 = advanced(s, k1, 0.5 * dt);
        StateVector k2 = derivative(y2);
        StateVector y3 = advanced(s, k2, 0.5 * dt);
        StateVector k3 = derivative(y3);
        StateVector y4 = advanced(s, k3, dt);
        StateVector k4 = derivative(y4);

        auto fs = detail::evolved_fields(s, cfg_.scheme);
        auto f1 = detail::evolved_fields(k1, cfg_.scheme);
        auto f2 = detail::evolved_fields(k2, cfg_.scheme);
        auto f3 = detail::evolved_fields(k3, cfg_.scheme);
        auto f4 = detail::evolved_fields(k4, cfg_.scheme);
        for (size_t i = 0; i < fs.size(); ++i) {
            axpy(dt / 6.0, *f1[i], *fs[i]);
            axpy(dt / 3.0, *f2[i], *fs[i]);
            axpy(dt / 3.0, *f3[i], *fs[i]);
            axpy(dt / 6.0, *f4[i], *fs[i]);
        }
        s.t += dt;
        gauge_info_ = solve_gauge(s, cfg_, ell_);
        record_gauge(s);
        clamp_matter_boundary(s);
    }

private:
    // stage state = base + w * derivative on the evolved fields, gauge solved
    StateVector advanced(const StateVector& base, StateVector& deriv, double w) {
        StateVector y = base;
        y.t = base.t + w;
        auto fy = detail::evolved_fields(y, cfg_.scheme);
        auto fd = detail::evolved_fields(deriv, cfg_.scheme);
        for (size_t i = 0; i < fy.size(); ++i) axpy(w, *fd[i], *fy[i]);
        return y;
    }

    // gauge-solves the stage state in place, then evaluates d/dt of the
    // evolved fields into a state-shaped container
    StateVector derivative(StateVector& y) {
        solve_gauge(y, cfg_, ell_);
        GaugeStageRates rates = stage_rates(y);
        const StateAux a = make_aux(y);

        StateVector d(y.grid(), y.chi);
        d.t = y.t;
        // d_t f = N P + beta.grad f ; d_t P = N T^2 f + beta.grad P
        auto advect = [&](const ScalarField& f) {
            return y.beta.x * deriv_x(f) + y.beta.y * deriv_y(f);
        };
        d.phi = a.N_full * y.Pphi + advect(y.phi);
        d.Pphi = a.N_full * wave_rhs(y, a, WaveField::Phi, &rates) + advect(y.Pphi);
        d.omega = a.N_full * y.Pomega + advect(y.omega);
        d.Pomega = a.N_full * wave_rhs(y, a, WaveField::Omega, &rates) + advect(y.Pomega);
        if (cfg_.scheme == Scheme::Free) {
            d.gamma.tilde = a.N_full * y.Pgamma + advect(y.gamma.tilde);
            d.Pgamma = a.N_full * wave_rhs(y, a, WaveField::Gamma, &rates) + advect(y.Pgamma);
        }
        const SymTensorField e0H = transport_rhs_H(y, a);
        d.H.xx = e0H.xx + advect(y.H.xx);
        d.H.xy = e0H.xy + advect(y.H.xy);
        d.H.yy = e0H.yy + advect(y.H.yy);
        return d;
    }

    GaugeStageRates stage_rates(const StateVector& y) {
        const ScalarField Nfull = y.N_full();
        ScalarField Q = divergence(y.beta) / Nfull;
        ScalarField Pchi =
            -1.0 * ((y.beta.x * y.chi->grad_chi_ln.x + y.beta.y * y.chi->grad_chi_ln.y) / Nfull);

        // pick the most recent records at times strictly below y.t
        const detail::GaugeHistory::Entry* h1 = nullptr;
        const detail::GaugeHistory::Entry* h2 = nullptr;
        for (int k = 0; k < hist_.count; ++k) {
            if (hist_.e[k].t < y.t - 1e-14) {
                if (!h1) h1 = &hist_.e[k];
                else if (!h2) {
                    h2 = &hist_.e[k];
                    break;
                }
            }
        }
        GaugeStageRates r(y.grid());
        if (h1) {
            const double* t2 = h2 ? &h2->t : nullptr;
            r.dQ_dt = detail::backward_rate(y.t, Q, h1->t, h1->Q, t2, h2 ? &h2->Q : nullptr);
            r.dPchi_dt =
                detail::backward_rate(y.t, Pchi, h1->t, h1->Pchi, t2, h2 ? &h2->Pchi : nullptr);
        }
        hist_.record(y.t, std::move(Q), std::move(Pchi));
        return r;
    }

    void record_gauge(const StateVector& s) {
        const ScalarField Nfull = s.N_full();
        ScalarField Q = divergence(s.beta) / Nfull;
        ScalarField Pchi =
            -1.0 * ((s.beta.x * s.chi->grad_chi_ln.x + s.beta.y * s.chi->grad_chi_ln.y) / Nfull);
        hist_.record(s.t, std::move(Q), std::move(Pchi));
    }

    void clamp_matter_boundary(StateVector& s) {
        const int n = s.grid().n;
        const int band = 3;
        for (ScalarField* f : {&s.phi, &s.Pphi, &s.omega, &s.Pomega}) {
            parallel_rows(n, [&](int iy) {
                const bool edge_row = iy < band || iy >= n - band;
                for (int ix = 0; ix < n; ++ix) {
                    if (!edge_row && ix >= band && ix < n - band) continue;
                    double& v = f->at(ix, iy);
                    if (std::fabs(v) < 1e-30) v = 0.0;
                }
            });
        }
    }

    SchemeConfig cfg_;
    EllipticConfig ell_;
    detail::GaugeHistory hist_;
    GaugeSolveInfo gauge_info_;
};

struct RunSummary {
    int steps = 0;
    double final_time = 0.0;
    double min_dt = 1e300, max_dt = 0.0;
    std::string status = "ok";
};

struct RunSinks {
    // called on the initial state and after every accepted step;
    // prev carries the previous accepted state (equal to s at t=0)
    std::function<void(const StateVector& s, const StateVector& prev, double dt)> on_step;
    std::function<void(const StateVector& s, const StateVector& prev, double dt)> on_snapshot;
};

// Advances the state to t_end. The first step is split into two half steps so
// the stage-rate history is populated before a full step is taken.
inline RunSummary run(StateVector& s, const SchemeConfig& cfg, const EllipticConfig& ell,
                      const RunSinks& sinks = {}) {
    cfg.validate();
    ell.validate();
    RunSummary summary;
    Stepper stepper(cfg, ell);
    stepper.start(s);

    StateVector prev = s;
    double dt_prev = 0.0;
    if (sinks.on_step) sinks.on_step(s, prev, dt_prev);
    if (sinks.on_snapshot && cfg.snapshot_every > 0) sinks.on_snapshot(s, prev, dt_prev);

    bool first = true;
    while (s.t < cfg.t_end - 1e-13) {
        double dt = std::min(cfl_dt(s, cfg), cfg.t_end - s.t);
        StateVector before = s;
        if (first) {
            stepper.step(s, 0.5 * dt);
            stepper.step(s, 0.5 * dt);
            first = false;
        } else {
            stepper.step(s, dt);
        }
        prev = std::move(before);
        dt_prev = dt;
        ++summary.steps;
        summary.min_dt = std::min(summary.min_dt, dt);
        summary.max_dt = std::max(summary.max_dt, dt);
        if (sinks.on_step) sinks.on_step(s, prev, dt);
        if (sinks.on_snapshot && cfg.snapshot_every > 0 && summary.steps % cfg.snapshot_every == 0)
            sinks.on_snapshot(s, prev, dt);
    }
    summary.final_time = s.t;
    if (sinks.on_snapshot) sinks.on_snapshot(s, prev, dt_prev);
    return summary;
}

} // namespace u1e
