#pragma once

#include <array>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "constraints.hpp"
#include "state.hpp"

namespace u1e {

// ---------------------------------------------------------------------------
// Pointwise monitors

inline double support_radius(const ScalarField& f, double threshold) {
    const GridSpec& g = f.grid;
    return parallel_row_max(g.n, [&](int iy) {
        const double y = g.x(iy);
        double r = 0.0;
        for (int ix = 0; ix < g.n; ++ix)
            if (std::fabs(f.at(ix, iy)) > threshold) r = std::max(r, std::hypot(g.x(ix), y));
        return r;
    });
}

// (CL1)_j and the CL2 residual; the CL2 identity integrates the Hamiltonian
// constraint against the 2 pi log flux, so the conserved value is 8 pi alpha.
inline std::pair<std::array<double, 2>, double> conservation_laws(const StateVector& s) {
    const auto ints = conservation_integrals(s);
    return {{ints[0], ints[1]}, ints[2] - 8.0 * M_PI * s.alpha0};
}

struct BianchiResiduals {
    VectorField A; // G_{0i} - T_{0i}
    VectorField B; // A_i - (N/2) d_i tau
    double energy = 0.0; // ||e0 tau||^2 + sum(||2 e^-gamma A||^2 + ||B||^2)
};

inline BianchiResiduals bianchi_residuals(const StateVector& s, const ScalarField& e0tau) {
    const GridSpec& g = s.grid();
    const ScalarField Nfull = s.N_full();
    const ScalarField gfull = s.gamma_full();
    const ScalarField em2g = map_field(gfull, [](double u) { return std::exp(-2.0 * u); });
    const ScalarField emg = map_field(gfull, [](double u) { return std::exp(-u); });
    const ScalarField em4p = map_field(s.phi, [](double u) { return std::exp(-4.0 * u); });
    const VectorField gtau = gradient(s.tau);
    const VectorField gp = gradient(s.phi);
    const VectorField go = gradient(s.omega);
    const ScalarField e0phi = Nfull * s.Pphi;
    const ScalarField e0omega = Nfull * s.Pomega;
    const ScalarField divHx = deriv_x(s.H.xx) + deriv_y(s.H.xy);
    const ScalarField divHy = deriv_x(s.H.xy) + deriv_y(s.H.yy);

    BianchiResiduals out;
    out.A = VectorField(g);
    out.A.x = Nfull * (0.5 * gtau.x - em2g * divHx) -
              (2.0 * (e0phi * gp.x) + 0.5 * (em4p * (e0omega * go.x)));
    out.A.y = Nfull * (0.5 * gtau.y - em2g * divHy) -
              (2.0 * (e0phi * gp.y) + 0.5 * (em4p * (e0omega * go.y)));
    out.B = VectorField(g);
    out.B.x = out.A.x - 0.5 * (Nfull * gtau.x);
    out.B.y = out.A.y - 0.5 * (Nfull * gtau.y);

    const double e0t = norm_l2(e0tau);
    const double ax = norm_l2(2.0 * (emg * out.A.x)), ay = norm_l2(2.0 * (emg * out.A.y));
    const double bx = norm_l2(out.B.x), by = norm_l2(out.B.y);
    out.energy = e0t * e0t + ax * ax + ay * ay + bx * bx + by * by;
    return out;
}

enum class EnergyField { Phi, Omega, Gamma };

// E = int <x>^{2 sigma} ( P^2 + e^{-2 gamma} |grad h|^2 )
inline double energy_first_order(const StateVector& s, EnergyField which, double sigma = 0.0) {
    const ScalarField* h = &s.phi;
    const ScalarField* P = &s.Pphi;
    if (which == EnergyField::Omega) {
        h = &s.omega;
        P = &s.Pomega;
    } else if (which == EnergyField::Gamma) {
        h = &s.gamma.tilde;
        P = &s.Pgamma;
    }
    const ScalarField em2g = map_field(s.gamma_full(), [](double u) { return std::exp(-2.0 * u); });
    const VectorField gh = gradient(*h);
    ScalarField integrand = (*P) * (*P) + em2g * (gh.x * gh.x + gh.y * gh.y);
    if (sigma != 0.0) integrand = japanese_bracket(s.grid(), 2.0 * sigma) * integrand;
    return integrate(integrand);
}

// ---------------------------------------------------------------------------
// Third-order wave-map energy and its remainder proxy. Second e0-derivatives
// are built by differentiating the momenta spatially and correcting with the
// commutator [e0, grad] = grad(beta) grad.

namespace detail {

struct SecondDerivs {
    SymTensorField hess;      // d_i d_j U
    SymTensorField e0_hess;   // e0 d_i d_j U
    ScalarField dtU;          // d_t U = N P + beta . grad U
    VectorField grad_dtU;
    // third spatial derivatives: gradient of each Hessian component
    VectorField g_hxx, g_hxy, g_hyy;
};

inline SecondDerivs second_derivs(const StateVector& s, const ScalarField& U,
                                  const ScalarField& P, const ScalarField& Nfull) {
    SecondDerivs d;
    d.hess = hessian(U);
    d.dtU = Nfull * P + s.beta.x * deriv_x(U) + s.beta.y * deriv_y(U);
    d.grad_dtU = gradient(d.dtU);

    // e0 d_j d_i U = d_j d_i (e0 U) + (d_j d_i beta^k) d_k U
    //              + (d_i beta^k) d_j d_k U + (d_j beta^k) d_k d_i U
    const ScalarField e0U = Nfull * P;
    const SymTensorField he0 = hessian(e0U);
    const VectorField gU = gradient(U);
    const SymTensorField hbx = hessian(s.beta.x);
    const SymTensorField hby = hessian(s.beta.y);
    const ScalarField bxx = deriv_x(s.beta.x), bxy = deriv_y(s.beta.x);
    const ScalarField byx = deriv_x(s.beta.y), byy = deriv_y(s.beta.y);

    d.e0_hess = SymTensorField(s.grid());
    d.e0_hess.xx = he0.xx + hbx.xx * gU.x + hby.xx * gU.y +
                   2.0 * (bxx * d.hess.xx + byx * d.hess.xy);
    d.e0_hess.xy = he0.xy + hbx.xy * gU.x + hby.xy * gU.y +
                   (bxx * d.hess.xy + byx * d.hess.yy) + (bxy * d.hess.xx + byy * d.hess.xy);
    d.e0_hess.yy = he0.yy + hbx.yy * gU.x + hby.yy * gU.y +
                   2.0 * (bxy * d.hess.xy + byy * d.hess.yy);

    d.g_hxx = gradient(d.hess.xx);
    d.g_hxy = gradient(d.hess.xy);
    d.g_hyy = gradient(d.hess.yy);
    return d;
}

} // namespace detail

// script-E_3 of the wave-map pair, summed over i,j (xy counted twice)
inline double energy_third_order(const StateVector& s) {
    const GridSpec& g = s.grid();
    const ScalarField Nfull = s.N_full();
    const ScalarField em2g = map_field(s.gamma_full(), [](double u) { return std::exp(-2.0 * u); });
    const ScalarField em4p = map_field(s.phi, [](double u) { return std::exp(-4.0 * u); });
    const ScalarField e0phi = Nfull * s.Pphi;
    const ScalarField e0omega = Nfull * s.Pomega;
    const VectorField gp = gradient(s.phi);
    const VectorField go = gradient(s.omega);
    const ScalarField invN2 = map_field(Nfull, [](double u) { return 1.0 / (u * u); });

    const detail::SecondDerivs dp = detail::second_derivs(s, s.phi, s.Pphi, Nfull);
    const detail::SecondDerivs dw = detail::second_derivs(s, s.omega, s.Pomega, Nfull);

    ScalarField integrand(g);
    auto accumulate = [&](const ScalarField& pf_h, const ScalarField& pf_e0,
                          const VectorField& pf_g, const ScalarField& wf_h,
                          const ScalarField& wf_e0, const VectorField& wf_g, double mult) {
        // phi block: (1/N^2)(e0 dd phi + 1/2 e^{-4phi} dd omega e0 omega)^2
        //            + e^{-2gamma} |grad dd phi + 1/2 e^{-4phi} dd omega grad omega|^2
        ScalarField tphi = pf_e0 + 0.5 * (em4p * (wf_h * e0omega));
        ScalarField sx = pf_g.x + 0.5 * (em4p * (wf_h * go.x));
        ScalarField sy = pf_g.y + 0.5 * (em4p * (wf_h * go.y));
        axpy(2.0 * mult, invN2 * (tphi * tphi) + em2g * (sx * sx + sy * sy), integrand);
        // omega block
        ScalarField tom = wf_e0 - 2.0 * (wf_h * e0phi) - 2.0 * (pf_h * e0omega);
        ScalarField ox = wf_g.x - 2.0 * (wf_h * gp.x) - 2.0 * (pf_h * go.x);
        ScalarField oy = wf_g.y - 2.0 * (wf_h * gp.y) - 2.0 * (pf_h * go.y);
        axpy(0.5 * mult, em4p * (invN2 * (tom * tom) + em2g * (ox * ox + oy * oy)), integrand);
    };
    accumulate(dp.hess.xx, dp.e0_hess.xx, dp.g_hxx, dw.hess.xx, dw.e0_hess.xx, dw.g_hxx, 1.0);
    accumulate(dp.hess.xy, dp.e0_hess.xy, dp.g_hxy, dw.hess.xy, dw.e0_hess.xy, dw.g_hxy, 2.0);
    accumulate(dp.hess.yy, dp.e0_hess.yy, dp.g_hyy, dw.hess.yy, dw.e0_hess.yy, dw.g_hyy, 1.0);
    return integrate(integrand);
}

// ---------------------------------------------------------------------------
// Remainder-scale proxy bounding d/dt of the third-order energy. The F^U
// commutator sources are evaluated on-shell; time derivatives of derived
// fields use a backward difference against the previous accepted state.

namespace detail {

inline ScalarField backward_dt(const ScalarField& now, const ScalarField& prev, double dt) {
    if (dt <= 0.0) return ScalarField(now.grid);
    return (1.0 / dt) * (now - prev);
}

struct OnShellBox {
    // g^{alpha beta} in the coordinate basis (t, x, y)
    ScalarField gtt, gtx, gty, gxx, gxy, gyy;
};

inline OnShellBox inverse_metric(const StateVector& s, const ScalarField& Nfull,
                                 const ScalarField& em2g) {
    OnShellBox m;
    const ScalarField invN2 = map_field(Nfull, [](double u) { return 1.0 / (u * u); });
    m.gtt = -1.0 * invN2;
    m.gtx = invN2 * s.beta.x;
    m.gty = invN2 * s.beta.y;
    m.gxx = em2g - invN2 * (s.beta.x * s.beta.x);
    m.gxy = -1.0 * (invN2 * (s.beta.x * s.beta.y));
    m.gyy = em2g - invN2 * (s.beta.y * s.beta.y);
    return m;
}

// g^{alpha beta} d_alpha u d_beta v with spacetime gradients (dt, dx, dy)
inline ScalarField contract(const OnShellBox& m, const ScalarField& ut, const VectorField& ux,
                            const ScalarField& vt, const VectorField& vx) {
    return m.gtt * (ut * vt) + m.gtx * (ut * vx.x + vt * ux.x) + m.gty * (ut * vx.y + vt * ux.y) +
           m.gxx * (ux.x * vx.x) + m.gxy * (ux.x * vx.y + ux.y * vx.x) + m.gyy * (ux.y * vx.y);
}

} // namespace detail

struct RemainderProxy {
    double value = 0.0;
    double F_phi_l2 = 0.0, F_omega_l2 = 0.0;
};

inline RemainderProxy remainder_proxy(const StateVector& s, const StateVector& prev, double dt) {
    const GridSpec& g = s.grid();
    const ScalarField Nfull = s.N_full();
    const ScalarField Nprev = prev.N_full();
    const ScalarField gfull = s.gamma_full();
    const ScalarField em2g = map_field(gfull, [](double u) { return std::exp(-2.0 * u); });
    const ScalarField em4p = map_field(s.phi, [](double u) { return std::exp(-4.0 * u); });
    const detail::OnShellBox ginv = detail::inverse_metric(s, Nfull, em2g);

    struct MatterPack {
        detail::SecondDerivs d;
        ScalarField dt2;      // d_t^2 U (backward difference of d_t U)
        ScalarField boxU;     // on-shell wave operator value
        SymTensorField TX;    // T of each Hessian component
    };

    auto pack = [&](const ScalarField& U, const ScalarField& P, const ScalarField& Uprev,
                    const ScalarField& Pprev) {
        MatterPack m{detail::second_derivs(s, U, P, Nfull), ScalarField(g), ScalarField(g),
                     SymTensorField(g)};
        ScalarField dtU_prev = Nprev * Pprev + prev.beta.x * deriv_x(Uprev) +
                               prev.beta.y * deriv_y(Uprev);
        m.dt2 = detail::backward_dt(m.d.dtU, dtU_prev, dt);
        // T X = (d_t X - beta.grad X)/N for X = Hessian components
        auto TX = [&](const ScalarField& hij, const ScalarField& dthij) {
            return (dthij - s.beta.x * deriv_x(hij) - s.beta.y * deriv_y(hij)) / Nfull;
        };
        const SymTensorField h_dt = hessian(m.d.dtU);
        m.TX.xx = TX(m.d.hess.xx, h_dt.xx);
        m.TX.xy = TX(m.d.hess.xy, h_dt.xy);
        m.TX.yy = TX(m.d.hess.yy, h_dt.yy);
        return m;
    };

    MatterPack mp = pack(s.phi, s.Pphi, prev.phi, prev.Pphi);
    MatterPack mw = pack(s.omega, s.Pomega, prev.omega, prev.Pomega);

    // on-shell wave operator values (the field equations)
    const VectorField gp = gradient(s.phi), go = gradient(s.omega);
    mp.boxU = -0.5 * (em4p * detail::contract(ginv, mw.d.dtU, go, mw.d.dtU, go));
    mw.boxU = 4.0 * detail::contract(ginv, mw.d.dtU, go, mp.d.dtU, gp);

    // previous-state packs for T X backward differences
    auto TX_prev = [&](const ScalarField& Uprev, const ScalarField& Pprev) {
        const ScalarField dtU = Nprev * Pprev + prev.beta.x * deriv_x(Uprev) +
                                prev.beta.y * deriv_y(Uprev);
        const SymTensorField h = hessian(Uprev);
        const SymTensorField hdt = hessian(dtU);
        SymTensorField t(g);
        auto one = [&](const ScalarField& hij, const ScalarField& dthij) {
            return (dthij - prev.beta.x * deriv_x(hij) - prev.beta.y * deriv_y(hij)) / Nprev;
        };
        t.xx = one(h.xx, hdt.xx);
        t.xy = one(h.xy, hdt.xy);
        t.yy = one(h.yy, hdt.yy);
        return t;
    };
    const SymTensorField TXp_prev = TX_prev(prev.phi, prev.Pphi);
    const SymTensorField TXw_prev = TX_prev(prev.omega, prev.Pomega);

    const VectorField gN = gradient(Nfull);

    // box of a Hessian component: -T^2 X + e^{-2g} Lap X + (e^{-2g}/N) grad X . grad N + tau T X
    auto box_component = [&](const ScalarField& X, const ScalarField& TXnow,
                             const ScalarField& TXprev) {
        const ScalarField dtTX = detail::backward_dt(TXnow, TXprev, dt);
        const VectorField gTX = gradient(TXnow);
        const ScalarField T2X = (dtTX - s.beta.x * gTX.x - s.beta.y * gTX.y) / Nfull;
        const VectorField gX = gradient(X);
        return -1.0 * T2X + em2g * laplacian(X) + (em2g / Nfull) * (gX.x * gN.x + gX.y * gN.y) +
               s.tau * TXnow;
    };

    // coefficient fields (e^{-4phi}) g^{ab} with spatial gradients/Hessians
    auto coeff_fields = [&](bool with_em4p) {
        std::array<ScalarField, 6> c = {ginv.gtt, ginv.gtx, ginv.gty, ginv.gxx, ginv.gxy, ginv.gyy};
        if (with_em4p)
            for (auto& f : c) f = em4p * f;
        return c;
    };

    // spacetime first/second derivatives of the matter fields
    struct STDerivs {
        ScalarField dt;           // d_t U
        VectorField dx;           // spatial gradient
        ScalarField dtt;          // d_t^2
        VectorField dtdx;         // d_t d_i
        SymTensorField dd;        // d_i d_j
    };
    auto st_derivs = [&](const MatterPack& m, const ScalarField& U) {
        STDerivs d{m.d.dtU, gradient(U), m.dt2, m.d.grad_dtU, m.d.hess};
        return d;
    };
    STDerivs Dp = st_derivs(mp, s.phi);
    STDerivs Dw = st_derivs(mw, s.omega);

    auto d_alpha = [&](const STDerivs& D, int a) -> const ScalarField& {
        return a == 0 ? D.dt : (a == 1 ? D.dx.x : D.dx.y);
    };
    auto dd_alpha_i = [&](const STDerivs& D, int a, int i) -> const ScalarField& {
        // d_alpha d_i with i spatial
        if (a == 0) return i == 0 ? D.dtdx.x : D.dtdx.y;
        if (a == 1) return i == 0 ? D.dd.xx : D.dd.xy;
        return i == 0 ? D.dd.xy : D.dd.yy;
    };

    // F^U_{ij} for (i,j) in {(0,0),(0,1),(1,1)}
    auto F_of = [&](bool is_phi) {
        const MatterPack& m = is_phi ? mp : mw;
        const SymTensorField& TXprev = is_phi ? TXp_prev : TXw_prev;
        // commutator [box, dd]U = box(ddU) - dd(boxU), boxU on-shell
        const SymTensorField hbox = hessian(m.boxU);
        std::array<ScalarField, 3> F = {
            box_component(m.d.hess.xx, m.TX.xx, TXprev.xx) - hbox.xx,
            box_component(m.d.hess.xy, m.TX.xy, TXprev.xy) - hbox.xy,
            box_component(m.d.hess.yy, m.TX.yy, TXprev.yy) - hbox.yy};

        // coupling terms: C = e^{-4phi} g^{ab} for phi, C = g^{ab} for omega
        const std::array<ScalarField, 6> C = coeff_fields(is_phi);
        std::array<SymTensorField, 6> hC;
        std::array<VectorField, 6> gC;
        for (int k = 0; k < 6; ++k) {
            hC[static_cast<size_t>(k)] = hessian(C[static_cast<size_t>(k)]);
            gC[static_cast<size_t>(k)] = gradient(C[static_cast<size_t>(k)]);
        }
        auto cidx = [](int a, int b) {
            if (a == 0 && b == 0) return 0;
            if ((a == 0 && b == 1) || (a == 1 && b == 0)) return 1;
            if ((a == 0 && b == 2) || (a == 2 && b == 0)) return 2;
            if (a == 1 && b == 1) return 3;
            if ((a == 1 && b == 2) || (a == 2 && b == 1)) return 4;
            return 5;
        };
        auto hC_at = [&](int k, int i, int j) -> const ScalarField& {
            const SymTensorField& t = hC[static_cast<size_t>(k)];
            if (i == 0 && j == 0) return t.xx;
            if (i == 1 && j == 1) return t.yy;
            return t.xy;
        };
        auto gC_at = [&](int k, int i) -> const ScalarField& {
            const VectorField& v = gC[static_cast<size_t>(k)];
            return i == 0 ? v.x : v.y;
        };

        const std::array<std::pair<int, int>, 3> comps = {{{0, 0}, {0, 1}, {1, 1}}};
        for (size_t ci = 0; ci < comps.size(); ++ci) {
            const int i = comps[ci].first, j = comps[ci].second;
            ScalarField acc(g);
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    const int k = cidx(a, b);
                    if (is_phi) {
                        // - (1/2) dd_ij(C) d_a w d_b w
                        // - d_(i C  d_a d_j) w  d_b w
                        // - C d_a d_i w  d_b d_j w
                        axpy(-0.5, hC_at(k, i, j) * (d_alpha(Dw, a) * d_alpha(Dw, b)), acc);
                        axpy(-1.0,
                             gC_at(k, i) * (dd_alpha_i(Dw, a, j) * d_alpha(Dw, b)) +
                                 gC_at(k, j) * (dd_alpha_i(Dw, a, i) * d_alpha(Dw, b)),
                             acc);
                        axpy(-1.0,
                             C[static_cast<size_t>(k)] *
                                 (dd_alpha_i(Dw, a, i) * dd_alpha_i(Dw, b, j)),
                             acc);
                    } else {
                        // + 4 dd_ij(C) d_a w d_b phi
                        // + 4 d_(i C [d_a w d_b d_j) phi + d_a d_j) w d_b phi]
                        // + 4 C d_a d_(i w d_b d_j) phi
                        axpy(4.0, hC_at(k, i, j) * (d_alpha(Dw, a) * d_alpha(Dp, b)), acc);
                        axpy(4.0,
                             gC_at(k, i) * (d_alpha(Dw, a) * dd_alpha_i(Dp, b, j) +
                                            dd_alpha_i(Dw, a, j) * d_alpha(Dp, b)) +
                                 gC_at(k, j) * (d_alpha(Dw, a) * dd_alpha_i(Dp, b, i) +
                                                dd_alpha_i(Dw, a, i) * d_alpha(Dp, b)),
                             acc);
                        axpy(4.0,
                             C[static_cast<size_t>(k)] *
                                 (dd_alpha_i(Dw, a, i) * dd_alpha_i(Dp, b, j) +
                                  dd_alpha_i(Dw, a, j) * dd_alpha_i(Dp, b, i)),
                             acc);
                    }
                }
            F[ci] = F[ci] + acc;
        }
        return F;
    };

    const std::array<ScalarField, 3> Fp = F_of(true);
    const std::array<ScalarField, 3> Fw = F_of(false);

    RemainderProxy out;
    auto l2sum3 = [&](const std::array<ScalarField, 3>& a) {
        return norm_l2(a[0]) + 2.0 * norm_l2(a[1]) + norm_l2(a[2]);
    };
    out.F_phi_l2 = l2sum3(Fp);
    out.F_omega_l2 = l2sum3(Fw);

    // d_t gamma from the algebraic tau relation: e0 gamma = (div beta - N tau)/2
    const ScalarField e0gamma = 0.5 * (divergence(s.beta) - Nfull * s.tau);
    const VectorField ggam = gradient(gfull);
    const ScalarField dt_gamma = e0gamma + s.beta.x * ggam.x + s.beta.y * ggam.y;
    const double dtg_sup = norm_sup(dt_gamma);

    auto mag2 = [](const ScalarField& a, const ScalarField& b) { return a * a + b * b; };

    // per-U norm groups
    double d_dd = 0.0, dU_ddU = 0.0, ddU_dU2 = 0.0, dU3 = 0.0, ddU_sq = 0.0, g_d3U = 0.0,
           g_dU_ddU = 0.0;
    const ScalarField gmag2 = [&] {
        const VectorField gNf = gradient(Nfull);
        ScalarField m = mag2(gNf.x, gNf.y) + mag2(ggam.x, ggam.y);
        const VectorField gbx = gradient(s.beta.x), gby = gradient(s.beta.y);
        return m + mag2(gbx.x, gbx.y) + mag2(gby.x, gby.y);
    }();
    const ScalarField gmag = map_field(gmag2, [](double u) { return std::sqrt(u); });

    for (const MatterPack* m : {&mp, &mw}) {
        const STDerivs& D = (m == &mp) ? Dp : Dw;
        // |dd U| and |d dd U|
        ScalarField ddU = map_field(
            m->d.hess.xx * m->d.hess.xx + 2.0 * (m->d.hess.xy * m->d.hess.xy) +
                m->d.hess.yy * m->d.hess.yy,
            [](double u) { return std::sqrt(u); });
        // time derivative of each Hessian component: d_t = hessian(d_t U)
        const SymTensorField hdt = hessian(m->d.dtU);
        ScalarField d_ddU = map_field(
            hdt.xx * hdt.xx + 2.0 * (hdt.xy * hdt.xy) + hdt.yy * hdt.yy +
                mag2(m->d.g_hxx.x, m->d.g_hxx.y) + 2.0 * mag2(m->d.g_hxy.x, m->d.g_hxy.y) +
                mag2(m->d.g_hyy.x, m->d.g_hyy.y),
            [](double u) { return std::sqrt(u); });
        ScalarField dU = map_field(D.dt * D.dt + mag2(D.dx.x, D.dx.y),
                                   [](double u) { return std::sqrt(u); });
        ScalarField d_gradU = map_field(
            mag2(D.dtdx.x, D.dtdx.y) + D.dd.xx * D.dd.xx + 2.0 * (D.dd.xy * D.dd.xy) +
                D.dd.yy * D.dd.yy,
            [](double u) { return std::sqrt(u); });
        ScalarField d3U = map_field(mag2(m->d.g_hxx.x, m->d.g_hxx.y) +
                                        2.0 * mag2(m->d.g_hxy.x, m->d.g_hxy.y) +
                                        mag2(m->d.g_hyy.x, m->d.g_hyy.y),
                                    [](double u) { return std::sqrt(u); });

        d_dd += norm_l2(d_ddU);
        dU_ddU += norm_l2(dU * ddU);
        ddU_dU2 += norm_l2(ddU * (dU * dU));
        dU3 += norm_l2(dU * (dU * dU));
        ddU_sq += norm_l2(d_gradU * d_gradU);
        g_d3U += norm_l2(gmag * d3U);
        g_dU_ddU += norm_l2(gmag * (dU * ddU));
    }

    out.value = dtg_sup * (d_dd * d_dd + dU_ddU * dU_ddU) +
                (d_dd + dU_ddU) * (ddU_dU2 + dU3 + out.F_phi_l2 + out.F_omega_l2 + ddU_sq +
                                   g_d3U + g_dU_ddU);
    return out;
}

// ---------------------------------------------------------------------------
// One time-sample of everything monitored

struct DiagnosticsSettings {
    double delta = -0.5;
    double delta_prime = -0.51; // delta - epsilon
    double support_threshold = 1e-10;
    bool with_remainder = true; // the F^U assembly is the expensive part
};

struct DiagnosticsRecord {
    double t = 0.0;
    double cl1_x = 0.0, cl1_y = 0.0, cl2_residual = 0.0;
    double tau_sup = 0.0;
    double A_l2 = 0.0, B_l2 = 0.0, e0tau_l2 = 0.0;
    double bianchi_energy = 0.0;
    double E1_phi = 0.0, E1_omega = 0.0, E3 = 0.0;
    double remainder = 0.0;
    double supp_phi = 0.0, supp_omega = 0.0;
    double min_N = 1.0, max_speed = 1.0;
    double norm_gamma_tilde = 0.0, norm_N_tilde = 0.0, norm_beta = 0.0;
    double norm_dphi_H2 = 0.0, norm_domega_H2 = 0.0, smallness_L4 = 0.0;
};

inline std::map<std::string, double> sobolev_report(const StateVector& s,
                                                    const DiagnosticsSettings& cfg) {
    std::map<std::string, double> out;
    out["gamma_tilde_H2_delta"] = weighted_norm(s.gamma.tilde, WeightSpec{2, 2.0, cfg.delta});
    out["N_tilde_H2_delta"] = weighted_norm(s.N.tilde, WeightSpec{2, 2.0, cfg.delta});
    out["beta_H2_deltap"] = weighted_norm(s.beta, WeightSpec{2, 2.0, cfg.delta_prime});
    const ScalarField Nfull = s.N_full();
    const ScalarField dtphi = s.dt_phi(Nfull);
    const ScalarField dtomega = s.dt_omega(Nfull);
    const VectorField gp = gradient(s.phi);
    const VectorField go = gradient(s.omega);
    const WeightSpec h2{2, 2.0, 0.0};
    out["dphi_H2"] = weighted_norm(dtphi, h2) + weighted_norm(gp.x, h2) + weighted_norm(gp.y, h2);
    out["domega_H2"] =
        weighted_norm(dtomega, h2) + weighted_norm(go.x, h2) + weighted_norm(go.y, h2);
    out["smallness_L4"] = norm_lp(dtphi, 4.0) + norm_lp(gp.x, 4.0) + norm_lp(gp.y, 4.0) +
                          norm_lp(dtomega, 4.0) + norm_lp(go.x, 4.0) + norm_lp(go.y, 4.0);
    return out;
}

// Pure function of (state, previous accepted state, dt): recomputing from a
// saved snapshot reproduces the record bitwise.
inline DiagnosticsRecord compute_diagnostics(const StateVector& s, const StateVector& prev,
                                             double dt, const DiagnosticsSettings& cfg) {
    DiagnosticsRecord r;
    r.t = s.t;
    const auto cls = conservation_laws(s);
    r.cl1_x = cls.first[0];
    r.cl1_y = cls.first[1];
    r.cl2_residual = cls.second;
    r.tau_sup = norm_sup(s.tau);

    ScalarField e0tau(s.grid());
    if (dt > 0.0) {
        const VectorField gt = gradient(s.tau);
        e0tau = (1.0 / dt) * (s.tau - prev.tau) - s.beta.x * gt.x - s.beta.y * gt.y;
    }
    BianchiResiduals bi = bianchi_residuals(s, e0tau);
    r.A_l2 = std::sqrt(norm_l2(bi.A.x) * norm_l2(bi.A.x) + norm_l2(bi.A.y) * norm_l2(bi.A.y));
    r.B_l2 = std::sqrt(norm_l2(bi.B.x) * norm_l2(bi.B.x) + norm_l2(bi.B.y) * norm_l2(bi.B.y));
    r.e0tau_l2 = norm_l2(e0tau);
    r.bianchi_energy = bi.energy;

    r.E1_phi = energy_first_order(s, EnergyField::Phi);
    r.E1_omega = energy_first_order(s, EnergyField::Omega);
    r.E3 = energy_third_order(s);
    if (cfg.with_remainder && dt > 0.0) r.remainder = remainder_proxy(s, prev, dt).value;

    r.supp_phi = support_radius(s.phi, cfg.support_threshold);
    r.supp_omega = support_radius(s.omega, cfg.support_threshold);
    r.min_N = min_lapse(s);
    r.max_speed = max_coordinate_speed(s);

    const auto norms = sobolev_report(s, cfg);
    r.norm_gamma_tilde = norms.at("gamma_tilde_H2_delta");
    r.norm_N_tilde = norms.at("N_tilde_H2_delta");
    r.norm_beta = norms.at("beta_H2_deltap");
    r.norm_dphi_H2 = norms.at("dphi_H2");
    r.norm_domega_H2 = norms.at("domega_H2");
    r.smallness_L4 = norms.at("smallness_L4");
    return r;
}

inline const char* diagnostics_csv_header() {
    return "t,cl1_x,cl1_y,cl2_res,tau_sup,A_l2,B_l2,e0tau_l2,E1_phi,E1_omega,E3,supp_phi,"
           "supp_omega,minN,max_speed,bianchi_E,r_proxy,norm_gamma_tilde_H2d,norm_N_tilde_H2d,"
           "norm_beta_H2dp,norm_dphi_H2,norm_domega_H2,norm_smallness_L4";
}

inline std::string diagnostics_csv_row(const DiagnosticsRecord& r) {
    char buf[1024];
    std::snprintf(buf, sizeof buf,
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                  r.t, r.cl1_x, r.cl1_y, r.cl2_residual, r.tau_sup, r.A_l2, r.B_l2, r.e0tau_l2,
                  r.E1_phi, r.E1_omega, r.E3, r.supp_phi, r.supp_omega, r.min_N, r.max_speed,
                  r.bianchi_energy, r.remainder, r.norm_gamma_tilde, r.norm_N_tilde, r.norm_beta,
                  r.norm_dphi_H2, r.norm_domega_H2, r.smallness_L4);
    return buf;
}

} // namespace u1e
