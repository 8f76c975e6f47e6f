#pragma once

#include "state.hpp"

namespace u1e {

// Elliptic-gauge curvature and matter formulas in the (e0, d_i) frame.
// Spatial derivatives come from the grid stencils; e0 tau and e0 H are inputs
// so that callers supply the same expressions the evolution uses (or exact
// values, for oracle comparisons).

// time derivatives of the gauge fields, needed by the wave operator
struct GaugeRates {
    ScalarField N_t;
    VectorField beta_t;

    GaugeRates() = default;
    explicit GaugeRates(const GridSpec& g) : N_t(g), beta_t(g) {}
};

inline ScalarField e0(const ScalarField& f, const ScalarField& f_t, const StateVector& s) {
    return f_t - s.beta.x * deriv_x(f) - s.beta.y * deriv_y(f);
}

// Box_g f = -T^2 f + e^{-2gamma} Lap f + (e^{-2gamma}/N) grad f . grad N
//           + tau T f
inline ScalarField box_g(const ScalarField& f, const ScalarField& f_t, const ScalarField& f_tt,
                         const StateVector& s, const GaugeRates* rates = nullptr) {
    const ScalarField Nfull = s.N_full();
    const ScalarField gfull = s.gamma_full();
    const ScalarField em2g = map_field(gfull, [](double u) { return std::exp(-2.0 * u); });
    const VectorField gf = gradient(f);
    const VectorField gft = gradient(f_t);
    const VectorField gN = gradient(Nfull);

    const ScalarField Tf = (f_t - s.beta.x * gf.x - s.beta.y * gf.y) / Nfull;
    const VectorField gTf = gradient(Tf);

    // d_t(Tf) = (f_tt - beta_t.grad f - beta.grad f_t - Tf N_t) / N
    ScalarField dtTf = f_tt - s.beta.x * gft.x - s.beta.y * gft.y;
    if (rates) {
        dtTf = dtTf - rates->beta_t.x * gf.x - rates->beta_t.y * gf.y - Tf * rates->N_t;
    }
    dtTf = dtTf / Nfull;
    const ScalarField T2f = (dtTf - s.beta.x * gTf.x - s.beta.y * gTf.y) / Nfull;

    return -1.0 * T2f + em2g * laplacian(f) + (em2g / Nfull) * (gf.x * gN.x + gf.y * gN.y) +
           s.tau * Tf;
}

// K_ij = -delta_ij e^{2gamma} T gamma + (e^{2gamma}/2N)(d_i beta_j + d_j beta_i)
inline SymTensorField second_fundamental(const StateVector& s) {
    const ScalarField Nfull = s.N_full();
    const ScalarField gfull = s.gamma_full();
    const ScalarField e2g = map_field(gfull, [](double u) { return std::exp(2.0 * u); });
    const ScalarField Tg = s.Tgamma(Nfull);
    const ScalarField fac = e2g / (2.0 * Nfull);
    const ScalarField bxx = deriv_x(s.beta.x);
    const ScalarField bxy = deriv_y(s.beta.x);
    const ScalarField byx = deriv_x(s.beta.y);
    const ScalarField byy = deriv_y(s.beta.y);

    SymTensorField K(s.grid());
    const ScalarField diag = e2g * Tg;
    K.xx = fac * (2.0 * bxx) - diag;
    K.xy = fac * (bxy + byx);
    K.yy = fac * (2.0 * byy) - diag;
    return K;
}

struct FundamentalSplit {
    SymTensorField K;
    SymTensorField H;   // (e^{2gamma}/2N) L beta
    ScalarField tau;    // -2 T gamma + div beta / N
};

inline FundamentalSplit second_fundamental_split(const StateVector& s) {
    FundamentalSplit out;
    out.K = second_fundamental(s);
    const ScalarField Nfull = s.N_full();
    const ScalarField gfull = s.gamma_full();
    const ScalarField e2g = map_field(gfull, [](double u) { return std::exp(2.0 * u); });
    const ScalarField fac = e2g / (2.0 * Nfull);
    const SymTensorField lb = conformal_killing(s.beta);
    out.H.xx = fac * lb.xx;
    out.H.xy = fac * lb.xy;
    out.H.yy = fac * lb.yy;
    out.H.traceless = true;
    out.tau = -2.0 * s.Tgamma(Nfull) + divergence(s.beta) / Nfull;
    return out;
}

struct CurvatureRates {
    ScalarField e0tau;
    SymTensorField e0H;

    CurvatureRates() = default;
    explicit CurvatureRates(const GridSpec& g) : e0tau(g), e0H(g) { e0H.traceless = true; }
};

struct RicciComponents {
    ScalarField R00;
    VectorField R0j;
    SymTensorField Rij;
    ScalarField R;
};

inline RicciComponents ricci_components(const StateVector& s, const CurvatureRates& rates) {
    const GridSpec& g = s.grid();
    const ScalarField Nfull = s.N_full();
    const ScalarField gfull = s.gamma_full();
    const ScalarField e2g = map_field(gfull, [](double u) { return std::exp(2.0 * u); });
    const ScalarField em2g = map_field(gfull, [](double u) { return std::exp(-2.0 * u); });
    const ScalarField em4g = em2g * em2g;
    const ScalarField lap_gamma = laplacian(gfull);
    const ScalarField lap_N = laplacian(Nfull);
    const SymTensorField hN = hessian(Nfull);
    const VectorField gN = gradient(Nfull);
    const VectorField gg = gradient(gfull);
    const ScalarField Ttau = rates.e0tau / Nfull;
    const ScalarField Hsq = s.H.xx * s.H.xx + 2.0 * (s.H.xy * s.H.xy) + s.H.yy * s.H.yy;

    RicciComponents out;

    // R00 = N (e0 tau - e^{-4gamma} N |H|^2 - N tau^2/2 + e^{-2gamma} Lap N)
    out.R00 = Nfull * (rates.e0tau - em4g * (Nfull * Hsq) - 0.5 * (Nfull * (s.tau * s.tau)) +
                       em2g * lap_N);

    // R0j = N (d_j tau / 2 - e^{-2gamma} d^i H_ij)
    const VectorField gtau = gradient(s.tau);
    const ScalarField divHx = deriv_x(s.H.xx) + deriv_y(s.H.xy);
    const ScalarField divHy = deriv_x(s.H.xy) + deriv_y(s.H.yy);
    out.R0j = VectorField(g);
    out.R0j.x = Nfull * (0.5 * gtau.x - em2g * divHx);
    out.R0j.y = Nfull * (0.5 * gtau.y - em2g * divHy);

    // diagonal block shared by both components
    const ScalarField diag = -1.0 * lap_gamma + 0.5 * (e2g * (s.tau * s.tau)) -
                             0.5 * (e2g * Ttau) - 0.5 * (lap_N / Nfull);

    // beta-sym term d_(j beta^k H_i)k without a 1/2 (trace pairs with the
    // quadratic H term through L beta = 2 e^{-2gamma} N H)
    const ScalarField bxx = deriv_x(s.beta.x);
    const ScalarField bxy = deriv_y(s.beta.x);
    const ScalarField byx = deriv_x(s.beta.y);
    const ScalarField byy = deriv_y(s.beta.y);

    // (H^2)_ij = H_i^l H_jl
    const ScalarField H2xx = s.H.xx * s.H.xx + s.H.xy * s.H.xy;
    const ScalarField H2xy = s.H.xx * s.H.xy + s.H.xy * s.H.yy;
    const ScalarField H2yy = s.H.xy * s.H.xy + s.H.yy * s.H.yy;

    // hessian piece with the gamma correction, traceless by construction
    const ScalarField lapN_hess = hN.xx + hN.yy;
    const ScalarField gdot = gg.x * gN.x + gg.y * gN.y;
    auto hess_term = [&](const ScalarField& hij, const ScalarField& gi_gNj,
                         const ScalarField& gj_gNi, double delta_ij) {
        // d_i d_j N - (delta_ij/2) Lap N - (d_i gamma d_j N + d_j gamma d_i N
        //                                   - delta_ij grad gamma . grad N)
        ScalarField t = hij;
        if (delta_ij != 0.0) axpy(-0.5 * delta_ij, lapN_hess, t);
        t = t - gi_gNj - gj_gNi;
        if (delta_ij != 0.0) axpy(delta_ij, gdot, t);
        return t;
    };

    out.Rij = SymTensorField(g);
    out.Rij.xx = diag - rates.e0H.xx / Nfull - 2.0 * (em2g * H2xx) +
                 (2.0 * (byx * s.H.xy + bxx * s.H.xx)) / Nfull -
                 hess_term(hN.xx, gg.x * gN.x, gg.x * gN.x, 1.0) / Nfull;
    out.Rij.xy = -1.0 * (rates.e0H.xy / Nfull) - 2.0 * (em2g * H2xy) +
                 (bxy * s.H.xx + byy * s.H.xy + bxx * s.H.xy + byx * s.H.yy) / Nfull -
                 hess_term(hN.xy, gg.x * gN.y, gg.y * gN.x, 0.0) / Nfull;
    out.Rij.yy = diag - rates.e0H.yy / Nfull - 2.0 * (em2g * H2yy) +
                 (2.0 * (bxy * s.H.xy + byy * s.H.yy)) / Nfull -
                 hess_term(hN.yy, gg.y * gN.y, gg.y * gN.y, 1.0) / Nfull;

    // R = -2 T tau + (3/2) tau^2 + e^{-4gamma} |H|^2 - 2 e^{-2gamma} Lap N / N
    //     - 2 e^{-2gamma} Lap gamma
    out.R = -2.0 * Ttau + 1.5 * (s.tau * s.tau) + em4g * Hsq -
            2.0 * (em2g * (lap_N / Nfull)) - 2.0 * (em2g * lap_gamma);
    return out;
}

// closed form of delta^{ij} R_ij (appendix trace identity)
inline ScalarField ricci_trace_closed(const StateVector& s, const CurvatureRates& rates) {
    const ScalarField Nfull = s.N_full();
    const ScalarField gfull = s.gamma_full();
    const ScalarField e2g = map_field(gfull, [](double u) { return std::exp(2.0 * u); });
    return 2.0 * (-1.0 * laplacian(gfull) + 0.5 * (e2g * (s.tau * s.tau)) -
                  0.5 * (e2g * (rates.e0tau / Nfull)) - 0.5 * (laplacian(Nfull) / Nfull));
}

struct StressTensor {
    ScalarField T00;
    VectorField T0j;
    SymTensorField Tij;
    ScalarField trace_g;              // tr_g T
    ScalarField T00_minus_g00_trace;  // = 2 (e0 phi)^2 + e^{-4phi}(e0 omega)^2 / 2
    SymTensorField Tij_minus_gij_trace;
};

inline StressTensor stress_tensor(const StateVector& s) {
    const GridSpec& g = s.grid();
    const ScalarField Nfull = s.N_full();
    const ScalarField gfull = s.gamma_full();
    const ScalarField e2g = map_field(gfull, [](double u) { return std::exp(2.0 * u); });
    const ScalarField em2g = map_field(gfull, [](double u) { return std::exp(-2.0 * u); });
    const ScalarField em4p = map_field(s.phi, [](double u) { return std::exp(-4.0 * u); });
    const ScalarField N2 = Nfull * Nfull;
    const ScalarField e0phi = Nfull * s.Pphi;
    const ScalarField e0omega = Nfull * s.Pomega;
    const VectorField gp = gradient(s.phi);
    const VectorField go = gradient(s.omega);
    const ScalarField gp2 = gp.x * gp.x + gp.y * gp.y;
    const ScalarField go2 = go.x * go.x + go.y * go.y;

    StressTensor out;
    out.T00 = e0phi * e0phi + em2g * (N2 * gp2) +
              0.25 * (em4p * (e0omega * e0omega + em2g * (N2 * go2)));
    out.T0j = VectorField(g);
    out.T0j.x = 2.0 * (e0phi * gp.x) + 0.5 * (em4p * (e0omega * go.x));
    out.T0j.y = 2.0 * (e0phi * gp.y) + 0.5 * (em4p * (e0omega * go.y));

    const ScalarField diag_phi = e2g * (s.Pphi * s.Pphi) - gp2; // (e^{2g}/N^2)(e0 phi)^2 = e^{2g} P^2
    const ScalarField diag_omega = e2g * (s.Pomega * s.Pomega) - go2;
    out.Tij = SymTensorField(g);
    out.Tij.xx = 2.0 * (gp.x * gp.x) + diag_phi + 0.25 * (em4p * (2.0 * (go.x * go.x) + diag_omega));
    out.Tij.xy = 2.0 * (gp.x * gp.y) + 0.25 * (em4p * (2.0 * (go.x * go.y)));
    out.Tij.yy = 2.0 * (gp.y * gp.y) + diag_phi + 0.25 * (em4p * (2.0 * (go.y * go.y) + diag_omega));

    out.trace_g = s.Pphi * s.Pphi - em2g * gp2 +
                  0.25 * (em4p * (s.Pomega * s.Pomega - em2g * go2));

    out.T00_minus_g00_trace = 2.0 * (e0phi * e0phi) + 0.5 * (em4p * (e0omega * e0omega));
    out.Tij_minus_gij_trace = SymTensorField(g);
    out.Tij_minus_gij_trace.xx = 2.0 * (gp.x * gp.x) + 0.5 * (em4p * (go.x * go.x));
    out.Tij_minus_gij_trace.xy = 2.0 * (gp.x * gp.y) + 0.5 * (em4p * (go.x * go.y));
    out.Tij_minus_gij_trace.yy = 2.0 * (gp.y * gp.y) + 0.5 * (em4p * (go.y * go.y));
    return out;
}

} // namespace u1e
