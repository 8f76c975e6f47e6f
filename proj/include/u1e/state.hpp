#pragma once

#include <memory>

#include "elliptic.hpp"
#include "grid.hpp"

namespace u1e {

// Full dynamical state at one time. Pphi/Pomega are the unit-normal momenta
// T phi / T omega; Pgamma is T gamma_tilde. gamma.log_coeff stores -alpha and
// stays frozen under the free scheme; N.log_coeff is N_a (N = 1 + N_a chi ln
// + N_tilde).
struct StateVector {
    double t = 0.0;
    ScalarField phi, Pphi, omega, Pomega;
    LogDecomposedScalar gamma;
    ScalarField Pgamma;
    SymTensorField H;
    LogDecomposedScalar N;
    VectorField beta;
    ScalarField tau;
    double alpha0 = 0.0; // log coefficient of -gamma at t=0 (conserved)
    std::shared_ptr<const ChiCutoff> chi;

    StateVector() = default;
    explicit StateVector(const GridSpec& g, std::shared_ptr<const ChiCutoff> c)
        : phi(g), Pphi(g), omega(g), Pomega(g), gamma(g), Pgamma(g), H(g), N(g), beta(g),
          tau(g), chi(std::move(c)) {
        H.traceless = true;
    }

    const GridSpec& grid() const { return phi.grid; }

    ScalarField gamma_full() const { return gamma.reconstruct(*chi); }
    ScalarField N_full() const { return N.reconstruct(*chi, 1.0); }

    // T gamma = T gamma_tilde + alpha * T(chi ln), with T(chi ln) = -beta.grad(chi ln)/N
    ScalarField Tgamma(const ScalarField& Nfull) const {
        const double alpha = -gamma.log_coeff;
        ScalarField out = Pgamma;
        if (alpha != 0.0) {
            ScalarField adv = beta.x * chi->grad_chi_ln.x + beta.y * chi->grad_chi_ln.y;
            out = out + map_field(adv / Nfull, [alpha](double u) { return alpha * u; });
        }
        return out;
    }

    ScalarField dt_phi(const ScalarField& Nfull) const {
        return Nfull * Pphi + beta.x * deriv_x(phi) + beta.y * deriv_y(phi);
    }
    ScalarField dt_omega(const ScalarField& Nfull) const {
        return Nfull * Pomega + beta.x * deriv_x(omega) + beta.y * deriv_y(omega);
    }
};

// Frequently reused pointwise combinations of one state.
struct StateAux {
    ScalarField gamma_full, N_full;
    ScalarField e2gamma, em2gamma, em4phi;
    VectorField grad_phi, grad_omega, grad_N, grad_gamma;
    ScalarField div_beta;
    ScalarField Hsq; // |H|^2 = H_ij H^ij
};

inline StateAux make_aux(const StateVector& s) {
    StateAux a;
    a.gamma_full = s.gamma_full();
    a.N_full = s.N_full();
    a.e2gamma = map_field(a.gamma_full, [](double u) { return std::exp(2.0 * u); });
    a.em2gamma = map_field(a.gamma_full, [](double u) { return std::exp(-2.0 * u); });
    a.em4phi = map_field(s.phi, [](double u) { return std::exp(-4.0 * u); });
    a.grad_phi = gradient(s.phi);
    a.grad_omega = gradient(s.omega);
    a.grad_N = gradient(a.N_full);
    a.grad_gamma = gradient(a.gamma_full);
    a.div_beta = divergence(s.beta);
    a.Hsq = s.H.xx * s.H.xx + 2.0 * (s.H.xy * s.H.xy) + s.H.yy * s.H.yy;
    return a;
}

inline double min_lapse(const StateVector& s) {
    ScalarField n = s.N_full();
    double m = n.v[0];
    for (double u : n.v) m = std::min(m, u);
    return m;
}

// coordinate light speed N e^{-gamma} + |beta|
inline ScalarField coordinate_speed(const StateVector& s) {
    ScalarField n = s.N_full();
    ScalarField g = s.gamma_full();
    ScalarField out(s.grid());
    parallel_rows(s.grid().n, [&](int iy) {
        const size_t row = static_cast<size_t>(iy) * s.grid().n;
        for (int ix = 0; ix < s.grid().n; ++ix) {
            const double b = std::hypot(s.beta.x.v[row + ix], s.beta.y.v[row + ix]);
            out.v[row + ix] = n.v[row + ix] * std::exp(-g.v[row + ix]) + b;
        }
    });
    return out;
}

inline double max_coordinate_speed(const StateVector& s) { return norm_sup(coordinate_speed(s)); }

} // namespace u1e
