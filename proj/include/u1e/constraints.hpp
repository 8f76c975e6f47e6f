#pragma once

#include <array>
#include <cmath>
#include <utility>

#include "elliptic.hpp"
#include "state.hpp"

namespace u1e {

// Free initial data: the matter potentials and the rescaled momenta
// phi_ring = e^{2 gamma} T phi, omega_ring = e^{2 gamma} T omega, all
// compactly supported in B_R. Prescribing the rescaled momenta decouples the
// momentum constraint from the Hamiltonian one.
struct FreeData {
    ScalarField phi0, phiDot0, omega0, omegaDot0;
    double support_radius = 1.0;

    FreeData() = default;
    explicit FreeData(const GridSpec& g, double R = 1.0)
        : phi0(g), phiDot0(g), omega0(g), omegaDot0(g), support_radius(R) {}

    const GridSpec& grid() const { return phi0.grid; }

    void validate() const {
        const GridSpec& g = grid();
        double worst = 0.0;
        for (const ScalarField* f : {&phi0, &phiDot0, &omega0, &omegaDot0}) {
            if (!all_finite(*f)) throw ValidationError("free data: non-finite values");
            for (int iy = 0; iy < g.n; ++iy)
                for (int ix = 0; ix < g.n; ++ix)
                    if (std::hypot(g.x(ix), g.x(iy)) > support_radius)
                        worst = std::max(worst, std::fabs(f->at(ix, iy)));
        }
        if (worst > 1e-14)
            throw ValidationError("free data: support leaks outside B_R by " + std::to_string(worst));
    }
};

// (3.1): integral of 2 phi_ring d_j phi + (1/2) e^{-4 phi} omega_ring d_j omega
inline std::pair<double, double> check_orthogonality(const FreeData& free) {
    const ScalarField em4phi = map_field(free.phi0, [](double u) { return std::exp(-4.0 * u); });
    const VectorField gp = gradient(free.phi0);
    const VectorField go = gradient(free.omega0);
    const ScalarField wx = 2.0 * (free.phiDot0 * gp.x) + 0.5 * (em4phi * (free.omegaDot0 * go.x));
    const ScalarField wy = 2.0 * (free.phiDot0 * gp.y) + 0.5 * (em4phi * (free.omegaDot0 * go.y));
    return {integrate(wx), integrate(wy)};
}

struct MomentumSolution {
    SymTensorField H;
    VectorField Y; // H = L Y, kept as the exact discrete preimage
    double residual_sup = 0.0;
    double residual_l2 = 0.0;
};

// Momentum constraint d^i H_ij = -2 phi_ring d_j phi - (1/2) e^{-4phi}
// omega_ring d_j omega, solved through the vector potential Delta Y_j = rhs_j.
inline MomentumSolution solve_momentum(const FreeData& free, const EllipticConfig& cfg,
                                       double ortho_tol = 1e-8) {
    const auto ortho = check_orthogonality(free);
    if (std::fabs(ortho.first) > ortho_tol || std::fabs(ortho.second) > ortho_tol)
        throw OrthogonalityViolated(ortho.first, ortho.second);

    const ScalarField em4phi = map_field(free.phi0, [](double u) { return std::exp(-4.0 * u); });
    const VectorField gp = gradient(free.phi0);
    const VectorField go = gradient(free.omega0);
    VectorField src(free.grid());
    src.x = -2.0 * (free.phiDot0 * gp.x) - 0.5 * (em4phi * (free.omegaDot0 * go.x));
    src.y = -2.0 * (free.phiDot0 * gp.y) - 0.5 * (em4phi * (free.omegaDot0 * go.y));

    MomentumSolution out;
    out.Y = VectorField(free.grid());
    out.Y.x = detail::poisson_dirichlet(src.x, cfg);
    out.Y.y = detail::poisson_dirichlet(src.y, cfg);
    out.H = conformal_killing(out.Y);

    const ScalarField rx = deriv_x(out.H.xx) + deriv_y(out.H.xy) - src.x;
    const ScalarField ry = deriv_x(out.H.xy) + deriv_y(out.H.yy) - src.y;
    out.residual_sup = std::max(norm_sup(rx), norm_sup(ry));
    out.residual_l2 = std::sqrt(norm_l2(rx) * norm_l2(rx) + norm_l2(ry) * norm_l2(ry));
    return out;
}

namespace detail {

inline ScalarField hsq(const SymTensorField& H) {
    return H.xx * H.xx + 2.0 * (H.xy * H.xy) + H.yy * H.yy;
}

struct FixedPointMonitor {
    double change = 1e300, prev_change = 1e300;
    int growth_streak = 0, iters = 0;

    // true while another sweep is needed
    bool step(double new_change, double tol, const char* where) {
        ++iters;
        prev_change = change;
        change = new_change;
        if (change < tol) return false;
        growth_streak = (change > prev_change) ? growth_streak + 1 : 0;
        if (iters >= 50 || growth_streak >= 3)
            throw FixedPointDiverged(where, change, iters);
        return true;
    }
};

} // namespace detail

struct HamiltonianSolution {
    LogDecomposedScalar gamma; // log_coeff = -alpha
    double residual_sup = 0.0;
    int iterations = 0;
};

// Hamiltonian constraint (semilinear): Delta gamma =
//   -e^{-2gamma}(phi_ring^2 + e^{-4phi} omega_ring^2 / 4 + |H|^2/2)
//   - |grad phi|^2 - e^{-4phi} |grad omega|^2 / 4.
// The right side is nonpositive, so alpha = -(1/2pi) int RHS >= 0.
inline HamiltonianSolution solve_hamiltonian(const SymTensorField& H, const FreeData& free,
                                             const ChiCutoff& chi, const EllipticConfig& cfg) {
    const GridSpec& g = free.grid();
    const ScalarField em4phi = map_field(free.phi0, [](double u) { return std::exp(-4.0 * u); });
    const VectorField gp = gradient(free.phi0);
    const VectorField go = gradient(free.omega0);

    ScalarField conformal_src = free.phiDot0 * free.phiDot0 +
                                0.25 * (em4phi * (free.omegaDot0 * free.omegaDot0)) +
                                0.5 * detail::hsq(H);
    ScalarField flat_src = gp.x * gp.x + gp.y * gp.y + 0.25 * (em4phi * (go.x * go.x + go.y * go.y));

    HamiltonianSolution out;
    ScalarField gamma_full(g);
    ScalarField rhs(g);
    detail::FixedPointMonitor fp;
    for (;;) {
        const ScalarField em2gamma = map_field(gamma_full, [](double u) { return std::exp(-2.0 * u); });
        rhs = -1.0 * (em2gamma * conformal_src) - flat_src;
        LogDecomposedScalar next = solve_poisson_logasym(rhs, chi, cfg);
        ScalarField next_full = next.reconstruct(chi);
        const double change = norm_sup(next_full - gamma_full);
        gamma_full = next_full;
        out.gamma = std::move(next);
        if (!fp.step(change, cfg.tol, "solve_hamiltonian")) break;
    }
    out.iterations = fp.iters;
    out.residual_sup = detail::interior_residual_sup(gamma_full, rhs);
    return out;
}

struct LapseSolution {
    LogDecomposedScalar N; // N = 1 + log_coeff chi ln + tilde
    double residual_sup = 0.0;
    int iterations = 0;
    double min_N = 1.0;
};

// Initial lapse: the maximal-slicing equation at tau = 0, in the rescaled
// momenta: Delta N = e^{-2gamma} N (|H|^2 + 2 phi_ring^2 + e^{-4phi}
// omega_ring^2 / 2). The momentum coefficients follow from R00 = T00 - g00 tr T
// so that the initial data is an exact fixed point of the evolution's lapse
// equation. N_a >= 0 because the source is nonnegative.
inline LapseSolution solve_lapse_initial(const LogDecomposedScalar& gamma, const SymTensorField& H,
                                         const FreeData& free, const ChiCutoff& chi,
                                         const EllipticConfig& cfg) {
    const GridSpec& g = free.grid();
    const ScalarField em4phi = map_field(free.phi0, [](double u) { return std::exp(-4.0 * u); });
    const ScalarField gamma_full = gamma.reconstruct(chi);
    const ScalarField em2gamma = map_field(gamma_full, [](double u) { return std::exp(-2.0 * u); });
    const ScalarField a = em2gamma * (detail::hsq(H) + 2.0 * (free.phiDot0 * free.phiDot0) +
                                      0.5 * (em4phi * (free.omegaDot0 * free.omegaDot0)));

    LapseSolution out;
    ScalarField N_full(g, 1.0);
    detail::FixedPointMonitor fp;
    ScalarField rhs(g);
    for (;;) {
        rhs = N_full * a;
        LogDecomposedScalar next = solve_poisson_logasym(rhs, chi, cfg);
        ScalarField next_full = next.reconstruct(chi, 1.0);
        double mn = next_full.v[0];
        for (double u : next_full.v) mn = std::min(mn, u);
        if (mn <= 0.1) throw LapseCollapse(mn);
        const double change = norm_sup(next_full - N_full);
        N_full = next_full;
        out.N = std::move(next);
        out.min_N = mn;
        if (!fp.step(change, cfg.tol, "solve_lapse_initial")) break;
    }
    out.iterations = fp.iters;
    out.residual_sup = detail::interior_residual_sup(N_full, rhs);
    return out;
}

// Initial shift: L beta = 2 N e^{-2gamma} H, inverted around the exact
// discrete preimage Y of H.
inline KillingInversion solve_shift_initial(const LogDecomposedScalar& gamma,
                                            const LogDecomposedScalar& N, const SymTensorField& H,
                                            const VectorField& Y, const ChiCutoff& chi,
                                            const EllipticConfig& cfg) {
    const ScalarField gamma_full = gamma.reconstruct(chi);
    const ScalarField N_full = N.reconstruct(chi, 1.0);
    const ScalarField w = zip_fields(N_full, gamma_full,
                                     [](double n, double gm) { return 2.0 * n * std::exp(-2.0 * gm); });
    return invert_killing(H, w, cfg, &Y);
}

struct ConstraintReport {
    double ortho_x = 0, ortho_y = 0;
    double momentum_residual_sup = 0, momentum_residual_l2 = 0;
    double hamiltonian_residual_sup = 0;
    double lapse_residual_sup = 0;
    double killing_residual_sup = 0;
    double cl1_x = 0, cl1_y = 0, cl2_residual = 0;
    double alpha = 0, Na = 0, min_N = 1;
    int hamiltonian_iterations = 0, lapse_iterations = 0;
};

struct InitialDataSet {
    StateVector state;
    VectorField Y;
    ScalarField e0gamma;
    ConstraintReport report;
};

// Conservation-law integrands evaluated on a state (Theorem-level identities;
// CL2's constant follows from integrating the Hamiltonian constraint against
// the 2 pi flux of the log carrier).
inline std::array<double, 3> conservation_integrals(const StateVector& s) {
    const ScalarField gamma_full = s.gamma_full();
    const ScalarField e2g = map_field(gamma_full, [](double u) { return std::exp(2.0 * u); });
    const ScalarField em2g = map_field(gamma_full, [](double u) { return std::exp(-2.0 * u); });
    const ScalarField em4phi = map_field(s.phi, [](double u) { return std::exp(-4.0 * u); });
    const VectorField gp = gradient(s.phi);
    const VectorField go = gradient(s.omega);
    const ScalarField hsq = detail::hsq(s.H);

    const ScalarField c1x = 4.0 * (e2g * (s.Pphi * gp.x)) + e2g * (em4phi * (s.Pomega * go.x));
    const ScalarField c1y = 4.0 * (e2g * (s.Pphi * gp.y)) + e2g * (em4phi * (s.Pomega * go.y));
    const ScalarField c2 = 2.0 * (em2g * hsq) + 4.0 * (e2g * (s.Pphi * s.Pphi)) +
                           e2g * (em4phi * (s.Pomega * s.Pomega)) +
                           4.0 * (gp.x * gp.x + gp.y * gp.y) +
                           em4phi * (go.x * go.x + go.y * go.y);
    return {integrate(c1x), integrate(c1y), integrate(c2)};
}

inline double cl2_residual_value(const StateVector& s) {
    return conservation_integrals(s)[2] - 8.0 * M_PI * s.alpha0;
}

// Runs the whole section-4 pipeline H -> gamma -> N -> beta and assembles the
// t=0 state with tau = 0 and e0 gamma = div(beta)/2.
inline InitialDataSet assemble_initial_state(const FreeData& free,
                                             std::shared_ptr<const ChiCutoff> chi,
                                             const EllipticConfig& cfg, double ortho_tol = 1e-8) {
    free.validate();
    const GridSpec& g = free.grid();

    InitialDataSet out;
    auto ortho = check_orthogonality(free);
    out.report.ortho_x = ortho.first;
    out.report.ortho_y = ortho.second;

    MomentumSolution mom = solve_momentum(free, cfg, ortho_tol);
    HamiltonianSolution ham = solve_hamiltonian(mom.H, free, *chi, cfg);
    LapseSolution lapse = solve_lapse_initial(ham.gamma, mom.H, free, *chi, cfg);
    KillingInversion shift = solve_shift_initial(ham.gamma, lapse.N, mom.H, mom.Y, *chi, cfg);

    StateVector s(g, chi);
    s.t = 0.0;
    s.H = mom.H;
    s.gamma = ham.gamma;
    s.N = lapse.N;
    s.beta = shift.beta;
    s.tau = ScalarField(g);
    s.alpha0 = -ham.gamma.log_coeff;

    const ScalarField gamma_full = s.gamma_full();
    const ScalarField N_full = s.N_full();
    const ScalarField em2g = map_field(gamma_full, [](double u) { return std::exp(-2.0 * u); });
    s.phi = free.phi0;
    s.omega = free.omega0;
    s.Pphi = em2g * free.phiDot0;
    s.Pomega = em2g * free.omegaDot0;

    out.e0gamma = 0.5 * divergence(s.beta);
    // T gamma_tilde = T gamma + alpha T(chi ln); T(chi ln) = -beta.grad(chi ln)/N
    const double alpha = s.alpha0;
    const ScalarField adv_chi = s.beta.x * chi->grad_chi_ln.x + s.beta.y * chi->grad_chi_ln.y;
    s.Pgamma = (out.e0gamma - alpha * adv_chi) / N_full;

    out.Y = mom.Y;
    out.report.momentum_residual_sup = mom.residual_sup;
    out.report.momentum_residual_l2 = mom.residual_l2;
    out.report.hamiltonian_residual_sup = ham.residual_sup;
    out.report.hamiltonian_iterations = ham.iterations;
    out.report.lapse_residual_sup = lapse.residual_sup;
    out.report.lapse_iterations = lapse.iterations;
    out.report.killing_residual_sup = shift.residual_sup;
    out.report.alpha = s.alpha0;
    out.report.Na = lapse.N.log_coeff;
    out.report.min_N = lapse.min_N;

    const auto cls = conservation_integrals(s);
    out.report.cl1_x = cls[0];
    out.report.cl1_y = cls[1];
    out.report.cl2_residual = cls[2] - 8.0 * M_PI * s.alpha0;

    out.state = std::move(s);
    return out;
}

} // namespace u1e
