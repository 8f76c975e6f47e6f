#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "constraints.hpp"
#include "elliptic.hpp"
#include "evolution.hpp"

namespace u1e {

// Run configuration parsed from a sectioned key = value text file. Physics
// lives in the file so a run is reproducible from one archived artifact;
// command-line flags only carry paths and verbosity.
struct RunConfig {
    GridSpec grid{16.0, 257};
    EllipticConfig elliptic;
    SchemeConfig scheme;
    struct Data {
        std::string family = "radial"; // radial | asymmetric | zero
        double epsilon = 0.01;
        double R = 1.0;
        bool phi = true, phidot = true, omega = true, omegadot = true;
        long seed = 0;
    } data;
    struct Output {
        std::string directory = "out";
        std::string prefix = "run";
    } output;

    double delta_prime() const { return elliptic.delta - data.epsilon; }

    void validate() const {
        grid.validate();
        elliptic.validate();
        scheme.validate();
        if (data.epsilon < 0.0) throw ValidationError("data: epsilon must be nonnegative");
        if (!(data.R > 0.0 && data.R < grid.L / 4.0))
            throw ValidationError("data: R must satisfy 0 < R < L/4");
        if (data.family != "radial" && data.family != "asymmetric" && data.family != "zero")
            throw ValidationError("data: unknown family '" + data.family + "'");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_number(const std::string& v, int line) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (...) {
        throw ParseError("expected a number, got '" + v + "'", line);
    }
}

inline bool parse_switch(const std::string& v, int line) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ParseError("expected on/off, got '" + v + "'", line);
}

} // namespace detail

inline RunConfig parse_config_text(std::istream& in) {
    RunConfig cfg;
    std::string section, line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", lineno);
            section = line.substr(1, line.size() - 2);
            if (section != "grid" && section != "elliptic" && section != "scheme" &&
                section != "data" && section != "output")
                throw ParseError("unknown section [" + section + "]", lineno);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        auto num = [&] { return detail::parse_number(value, lineno); };
        auto flag = [&] { return detail::parse_switch(value, lineno); };

        if (section == "grid") {
            if (key == "L") cfg.grid.L = num();
            else if (key == "n") cfg.grid.n = static_cast<int>(num());
            else throw ParseError("unknown key '" + key + "' in [grid]", lineno);
        } else if (section == "elliptic") {
            if (key == "delta") cfg.elliptic.delta = num();
            else if (key == "tol") cfg.elliptic.tol = num();
            else if (key == "max_iter") cfg.elliptic.max_iter = static_cast<int>(num());
            else if (key == "mean_tol") cfg.elliptic.mean_tol = num();
            else if (key == "div_mean_tol") cfg.elliptic.div_mean_tol = num();
            else if (key == "method") {
                if (value == "auto") cfg.elliptic.method = PoissonMethod::Auto;
                else if (value == "dst") cfg.elliptic.method = PoissonMethod::SineTransform;
                else if (value == "cg") cfg.elliptic.method = PoissonMethod::ConjugateGradient;
                else throw ParseError("method must be auto|dst|cg", lineno);
            } else throw ParseError("unknown key '" + key + "' in [elliptic]", lineno);
        } else if (section == "scheme") {
            if (key == "type") {
                if (value == "free") cfg.scheme.scheme = Scheme::Free;
                else if (value == "constrained") cfg.scheme.scheme = Scheme::Constrained;
                else throw ParseError("type must be free|constrained", lineno);
            } else if (key == "cfl") cfg.scheme.cfl = num();
            else if (key == "t_end") cfg.scheme.t_end = num();
            else if (key == "step_tol") cfg.scheme.step_tol = num();
            else if (key == "step_max_iter") cfg.scheme.step_max_iter = static_cast<int>(num());
            else if (key == "snapshot_every") cfg.scheme.snapshot_every = static_cast<int>(num());
            else if (key == "frozen_flat") cfg.scheme.frozen_flat = flag();
            else throw ParseError("unknown key '" + key + "' in [scheme]", lineno);
        } else if (section == "data") {
            if (key == "family") cfg.data.family = value;
            else if (key == "epsilon") cfg.data.epsilon = num();
            else if (key == "R") cfg.data.R = num();
            else if (key == "phi") cfg.data.phi = flag();
            else if (key == "phidot") cfg.data.phidot = flag();
            else if (key == "omega") cfg.data.omega = flag();
            else if (key == "omegadot") cfg.data.omegadot = flag();
            else if (key == "seed") cfg.data.seed = static_cast<long>(num());
            else throw ParseError("unknown key '" + key + "' in [data]", lineno);
        } else if (section == "output") {
            if (key == "directory") cfg.output.directory = value;
            else if (key == "prefix") cfg.output.prefix = value;
            else throw ParseError("unknown key '" + key + "' in [output]", lineno);
        } else {
            throw ParseError("key outside of any section", lineno);
        }
    }
    cfg.validate();
    return cfg;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("config file not found: " + path);
    return parse_config_text(in);
}

inline std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "[grid]\n"
        << "L = " << cfg.grid.L << "\n"
        << "n = " << cfg.grid.n << "\n\n";
    out << "[elliptic]\n"
        << "delta = " << cfg.elliptic.delta << "\n"
        << "tol = " << cfg.elliptic.tol << "\n"
        << "max_iter = " << cfg.elliptic.max_iter << "\n"
        << "mean_tol = " << cfg.elliptic.mean_tol << "\n"
        << "div_mean_tol = " << cfg.elliptic.div_mean_tol << "\n"
        << "method = "
        << (cfg.elliptic.method == PoissonMethod::ConjugateGradient
                ? "cg"
                : (cfg.elliptic.method == PoissonMethod::SineTransform ? "dst" : "auto"))
        << "\n\n";
    out << "[scheme]\n"
        << "type = " << (cfg.scheme.scheme == Scheme::Free ? "free" : "constrained") << "\n"
        << "cfl = " << cfg.scheme.cfl << "\n"
        << "t_end = " << cfg.scheme.t_end << "\n"
        << "step_tol = " << cfg.scheme.step_tol << "\n"
        << "step_max_iter = " << cfg.scheme.step_max_iter << "\n"
        << "snapshot_every = " << cfg.scheme.snapshot_every << "\n"
        << "frozen_flat = " << (cfg.scheme.frozen_flat ? "on" : "off") << "\n\n";
    out << "[data]\n"
        << "family = " << cfg.data.family << "\n"
        << "epsilon = " << cfg.data.epsilon << "\n"
        << "R = " << cfg.data.R << "\n"
        << "phi = " << (cfg.data.phi ? "on" : "off") << "\n"
        << "phidot = " << (cfg.data.phidot ? "on" : "off") << "\n"
        << "omega = " << (cfg.data.omega ? "on" : "off") << "\n"
        << "omegadot = " << (cfg.data.omegadot ? "on" : "off") << "\n"
        << "seed = " << cfg.data.seed << "\n\n";
    out << "[output]\n"
        << "directory = " << cfg.output.directory << "\n"
        << "prefix = " << cfg.output.prefix << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Free-data library

namespace detail {

inline double radial_bump(double r, double R) {
    const double q = (r / R) * (r / R);
    return q < 1.0 ? std::exp(-1.0 / (1.0 - q)) : 0.0;
}

inline ScalarField bump_at(const GridSpec& g, double amp, double R, double cx, double cy) {
    return ScalarField::sample(g, [=](double x, double y) {
        return amp * radial_bump(std::hypot(x - cx, y - cy), R);
    });
}

} // namespace detail

// Families: "radial" gives epsilon-scaled centered bumps (orthogonality by
// parity); "asymmetric" uses displaced sub-bumps and then projects the
// momentum sources so the two orthogonality integrals vanish; "zero" is
// Minkowski data.
inline FreeData make_free_data(const RunConfig& cfg) {
    const GridSpec& g = cfg.grid;
    FreeData f(g, cfg.data.R);
    const double eps = cfg.data.epsilon;
    const double R = cfg.data.R;
    if (cfg.data.family == "zero" || eps == 0.0) return f;

    if (cfg.data.family == "radial") {
        if (cfg.data.phi) f.phi0 = detail::bump_at(g, eps, R, 0.0, 0.0);
        if (cfg.data.phidot) f.phiDot0 = detail::bump_at(g, eps, R, 0.0, 0.0);
        if (cfg.data.omega) f.omega0 = detail::bump_at(g, eps, R, 0.0, 0.0);
        if (cfg.data.omegadot) f.omegaDot0 = detail::bump_at(g, eps, R, 0.0, 0.0);
        return f;
    }

    // asymmetric: displaced sub-bumps staying inside B_R. The widened support
    // of discrete gradients needs 2 cells of headroom, so the projection
    // directions come from a shrunken auxiliary bump.
    if (R < 5.0 * g.h())
        throw ValidationError("data: the asymmetric family needs R >= 5 h");
    const double r0 = 0.7 * R;
    if (cfg.data.phi) f.phi0 = detail::bump_at(g, eps, r0, 0.1 * R, -0.05 * R);
    if (cfg.data.phidot) f.phiDot0 = detail::bump_at(g, eps, r0, -0.12 * R, 0.08 * R);
    if (cfg.data.omega) f.omega0 = detail::bump_at(g, 0.7 * eps, r0, 0.05 * R, 0.1 * R);
    if (cfg.data.omegadot) f.omegaDot0 = detail::bump_at(g, -0.6 * eps, r0, 0.0, -0.1 * R);

    const double r_aux = std::min(0.8 * R, R - 3.0 * g.h());
    const ScalarField aux = detail::bump_at(g, 1.0, r_aux, 0.0, 0.0);
    const VectorField d = gradient(aux);

    const VectorField gp = gradient(f.phi0);
    const VectorField go = gradient(f.omega0);
    const ScalarField em4p = map_field(f.phi0, [](double u) { return std::exp(-4.0 * u); });
    const bool use_phi = cfg.data.phi;
    // orthogonality integrand weights seen by the adjusted momentum field
    const ScalarField wx = use_phi ? (2.0 * gp.x) : (0.5 * (em4p * go.x));
    const ScalarField wy = use_phi ? (2.0 * gp.y) : (0.5 * (em4p * go.y));
    auto current = check_orthogonality(f);
    const double m00 = integrate(wx * d.x), m01 = integrate(wx * d.y);
    const double m10 = integrate(wy * d.x), m11 = integrate(wy * d.y);
    const double det = m00 * m11 - m01 * m10;
    if (det != 0.0 && (current.first != 0.0 || current.second != 0.0)) {
        const double cx = (-current.first * m11 + current.second * m01) / det;
        const double cy = (current.first * m10 - current.second * m00) / det;
        ScalarField adjust(g);
        axpy(cx, d.x, adjust);
        axpy(cy, d.y, adjust);
        if (use_phi)
            axpy(1.0, adjust, f.phiDot0);
        else
            axpy(1.0, adjust, f.omegaDot0);
    }
    return f;
}

} // namespace u1e
