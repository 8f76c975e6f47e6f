#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "state.hpp"

namespace u1e {

// Text snapshot: one header line
//   U1EVOLVE 1 n=<n> L=<L> t=<t> fields=<comma-list>
// followed per field by n rows of n whitespace-separated decimals (row-major,
// y-outer). Values are written with 17 significant digits so a reload is
// bitwise exact; the previous accepted state rides along so diagnostics can
// be recomputed reproducibly from the file alone.

struct SnapshotBundle {
    StateVector state;
    StateVector prev;
    double dt_prev = 0.0;
};

namespace detail {

inline std::vector<std::pair<std::string, const ScalarField*>> snapshot_fields(
    const StateVector& s, const StateVector& prev) {
    return {
        {"phi", &s.phi},           {"Pphi", &s.Pphi},
        {"omega", &s.omega},       {"Pomega", &s.Pomega},
        {"gamma_tilde", &s.gamma.tilde}, {"Pgamma", &s.Pgamma},
        {"Hxx", &s.H.xx},          {"Hxy", &s.H.xy},
        {"Hyy", &s.H.yy},          {"N_tilde", &s.N.tilde},
        {"beta_x", &s.beta.x},     {"beta_y", &s.beta.y},
        {"tau", &s.tau},
        {"prev_phi", &prev.phi},   {"prev_Pphi", &prev.Pphi},
        {"prev_omega", &prev.omega}, {"prev_Pomega", &prev.Pomega},
        {"prev_gamma_tilde", &prev.gamma.tilde}, {"prev_Pgamma", &prev.Pgamma},
        {"prev_Hxx", &prev.H.xx},  {"prev_Hxy", &prev.H.xy},
        {"prev_Hyy", &prev.H.yy},  {"prev_N_tilde", &prev.N.tilde},
        {"prev_beta_x", &prev.beta.x}, {"prev_beta_y", &prev.beta.y},
        {"prev_tau", &prev.tau},
    };
}

} // namespace detail

inline void write_snapshot(const std::string& path, const StateVector& s, const StateVector& prev,
                           double dt_prev) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw MissingInput("cannot open snapshot for writing: " + path);
    const GridSpec& g = s.grid();
    auto fields = detail::snapshot_fields(s, prev);
    std::string names;
    for (const auto& f : fields) {
        names += f.first;
        names += ',';
    }
    names += "consts";
    std::fprintf(fp, "U1EVOLVE 1 n=%d L=%.17g t=%.17g fields=%s\n", g.n, g.L, s.t, names.c_str());
    for (const auto& f : fields) {
        for (int iy = 0; iy < g.n; ++iy) {
            for (int ix = 0; ix < g.n; ++ix)
                std::fprintf(fp, "%.17g%c", f.second->at(ix, iy), ix + 1 == g.n ? '\n' : ' ');
        }
    }
    // scalar bookkeeping packed into one more field row block
    ScalarField consts(g);
    consts.at(0, 0) = s.gamma.log_coeff;
    consts.at(1, 0) = s.N.log_coeff;
    consts.at(2, 0) = s.alpha0;
    consts.at(3, 0) = dt_prev;
    consts.at(4, 0) = prev.gamma.log_coeff;
    consts.at(5, 0) = prev.N.log_coeff;
    consts.at(6, 0) = prev.t;
    for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix)
            std::fprintf(fp, "%.17g%c", consts.at(ix, iy), ix + 1 == g.n ? '\n' : ' ');
    std::fclose(fp);
}

inline SnapshotBundle read_snapshot(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("cannot open snapshot: " + path);
    std::string header;
    std::getline(in, header);
    int n = 0;
    double L = 0.0, t = 0.0;
    char namebuf[2048] = {0};
    if (std::sscanf(header.c_str(), "U1EVOLVE 1 n=%d L=%lf t=%lf fields=%2047s", &n, &L, &t,
                    namebuf) != 4)
        throw ParseError("snapshot: bad header '" + header + "'", 1);
    GridSpec g{L, n};
    g.validate();
    auto chi = chi_cutoff(g);

    SnapshotBundle b{StateVector(g, chi), StateVector(g, chi), 0.0};
    b.state.t = t;

    std::vector<std::string> names;
    {
        std::stringstream ss(namebuf);
        std::string cell;
        while (std::getline(ss, cell, ','))
            if (!cell.empty()) names.push_back(cell);
    }
    auto writable = detail::snapshot_fields(b.state, b.prev);
    for (const std::string& name : names) {
        ScalarField tmp(g);
        for (int iy = 0; iy < g.n; ++iy)
            for (int ix = 0; ix < g.n; ++ix)
                if (!(in >> tmp.at(ix, iy)))
                    throw ParseError("snapshot: truncated field " + name, 0);
        if (name == "consts") {
            b.state.gamma.log_coeff = tmp.at(0, 0);
            b.state.N.log_coeff = tmp.at(1, 0);
            b.state.alpha0 = tmp.at(2, 0);
            b.dt_prev = tmp.at(3, 0);
            b.prev.gamma.log_coeff = tmp.at(4, 0);
            b.prev.N.log_coeff = tmp.at(5, 0);
            b.prev.t = tmp.at(6, 0);
            b.prev.alpha0 = b.state.alpha0;
            continue;
        }
        bool matched = false;
        for (auto& w : writable)
            if (w.first == name) {
                *const_cast<ScalarField*>(w.second) = std::move(tmp);
                matched = true;
                break;
            }
        if (!matched) throw ParseError("snapshot: unknown field " + name, 0);
    }
    b.state.H.traceless = true;
    b.prev.H.traceless = true;
    return b;
}

} // namespace u1e
