#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "config.hpp"
#include "diagnostics.hpp"
#include "evolution.hpp"
#include "snapshot.hpp"

namespace u1e::cli {

namespace fs = std::filesystem;

inline RunConfig load_config(const std::string& path) {
    if (path.empty()) {
        RunConfig cfg;
        cfg.validate();
        return cfg;
    }
    return parse_config(path);
}

inline fs::path prepare_run_dir(RunConfig& cfg, const std::string& out_override) {
    if (!out_override.empty()) cfg.output.directory = out_override;
    fs::path dir(cfg.output.directory);
    fs::create_directories(dir);
    // the resolved configuration makes the run directory self-describing
    std::ofstream out(dir / (cfg.output.prefix + "_config.ini"));
    out << serialize_config(cfg);
    return dir;
}

inline DiagnosticsSettings diag_settings(const RunConfig& cfg) {
    DiagnosticsSettings d;
    d.delta = cfg.elliptic.delta;
    d.delta_prime = cfg.delta_prime();
    return d;
}

inline void write_constraints_report(const fs::path& dir, const RunConfig& cfg,
                                     const InitialDataSet& ds) {
    std::ofstream out(dir / "constraints_report.csv");
    const auto norms = sobolev_report(ds.state, diag_settings(cfg));
    out << "alpha,Na,ortho_x,ortho_y,momentum_residual_sup,momentum_residual_l2,"
           "hamiltonian_residual_sup,lapse_residual_sup,killing_residual_sup,cl1_x,cl1_y,"
           "cl2_residual,min_N,hamiltonian_iterations,lapse_iterations";
    for (const auto& kv : norms) out << ",norm_" << kv.first;
    out << "\n";
    char buf[64];
    auto put = [&](double v, bool first = false) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        if (!first) out << ",";
        out << buf;
    };
    const ConstraintReport& r = ds.report;
    put(r.alpha, true);
    put(r.Na);
    put(r.ortho_x);
    put(r.ortho_y);
    put(r.momentum_residual_sup);
    put(r.momentum_residual_l2);
    put(r.hamiltonian_residual_sup);
    put(r.lapse_residual_sup);
    put(r.killing_residual_sup);
    put(r.cl1_x);
    put(r.cl1_y);
    put(r.cl2_residual);
    put(r.min_N);
    out << "," << r.hamiltonian_iterations << "," << r.lapse_iterations;
    for (const auto& kv : norms) put(kv.second);
    out << "\n";
}

inline int cmd_solve_constraints(RunConfig cfg, const std::string& out_override) {
    fs::path dir = prepare_run_dir(cfg, out_override);
    auto chi = chi_cutoff(cfg.grid);
    FreeData free = make_free_data(cfg);
    InitialDataSet ds = assemble_initial_state(free, chi, cfg.elliptic);
    write_constraints_report(dir, cfg, ds);
    write_snapshot((dir / (cfg.output.prefix + "_initial.snap")).string(), ds.state, ds.state, 0.0);
    std::cout << "constraints solved: alpha=" << ds.report.alpha << " Na=" << ds.report.Na
              << " killing_residual=" << ds.report.killing_residual_sup << "\n";
    return 0;
}

struct EvolveArtifacts {
    RunSummary summary;
    std::vector<DiagnosticsRecord> records;
};

inline EvolveArtifacts evolve_to_files(RunConfig& cfg, const fs::path& dir) {
    auto chi = chi_cutoff(cfg.grid);
    FreeData free = make_free_data(cfg);
    InitialDataSet ds = assemble_initial_state(free, chi, cfg.elliptic);
    StateVector s = ds.state;

    std::ofstream csv(dir / "diagnostics.csv");
    csv << diagnostics_csv_header() << "\n";
    const DiagnosticsSettings dcfg = diag_settings(cfg);

    EvolveArtifacts art;
    int snap_index = 0;
    RunSinks sinks;
    sinks.on_step = [&](const StateVector& st, const StateVector& prev, double dt) {
        DiagnosticsRecord r = compute_diagnostics(st, prev, dt, dcfg);
        art.records.push_back(r);
        csv << diagnostics_csv_row(r) << "\n";
    };
    sinks.on_snapshot = [&](const StateVector& st, const StateVector& prev, double dt) {
        char name[64];
        std::snprintf(name, sizeof name, "_step%06d.snap", snap_index++);
        write_snapshot((dir / (cfg.output.prefix + name)).string(), st, prev, dt);
    };

    const auto t0 = std::chrono::steady_clock::now();
    StateVector prev_final = s;
    double dt_final = 0.0;
    {
        // track the final (state, prev, dt) for the closing snapshot
        auto wrapped = sinks.on_step;
        sinks.on_step = [&](const StateVector& st, const StateVector& prev, double dt) {
            wrapped(st, prev, dt);
            prev_final = prev;
            dt_final = dt;
        };
        art.summary = run(s, cfg.scheme, cfg.elliptic, sinks);
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_snapshot((dir / (cfg.output.prefix + "_final.snap")).string(), s, prev_final, dt_final);

    std::ofstream summary(dir / "summary.txt");
    summary.precision(12);
    const DiagnosticsRecord& first = art.records.front();
    const DiagnosticsRecord& last = art.records.back();
    summary << "status: " << art.summary.status << "\n"
            << "steps: " << art.summary.steps << "\n"
            << "final_time: " << art.summary.final_time << "\n"
            << "wall_seconds: " << seconds << "\n"
            << "tau_sup_final: " << last.tau_sup << "\n"
            << "cl1_drift: " << std::fabs(last.cl1_x - first.cl1_x) + std::fabs(last.cl1_y - first.cl1_y)
            << "\n"
            << "cl2_residual_final: " << last.cl2_residual << "\n"
            << "A_l2_final: " << last.A_l2 << "\n"
            << "e0tau_l2_final: " << last.e0tau_l2 << "\n"
            << "E3_initial: " << first.E3 << "\n"
            << "E3_final: " << last.E3 << "\n"
            << "min_N: " << last.min_N << "\n";
    return art;
}

inline int cmd_evolve(RunConfig cfg, const std::string& out_override) {
    fs::path dir = prepare_run_dir(cfg, out_override);
    EvolveArtifacts art = evolve_to_files(cfg, dir);
    std::cout << "evolved " << art.summary.steps << " steps to t=" << art.summary.final_time
              << "; diagnostics in " << (dir / "diagnostics.csv").string() << "\n";
    return 0;
}

inline int cmd_diagnose(const std::string& snapshot_path) {
    SnapshotBundle b = read_snapshot(snapshot_path);
    DiagnosticsSettings dcfg; // defaults; norms use the default weights
    DiagnosticsRecord r = compute_diagnostics(b.state, b.prev, b.dt_prev, dcfg);
    std::cout << diagnostics_csv_header() << "\n" << diagnostics_csv_row(r) << "\n";
    return 0;
}

inline int cmd_convergence(RunConfig cfg, const std::string& out_override, int levels) {
    if (levels < 2) throw ValidationError("convergence: need at least 2 levels");
    fs::path dir = prepare_run_dir(cfg, out_override);

    struct LevelResult {
        int n;
        double h;
        DiagnosticsRecord first, last;
    };
    std::vector<LevelResult> results;
    for (int k = 0; k < levels; ++k) {
        RunConfig lv = cfg;
        lv.grid.n = ((cfg.grid.n - 1) << k) + 1;
        lv.output.directory = (dir / ("level" + std::to_string(k))).string();
        fs::path ldir = prepare_run_dir(lv, "");
        EvolveArtifacts art = evolve_to_files(lv, ldir);
        results.push_back({lv.grid.n, lv.grid.h(), art.records.front(), art.records.back()});
    }

    std::ofstream csv(dir / "convergence.csv");
    csv << "n,h,tau_sup,A_l2,e0tau_l2,cl1_drift,cl2_res,order_tau,order_A,order_e0tau,"
           "order_cl1,order_cl2\n";
    char buf[64];
    auto cell = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    auto drift = [](const LevelResult& r) {
        return std::fabs(r.last.cl1_x - r.first.cl1_x) + std::fabs(r.last.cl1_y - r.first.cl1_y);
    };
    for (size_t k = 0; k < results.size(); ++k) {
        const LevelResult& r = results[k];
        csv << r.n << "," << cell(r.h) << "," << cell(r.last.tau_sup) << "," << cell(r.last.A_l2)
            << "," << cell(r.last.e0tau_l2) << "," << cell(drift(r)) << ","
            << cell(r.last.cl2_residual);
        if (k == 0) {
            csv << ",,,,,\n";
            continue;
        }
        const LevelResult& p = results[k - 1];
        auto order = [&](double coarse, double fine) {
            return (coarse > 0 && fine > 0) ? std::log2(coarse / fine) : 0.0;
        };
        csv << "," << cell(order(p.last.tau_sup, r.last.tau_sup)) << ","
            << cell(order(p.last.A_l2, r.last.A_l2)) << ","
            << cell(order(p.last.e0tau_l2, r.last.e0tau_l2)) << ","
            << cell(order(drift(p), drift(r))) << ","
            << cell(order(std::fabs(p.last.cl2_residual), std::fabs(r.last.cl2_residual))) << "\n";
    }
    std::cout << "convergence study written to " << (dir / "convergence.csv").string() << "\n";
    return 0;
}

inline int cmd_plot(const std::string& dir_str) {
    fs::path dir(dir_str);
    bool found = false;
    if (fs::exists(dir / "diagnostics.csv")) {
        found = true;
        std::ofstream gp(dir / "plot_diagnostics.gp");
        gp << "# gnuplot script: time series of every diagnostics column\n"
           << "set datafile separator ','\n"
           << "set key autotitle columnhead\n"
           << "set terminal pngcairo size 900,600\n"
           << "set logscale y\n"
           << "set xlabel 't'\n"
           << "ncols = " << 23 << "\n"
           << "do for [c=2:ncols] {\n"
           << "  set output sprintf('diagnostics_col%02d.png', c)\n"
           << "  plot 'diagnostics.csv' using 1:(abs(column(c)) + 1e-300) with lines\n"
           << "}\n";
    }
    std::vector<fs::path> snaps;
    if (fs::exists(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".snap") snaps.push_back(e.path());
    for (const fs::path& snap : snaps) {
        found = true;
        std::ifstream in(snap);
        std::string header;
        std::getline(in, header);
        int n = 0;
        double L = 0, t = 0;
        char namebuf[2048] = {0};
        if (std::sscanf(header.c_str(), "U1EVOLVE 1 n=%d L=%lf t=%lf fields=%2047s", &n, &L, &t,
                        namebuf) != 4)
            continue;
        std::string names(namebuf);
        for (char& c : names)
            if (c == ',') c = ' ';
        std::ofstream gp(dir / ("plot_" + snap.stem().string() + ".gp"));
        gp << "# gnuplot script: heatmaps of the snapshot fields\n"
           << "set terminal pngcairo size 800,700\n"
           << "set view map\n"
           << "set size square\n"
           << "fields = \"" << names << "\"\n"
           << "n = " << n << "\n"
           << "do for [k=1:words(fields)] {\n"
           << "  set output sprintf('" << snap.stem().string() << "_%s.png', word(fields, k))\n"
           << "  plot '" << snap.filename().string() << "' matrix skip (1+(k-1)*n) every :::0::(n-1) with image notitle\n"
           << "}\n";
    }
    if (!found) throw MissingInput("plot: no diagnostics.csv or snapshots in " + dir_str);
    std::cout << "plot scripts written to " << dir_str << "\n";
    return 0;
}

inline int dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        if (args.empty()) {
            std::cerr << "usage: u1evolve <solve-constraints|evolve|diagnose|convergence|plot> "
                         "[--config FILE] [--out DIR] [--levels K] [path]\n";
            return 2;
        }
        const std::string cmd = args[0];
        std::string config_path, out_dir, positional;
        int levels = 3;
        for (size_t i = 1; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) config_path = args[++i];
            else if (args[i] == "--out" && i + 1 < args.size()) out_dir = args[++i];
            else if (args[i] == "--levels" && i + 1 < args.size()) levels = std::stoi(args[++i]);
            else if (!args[i].empty() && args[i][0] != '-') positional = args[i];
            else throw ValidationError("unknown option " + args[i]);
        }

        if (cmd == "solve-constraints") return cmd_solve_constraints(load_config(config_path), out_dir);
        if (cmd == "evolve") return cmd_evolve(load_config(config_path), out_dir);
        if (cmd == "diagnose") {
            if (positional.empty()) throw ValidationError("diagnose: snapshot path required");
            return cmd_diagnose(positional);
        }
        if (cmd == "convergence") return cmd_convergence(load_config(config_path), out_dir, levels);
        if (cmd == "plot") {
            if (positional.empty()) throw ValidationError("plot: directory required");
            return cmd_plot(positional);
        }
        std::cerr << "unknown command: " << cmd << "\n";
        return 2;
    } catch (const CFLViolation& e) {
        std::cerr << "stability abort: " << e.what() << "\n";
        return 4;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace u1e::cli
