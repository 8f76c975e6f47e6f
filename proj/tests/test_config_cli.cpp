#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support/oracles.hpp"
#include "u1e/cli.hpp"

using namespace u1e;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("u1e_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(std::initializer_list<const char*> args) {
    std::vector<const char*> argv = {"u1evolve"};
    argv.insert(argv.end(), args.begin(), args.end());
    return cli::dispatch(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_CASE("config: defaults, validation, round trip") {
    std::stringstream empty("");
    RunConfig cfg = parse_config_text(empty);
    CHECK(cfg.grid.L == 16.0);
    CHECK(cfg.grid.n == 257);
    CHECK(cfg.elliptic.delta == -0.5);
    CHECK(cfg.scheme.cfl == 0.25);
    CHECK(cfg.scheme.scheme == Scheme::Free);
    CHECK(cfg.data.epsilon == 0.01);
    CHECK(cfg.data.R == 1.0);

    std::stringstream even_n("[grid]\nn = 128\n");
    CHECK_THROWS_AS(parse_config_text(even_n), ValidationError);

    std::stringstream unknown("[grid]\nwibble = 3\n");
    CHECK_THROWS_AS(parse_config_text(unknown), ParseError);
    try {
        std::stringstream again("\n\n[grid]\nwibble = 3\n");
        parse_config_text(again);
    } catch (const ParseError& e) {
        CHECK(e.line_number == 4);
    }

    std::stringstream bad_delta("[elliptic]\ndelta = 0.5\n");
    CHECK_THROWS_AS(parse_config_text(bad_delta), ValidationError);

    std::stringstream big_R("[data]\nR = 5\n");
    CHECK_THROWS_AS(parse_config_text(big_R), ValidationError);

    // serialize(parse(x)) reparses to an equal config
    std::stringstream custom(
        "[grid]\nL = 8\nn = 65\n[elliptic]\ndelta = -0.4\nmethod = cg\n"
        "[scheme]\ntype = constrained\ncfl = 0.2\nt_end = 0.5\n"
        "[data]\nfamily = asymmetric\nepsilon = 0.02\nseed = 7\n[output]\nprefix = study\n");
    RunConfig c1 = parse_config_text(custom);
    std::stringstream round(serialize_config(c1));
    RunConfig c2 = parse_config_text(round);
    CHECK(serialize_config(c1) == serialize_config(c2));
    CHECK(c2.scheme.scheme == Scheme::Constrained);
    CHECK(c2.data.seed == 7);
    CHECK(c2.elliptic.method == PoissonMethod::ConjugateGradient);
}

TEST_CASE("free data families") {
    RunConfig cfg;
    cfg.grid = GridSpec{8.0, 129};
    cfg.data.epsilon = 0.01;

    cfg.data.family = "zero";
    FreeData z = make_free_data(cfg);
    CHECK(norm_sup(z.phi0) == 0.0);
    z.validate();

    cfg.data.family = "radial";
    FreeData r = make_free_data(cfg);
    r.validate();
    auto ortho_r = check_orthogonality(r);
    CHECK(std::fabs(ortho_r.first) < 1e-12);
    CHECK(std::fabs(ortho_r.second) < 1e-12);
    CHECK(norm_sup(r.phi0) > 0.0);

    cfg.data.family = "asymmetric";
    FreeData a = make_free_data(cfg);
    a.validate();
    auto ortho_a = check_orthogonality(a);
    CHECK(std::fabs(ortho_a.first) < 1e-10);
    CHECK(std::fabs(ortho_a.second) < 1e-10);
    // genuinely asymmetric: odd-moment integrals of phi do not vanish
    CHECK(std::fabs(integrate(a.phi0 * ScalarField::sample(cfg.grid, [](double x, double) { return x; }))) > 1e-12);

    // per-field switches
    cfg.data.family = "radial";
    cfg.data.omega = false;
    cfg.data.omegadot = false;
    FreeData sw = make_free_data(cfg);
    CHECK(norm_sup(sw.omega0) == 0.0);
    CHECK(norm_sup(sw.phi0) > 0.0);
}

TEST_CASE("snapshot round trip is bitwise") {
    GridSpec g{8.0, 65};
    auto chi = chi_cutoff(g);
    EllipticConfig ell;
    RunConfig rc;
    rc.grid = g;
    rc.data.epsilon = 0.01;
    FreeData f = make_free_data(rc);
    InitialDataSet ds = assemble_initial_state(f, chi, ell);

    fs::path dir = temp_dir("snap");
    const std::string p1 = (dir / "a.snap").string();
    const std::string p2 = (dir / "b.snap").string();
    write_snapshot(p1, ds.state, ds.state, 0.015625);
    SnapshotBundle b = read_snapshot(p1);
    CHECK(b.state.t == ds.state.t);
    CHECK(b.dt_prev == 0.015625);
    CHECK(b.state.alpha0 == ds.state.alpha0);
    CHECK(std::memcmp(b.state.phi.v.data(), ds.state.phi.v.data(),
                      sizeof(double) * ds.state.phi.v.size()) == 0);
    CHECK(std::memcmp(b.state.beta.y.v.data(), ds.state.beta.y.v.data(),
                      sizeof(double) * ds.state.beta.y.v.size()) == 0);
    // write -> read -> write reproduces the file byte for byte
    write_snapshot(p2, b.state, b.prev, b.dt_prev);
    CHECK(slurp(p1) == slurp(p2));
    fs::remove_all(dir);
}

TEST_CASE("cli: zero-data end to end, determinism, exit codes") {
    fs::path dir = temp_dir("cli");
    fs::path cfg_path = dir / "zero.ini";
    {
        std::ofstream cfg(cfg_path);
        cfg << "[grid]\nL = 8\nn = 65\n[scheme]\nt_end = 0.25\n[data]\nfamily = zero\n"
            << "[output]\ndirectory = " << (dir / "runA").string() << "\n";
    }
    CHECK(run_cli({"evolve", "--config", cfg_path.c_str()}) == 0);
    CHECK(fs::exists(dir / "runA" / "diagnostics.csv"));
    CHECK(fs::exists(dir / "runA" / "summary.txt"));
    CHECK(fs::exists(dir / "runA" / "run_final.snap"));
    CHECK(fs::exists(dir / "runA" / "run_config.ini"));

    // all residual columns vanish for zero data
    std::ifstream csv(dir / "runA" / "diagnostics.csv");
    std::string header, row, last;
    std::getline(csv, header);
    while (std::getline(csv, row))
        if (!row.empty()) last = row;
    std::stringstream ss(last);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
        ++col;
        if (col >= 2 && col <= 11) CHECK(std::fabs(std::stod(cell)) <= 1e-12);
    }

    // deterministic replay: identical config into a second directory
    CHECK(run_cli({"evolve", "--config", cfg_path.c_str(), "--out", (dir / "runB").string().c_str()}) == 0);
    CHECK(slurp(dir / "runA" / "diagnostics.csv") == slurp(dir / "runB" / "diagnostics.csv"));

    // diagnose on the final snapshot reproduces the last CSV row bitwise
    {
        std::stringstream capture;
        auto* old = std::cout.rdbuf(capture.rdbuf());
        const int rc = run_cli({"diagnose", (dir / "runA" / "run_final.snap").string().c_str()});
        std::cout.rdbuf(old);
        CHECK(rc == 0);
        std::string line1, line2;
        std::stringstream out(capture.str());
        std::getline(out, line1);
        std::getline(out, line2);
        CHECK(line1 == header);
        CHECK(line2 == last);
    }

    // plot script emission
    CHECK(run_cli({"plot", (dir / "runA").string().c_str()}) == 0);
    CHECK(fs::exists(dir / "runA" / "plot_diagnostics.gp"));
    CHECK(run_cli({"plot", (dir / "empty_nowhere").string().c_str()}) == 2);

    // exit codes: validation error -> 2
    fs::path bad_path = dir / "bad.ini";
    {
        std::ofstream bad(bad_path);
        bad << "[grid]\nn = 64\n";
    }
    CHECK(run_cli({"evolve", "--config", bad_path.c_str()}) == 2);
    CHECK(run_cli({"diagnose"}) == 2);
    fs::remove_all(dir);
}

TEST_CASE("cli: constraints subcommand writes report") {
    fs::path dir = temp_dir("cons");
    fs::path cfg_path = dir / "c.ini";
    {
        std::ofstream cfg(cfg_path);
        cfg << "[grid]\nL = 8\nn = 65\n[data]\nfamily = radial\nepsilon = 0.01\n"
            << "[output]\ndirectory = " << (dir / "out").string() << "\n";
    }
    CHECK(run_cli({"solve-constraints", "--config", cfg_path.c_str()}) == 0);
    CHECK(fs::exists(dir / "out" / "constraints_report.csv"));
    CHECK(fs::exists(dir / "out" / "run_initial.snap"));
    std::ifstream csv(dir / "out" / "constraints_report.csv");
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    CHECK(header.substr(0, 8) == "alpha,Na");
    CHECK(!row.empty());
    // alpha positive for nonzero data
    CHECK(std::stod(row.substr(0, row.find(','))) > 0.0);
    fs::remove_all(dir);
}

TEST_CASE("cli: convergence study emits orders") {
    fs::path dir = temp_dir("conv");
    fs::path cfg_path = dir / "c.ini";
    {
        std::ofstream cfg(cfg_path);
        cfg << "[grid]\nL = 8\nn = 33\n[scheme]\nt_end = 0.125\n"
            << "[data]\nfamily = radial\nepsilon = 0.01\nR = 1.5\n"
            << "[output]\ndirectory = " << (dir / "study").string() << "\n";
    }
    CHECK(run_cli({"convergence", "--config", cfg_path.c_str(), "--levels", "2"}) == 0);
    CHECK(fs::exists(dir / "study" / "convergence.csv"));
    CHECK(fs::exists(dir / "study" / "level0" / "diagnostics.csv"));
    CHECK(fs::exists(dir / "study" / "level1" / "diagnostics.csv"));
    std::ifstream csv(dir / "study" / "convergence.csv");
    std::string header, r0, r1;
    std::getline(csv, header);
    std::getline(csv, r0);
    std::getline(csv, r1);
    CHECK(r0.substr(0, 3) == "33,");
    CHECK(r1.substr(0, 3) == "65,");
    fs::remove_all(dir);
}
