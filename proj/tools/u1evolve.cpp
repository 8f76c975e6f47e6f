// Command-line front end for the truncated-plane U(1) evolution solver.
// Subcommands: solve-constraints, evolve, diagnose <snapshot>, convergence,
// plot <dir>. Physics parameters come from the config file; flags carry only
// paths. U1EVOLVE_THREADS caps internal parallelism.

#include "u1e/cli.hpp"

int main(int argc, char** argv) { return u1e::cli::dispatch(argc, argv); }
