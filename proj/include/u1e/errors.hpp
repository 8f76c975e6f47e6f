#pragma once

#include <stdexcept>
#include <string>

namespace u1e {

// Error taxonomy shared by all modules. The CLI maps these onto stable
// exit codes: validation -> 2, solver failures -> 3, CFL/stability -> 4.

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : ValidationError {
    ParseError(const std::string& what, int line)
        : ValidationError(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
    int line_number;
};

struct MissingInput : ValidationError {
    explicit MissingInput(const std::string& what) : ValidationError(what) {}
};

struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

struct NonZeroMean : SolverError {
    NonZeroMean(const std::string& where, double mean)
        : SolverError(where + ": source integral " + std::to_string(mean) +
                      " violates the mean-zero precondition"),
          mean_value(mean) {}
    double mean_value;
};

struct NoConvergence : SolverError {
    NoConvergence(const std::string& where, double residual, int iterations)
        : SolverError(where + ": residual " + std::to_string(residual) + " after " +
                      std::to_string(iterations) + " iterations"),
          final_residual(residual), iterations_used(iterations) {}
    double final_residual;
    int iterations_used;
};

struct FixedPointDiverged : SolverError {
    FixedPointDiverged(const std::string& where, double change, int iterations)
        : SolverError(where + ": fixed point not contracting, change " + std::to_string(change) +
                      " after " + std::to_string(iterations) + " iterations"),
          last_change(change), iterations_used(iterations) {}
    double last_change;
    int iterations_used;
};

struct OrthogonalityViolated : SolverError {
    OrthogonalityViolated(double rx, double ry)
        : SolverError("free data violates the orthogonality condition: (" +
                      std::to_string(rx) + ", " + std::to_string(ry) + ")"),
          residual_x(rx), residual_y(ry) {}
    double residual_x, residual_y;
};

struct LapseCollapse : SolverError {
    explicit LapseCollapse(double min_lapse)
        : SolverError("lapse collapsed: min N = " + std::to_string(min_lapse)),
          min_N(min_lapse) {}
    double min_N;
};

struct CFLViolation : std::runtime_error {
    CFLViolation(double dt, double dt_max)
        : std::runtime_error("dt " + std::to_string(dt) + " exceeds CFL limit " +
                             std::to_string(dt_max)),
          requested_dt(dt), allowed_dt(dt_max) {}
    double requested_dt, allowed_dt;
};

} // namespace u1e
