#pragma once

#include <functional>
#include <span>
#include <vector>

namespace fflab::optimize {

struct NelderMeadOptions {
    double f_tol = 1e-8;       // spread of objective values across the simplex
    double x_tol = 1e-6;       // simplex diameter (max vertex distance from the best vertex)
    int max_iterations = 5000;
    double initial_step = 0.25;
    bool record_trace = false;  // keep best value after every iteration
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::vector<double> trace;
};

using Objective = std::function<double(std::span<const double>)>;

/**
 * @brief Derivative-free simplex minimization.
 *
 * Non-finite objective values are replaced by a large penalty so the
 * simplex ordering stays well defined. Stops when both the spread of
 * objective values and the simplex diameter fall below tolerance.
 */
[[nodiscard]] NelderMeadResult nelder_mead(const Objective& f, std::vector<double> start,
                                           const NelderMeadOptions& options = {});

inline constexpr double kPenalty = 1e100;

}  // namespace fflab::optimize
