#pragma once

#include <functional>
#include <span>
#include <vector>

namespace comsgarch {

struct NelderMeadOptions {
    double step_tolerance = 1e-8;   ///< max vertex distance from the best vertex
    double value_tolerance = 1e-10; ///< spread of objective values across the simplex
    int max_evaluations = 2000;
    double initial_step = 0.25;
    int restarts = 1;               ///< fresh simplex around the best point after convergence
    std::vector<double> lower;      ///< optional box, same length as x0 when set
    std::vector<double> upper;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Minimizes f from x0. Non-finite objective values are treated as +inf, so
/// infeasible regions can be signalled by returning infinity. Points outside
/// the box are projected onto it.
[[nodiscard]] NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                                           std::vector<double> x0, const NelderMeadOptions& options = {});

}  // namespace comsgarch
