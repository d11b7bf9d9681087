#include "fflab/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fflab::optimize {

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> start, const NelderMeadOptions& options) {
    const std::size_t dim = start.size();
    if (dim == 0) throw std::invalid_argument("nelder_mead: empty starting point");

    NelderMeadResult result;
    const auto eval = [&](const std::vector<double>& x) {
        ++result.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : kPenalty;
    };

    std::vector<std::vector<double>> simplex(dim + 1, start);
    std::vector<double> values(dim + 1);
    for (std::size_t i = 0; i < dim; ++i) simplex[i + 1][i] += options.initial_step;
    for (std::size_t i = 0; i <= dim; ++i) values[i] = eval(simplex[i]);

    std::vector<std::size_t> order(dim + 1);
    std::vector<double> centroid(dim);
    std::vector<double> trial(dim);
    std::vector<double> trial2(dim);

    const auto move = [&](std::vector<double>& out, const std::vector<double>& worst, double coef) {
        for (std::size_t j = 0; j < dim; ++j) out[j] = centroid[j] + coef * (worst[j] - centroid[j]);
    };

    while (true) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second_worst = order[dim - 1];
        if (options.record_trace) result.trace.push_back(values[best]);

        double diameter = 0.0;
        for (std::size_t i = 0; i <= dim; ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) d2 += std::pow(simplex[i][j] - simplex[best][j], 2);
            diameter = std::max(diameter, std::sqrt(d2));
        }
        if (values[worst] - values[best] < options.f_tol && diameter < options.x_tol) {
            result.converged = true;
            break;
        }
        if (result.iterations >= options.max_iterations) break;
        ++result.iterations;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= dim; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < dim; ++j) centroid[j] += simplex[i][j];
        }
        for (auto& c : centroid) c /= static_cast<double>(dim);

        move(trial, simplex[worst], -1.0);
        const double reflected = eval(trial);
        if (reflected < values[best]) {
            move(trial2, simplex[worst], -2.0);
            const double expanded = eval(trial2);
            if (expanded < reflected) {
                simplex[worst] = trial2;
                values[worst] = expanded;
            } else {
                simplex[worst] = trial;
                values[worst] = reflected;
            }
            continue;
        }
        if (reflected < values[second_worst]) {
            simplex[worst] = trial;
            values[worst] = reflected;
            continue;
        }
        // Contraction, outside if the reflection improved on the worst vertex.
        const bool outside = reflected < values[worst];
        move(trial2, simplex[worst], outside ? -0.5 : 0.5);
        const double contracted = eval(trial2);
        if (contracted < (outside ? reflected : values[worst])) {
            simplex[worst] = trial2;
            values[worst] = contracted;
            continue;
        }
        // Shrink towards the best vertex.
        for (std::size_t i = 0; i <= dim; ++i) {
            if (i == best) continue;
            for (std::size_t j = 0; j < dim; ++j) simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
            values[i] = eval(simplex[i]);
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    result.x = simplex[best];
    result.value = values[best];
    return result;
}

}  // namespace fflab::optimize
