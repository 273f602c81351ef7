#include "comsgarch/optimizer.hpp"

#include "comsgarch/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace comsgarch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Simplex {
    std::vector<std::vector<double>> x;
    std::vector<double> f;
};

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const NelderMeadOptions& opt) {
    const std::size_t dim = x0.size();
    if (dim == 0) throw ValidationError("nelder_mead needs at least one coordinate");
    const bool boxed = !opt.lower.empty();
    if (boxed && (opt.lower.size() != dim || opt.upper.size() != dim))
        throw ValidationError("optimizer bounds must match the dimension");

    int evals = 0;
    auto project = [&](std::vector<double>& p) {
        if (!boxed) return;
        for (std::size_t i = 0; i < dim; ++i) p[i] = std::clamp(p[i], opt.lower[i], opt.upper[i]);
    };
    auto eval = [&](std::vector<double>& p) {
        project(p);
        ++evals;
        const double v = f(p);
        return std::isfinite(v) ? v : kInf;
    };

    NelderMeadResult best;
    best.x = x0;
    project(best.x);
    best.value = eval(best.x);

    for (int round = 0; round <= opt.restarts && evals < opt.max_evaluations; ++round) {
        Simplex s;
        s.x.assign(dim + 1, best.x);
        s.f.assign(dim + 1, best.value);
        for (std::size_t i = 0; i < dim; ++i) {
            auto& v = s.x[i + 1];
            v[i] += opt.initial_step;
            if (boxed && v[i] > opt.upper[i]) v[i] = best.x[i] - opt.initial_step;
            s.f[i + 1] = eval(v);
        }

        std::vector<std::size_t> order(dim + 1);
        std::vector<double> centroid(dim), xr(dim), xe(dim), xc(dim);
        bool converged = false;
        while (evals < opt.max_evaluations) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.f[a] < s.f[b]; });
            const std::size_t ib = order.front(), iw = order.back(), isw = order[dim - 1];

            double size = 0.0;
            for (std::size_t v = 0; v <= dim; ++v)
                for (std::size_t i = 0; i < dim; ++i) size = std::max(size, std::abs(s.x[v][i] - s.x[ib][i]));
            const double spread = s.f[iw] - s.f[ib];
            if (size <= opt.step_tolerance || (std::isfinite(spread) && spread <= opt.value_tolerance && size <= 1e-4)) {
                converged = true;
                break;
            }

            std::fill(centroid.begin(), centroid.end(), 0.0);
            for (std::size_t v = 0; v <= dim; ++v)
                if (v != iw)
                    for (std::size_t i = 0; i < dim; ++i) centroid[i] += s.x[v][i] / static_cast<double>(dim);

            for (std::size_t i = 0; i < dim; ++i) xr[i] = centroid[i] + (centroid[i] - s.x[iw][i]);
            const double fr = eval(xr);
            if (fr < s.f[ib]) {
                for (std::size_t i = 0; i < dim; ++i) xe[i] = centroid[i] + 2.0 * (xr[i] - centroid[i]);
                const double fe = eval(xe);
                if (fe < fr) {
                    s.x[iw] = xe;
                    s.f[iw] = fe;
                } else {
                    s.x[iw] = xr;
                    s.f[iw] = fr;
                }
                continue;
            }
            if (fr < s.f[isw]) {
                s.x[iw] = xr;
                s.f[iw] = fr;
                continue;
            }
            const bool outside = fr < s.f[iw];
            for (std::size_t i = 0; i < dim; ++i)
                xc[i] = outside ? centroid[i] + 0.5 * (xr[i] - centroid[i]) : centroid[i] + 0.5 * (s.x[iw][i] - centroid[i]);
            const double fc = eval(xc);
            if (fc < (outside ? fr : s.f[iw])) {
                s.x[iw] = xc;
                s.f[iw] = fc;
                continue;
            }
            // shrink toward the best vertex
            for (std::size_t v = 0; v <= dim; ++v) {
                if (v == ib) continue;
                for (std::size_t i = 0; i < dim; ++i) s.x[v][i] = s.x[ib][i] + 0.5 * (s.x[v][i] - s.x[ib][i]);
                s.f[v] = eval(s.x[v]);
            }
        }

        const auto it = std::min_element(s.f.begin(), s.f.end());
        const auto ib = static_cast<std::size_t>(it - s.f.begin());
        if (s.f[ib] <= best.value) {
            best.value = s.f[ib];
            best.x = s.x[ib];
        }
        best.converged = converged;
    }
    best.evaluations = evals;
    return best;
}

}  // namespace comsgarch
