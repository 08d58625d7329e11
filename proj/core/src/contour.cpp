#include "bdpo/contour.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bdpo {

namespace {

std::vector<double> linspace(Interval range, std::size_t n) {
    if (n < 2) throw std::invalid_argument("grid resolution must be >= 2");
    if (!(range.lo < range.hi))
        throw std::invalid_argument("grid range must be non-degenerate");
    std::vector<double> axis(n);
    const double step = (range.hi - range.lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        axis[i] = range.lo + step * static_cast<double>(i);
    return axis;
}

}  // namespace

ContourGrid evaluate_grid(const LossSpec& spec, std::pair<double, double> ref,
                          Interval pw_range, Interval pl_range,
                          std::pair<std::size_t, std::size_t> resolution,
                          bool mask_simplex) {
    spec.validate();
    if (!(ref.first > 0.0 && ref.second > 0.0))
        throw std::invalid_argument("evaluate_grid: reference probabilities must be > 0");
    if (!(pw_range.lo > 0.0))
        throw std::invalid_argument("evaluate_grid: p_w range must exclude 0 for " +
                                    to_string(spec.kind));
    if (spec.kind != LossKind::Bdpo && !(pl_range.lo > 0.0))
        throw std::invalid_argument("evaluate_grid: " + to_string(spec.kind) +
                                    " requires p_l > 0; raise the p_l range minimum");
    if (pl_range.lo < 0.0)
        throw std::invalid_argument("evaluate_grid: p_l range must be within [0,1]");
    if (pw_range.hi > 1.0 || pl_range.hi > 1.0)
        throw std::invalid_argument("evaluate_grid: ranges must be within [0,1]");

    ContourGrid grid;
    grid.spec = spec;
    grid.r_w = ref.first;
    grid.r_l = ref.second;
    grid.mask_simplex = mask_simplex;
    grid.pw_axis = linspace(pw_range, resolution.first);
    grid.pl_axis = linspace(pl_range, resolution.second);
    grid.values.resize(grid.pw_axis.size() * grid.pl_axis.size());
    grid.mask.assign(grid.values.size(), false);

    for (std::size_t i = 0; i < grid.pl_axis.size(); ++i) {
        for (std::size_t j = 0; j < grid.pw_axis.size(); ++j) {
            const std::size_t idx = i * grid.pw_axis.size() + j;
            const double pw = grid.pw_axis[j];
            const double pl = grid.pl_axis[i];
            if (mask_simplex && pw + pl > 1.0) {
                grid.values[idx] = std::numeric_limits<double>::quiet_NaN();
                grid.mask[idx] = true;
                continue;
            }
            grid.values[idx] = loss({pw, pl, ref.first, ref.second}, spec);
        }
    }
    return grid;
}

GridMinimum grid_argmin(const ContourGrid& grid) {
    bool found = false;
    GridMinimum best{0.0, 0.0, std::numeric_limits<double>::infinity(), 0, 0};
    for (std::size_t i = 0; i < grid.pl_axis.size(); ++i) {
        for (std::size_t j = 0; j < grid.pw_axis.size(); ++j) {
            if (grid.masked(i, j)) continue;
            const double v = grid.value(i, j);
            bool better = !found || v < best.loss;
            if (!better && v == best.loss) {
                // Ties toward larger p_w, then smaller p_l.
                better = grid.pw_axis[j] > best.p_w ||
                         (grid.pw_axis[j] == best.p_w && grid.pl_axis[i] < best.p_l);
            }
            if (better) {
                best = {grid.pw_axis[j], grid.pl_axis[i], v, j, i};
                found = true;
            }
        }
    }
    if (!found) throw std::runtime_error("grid_argmin: fully masked grid");
    return best;
}

std::vector<ContourGrid> alpha_sweep(std::pair<double, double> ref,
                                     const std::vector<double>& alphas,
                                     double beta, Interval pw_range,
                                     Interval pl_range,
                                     std::pair<std::size_t, std::size_t> resolution,
                                     bool mask_simplex) {
    if (alphas.empty()) throw std::invalid_argument("alpha_sweep: empty alpha list");
    std::vector<ContourGrid> grids;
    grids.reserve(alphas.size());
    for (double alpha : alphas)
        grids.push_back(evaluate_grid(LossSpec::dpo_nll(beta, alpha), ref, pw_range,
                                      pl_range, resolution, mask_simplex));
    return grids;
}

}  // namespace bdpo
