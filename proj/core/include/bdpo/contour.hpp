#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "bdpo/losses.hpp"

namespace bdpo {

/// Dense evaluation of a loss over a (p_w, p_l) rectangle at a fixed
/// reference point. values is row-major [pl index][pw index]; simplex-masked
/// cells hold NaN and are flagged in mask.
struct ContourGrid {
    std::vector<double> pw_axis;
    std::vector<double> pl_axis;
    std::vector<double> values;
    std::vector<bool> mask;  // true = cell excluded (p_w + p_l > 1)
    LossSpec spec;
    double r_w = 0.0;
    double r_l = 0.0;
    bool mask_simplex = false;

    double value(std::size_t pl_index, std::size_t pw_index) const {
        return values[pl_index * pw_axis.size() + pw_index];
    }
    bool masked(std::size_t pl_index, std::size_t pw_index) const {
        return mask[pl_index * pw_axis.size() + pw_index];
    }
};

struct Interval {
    double lo;
    double hi;
};

ContourGrid evaluate_grid(const LossSpec& spec, std::pair<double, double> ref,
                          Interval pw_range, Interval pl_range,
                          std::pair<std::size_t, std::size_t> resolution,
                          bool mask_simplex);

struct GridMinimum {
    double p_w;
    double p_l;
    double loss;
    std::size_t pw_index;
    std::size_t pl_index;
};

/// Minimal unmasked cell; ties broken toward larger p_w then smaller p_l.
GridMinimum grid_argmin(const ContourGrid& grid);

/// One DPO+NLL grid per alpha, shared axes.
std::vector<ContourGrid> alpha_sweep(std::pair<double, double> ref,
                                     const std::vector<double>& alphas,
                                     double beta, Interval pw_range,
                                     Interval pl_range,
                                     std::pair<std::size_t, std::size_t> resolution,
                                     bool mask_simplex);

}  // namespace bdpo
