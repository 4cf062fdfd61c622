#pragma once

#include <array>
#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

namespace leqmod {

struct ParcellationScale {
    int level = 0;               ///< 1-based scale index before any dropping
    std::size_t sub_size = 0;    ///< sub-volume edge
    std::size_t stride = 0;
    std::vector<std::size_t> positions; ///< per-axis origins, identical on all axes
    double mu = 0.0;

    std::size_t count() const noexcept { return positions.size() * positions.size() * positions.size(); }
};

struct ParcellationPlan {
    std::size_t patch_size = 0;
    std::vector<ParcellationScale> scales;
};

inline constexpr std::array<double, 4> kDefaultScaleWeights{0.03, 0.07, 0.15, 0.75};

/// Four scales with edges floor(patch/2^l) and strides half the edge. Scales
/// whose edge falls below 2 are dropped and the remaining weights rescaled
/// to the original total.
ParcellationPlan build_parcellation(std::size_t patch_size, std::array<double, 4> mu = kDefaultScaleWeights);

struct ScaleSpec {
    std::size_t sub_size = 0;
    std::size_t stride = 0;
    double mu = 0.0;
};

/// Plan with explicitly chosen scales, origins still flush-augmented.
ParcellationPlan custom_parcellation(std::size_t patch_size, std::span<const ScaleSpec> scales);

void write_plan(const ParcellationPlan& plan, std::ostream& out);

struct QuLossResult {
    double value = 0.0;
    std::vector<double> grad;
    std::vector<double> per_scale;
};

/// Multiscale mean/max consistency loss over every sub-volume of the plan.
/// Means come from a summed-area table of the difference, maxima from
/// separable monotone-queue sliding maxima, so cost is linear in voxels per
/// scale.
QuLossResult qu_loss(std::span<const double> den, std::span<const double> hc, const ParcellationPlan& plan);

/// Literal nested-loop evaluation; test oracle for `qu_loss`.
double qu_loss_bruteforce(std::span<const double> den, std::span<const double> hc, const ParcellationPlan& plan);

} // namespace leqmod
