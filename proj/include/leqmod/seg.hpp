#pragma once

#include "leqmod/phantom.hpp"
#include "leqmod/probmap.hpp"
#include "leqmod/volume.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace leqmod {

/// Source of lesion probability maps. Implementations may use the subject's
/// ground truth, the image, or both.
class ProbMapProvider {
public:
    virtual ~ProbMapProvider() = default;
    virtual LesionProbMap probmap(const Subject& subject, const Volume& image) const = 0;
    virtual std::string name() const = 0;
};

/// Phantom truth, optionally blurred for soft boundaries.
LesionProbMap oracle_probmap(const Subject& subject, double blur_fwhm_mm);

class OracleProvider final : public ProbMapProvider {
public:
    explicit OracleProvider(double blur_fwhm_mm = 0.0) : blur_fwhm_mm_(blur_fwhm_mm) {}
    LesionProbMap probmap(const Subject& subject, const Volume&) const override
    {
        return oracle_probmap(subject, blur_fwhm_mm_);
    }
    std::string name() const override { return "oracle"; }

private:
    double blur_fwhm_mm_;
};

struct HeuristicConfig {
    double smoothing_fwhm_mm = 4.0;
    double z0 = 4.0;
    double tau = 1.0;
    std::size_t min_voxels = 3;
    double epsilon = 1e-6;
};

/// Robust z-score against the median/MAD background mapped through a
/// logistic, with small components suppressed.
LesionProbMap heuristic_probmap(const Volume& volume, const HeuristicConfig& config = {});

class HeuristicProvider final : public ProbMapProvider {
public:
    explicit HeuristicProvider(HeuristicConfig config = {}) : config_(config) {}
    LesionProbMap probmap(const Subject&, const Volume& image) const override { return heuristic_probmap(image, config_); }
    std::string name() const override { return "heuristic"; }

private:
    HeuristicConfig config_;
};

struct Mask {
    Dims dims;
    std::vector<std::uint8_t> data;

    std::size_t count() const;
};

/// Strict `prob > threshold`.
Mask binarize(const LesionProbMap& probmap, double threshold = 0.5);
Volume mask_to_volume(const Mask& mask, const Spacing& spacing);

struct LesionInstance {
    std::size_t label = 0;
    /// Sorted lexicographically by (x, y, z).
    std::vector<Index3> voxels;
    double volume_mm3 = 0.0;
    double suv_mean = 0.0;
    double suv_max = 0.0;
};

/// 26-connected components, largest first; equal sizes ordered by their
/// smallest voxel. Labels run 1..K in that order.
std::vector<LesionInstance> connected_components(const Mask& mask, const Spacing& voxel_size);

/// Fills suv_mean / suv_max from `volume` over each instance's voxel set.
std::vector<LesionInstance> quantify_lesions(std::vector<LesionInstance> instances, const Volume& volume);

} // namespace leqmod
