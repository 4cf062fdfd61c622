#include "leqmod/seg.hpp"

#include "leqmod/error.hpp"
#include "leqmod/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace leqmod {

LesionProbMap::LesionProbMap(Volume values) : values_(std::move(values))
{
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (!(values_[i] >= 0.0 && values_[i] <= 1.0))
            throw DomainError("lesion probability outside [0,1] at voxel " + to_string(values_.dims().coord(i)));
}

LesionProbMap LesionProbMap::clamped(Volume values)
{
    for (double& v : values.data())
        v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    return LesionProbMap(std::move(values));
}

LesionProbMap LesionProbMap::zeros(const Dims& dims, const Spacing& spacing) { return LesionProbMap(Volume(dims, spacing, 0.0)); }

LesionProbMap oracle_probmap(const Subject& subject, double blur_fwhm_mm)
{
    if (blur_fwhm_mm == 0.0)
        return subject.oracle_prob;
    return LesionProbMap::clamped(gaussian_smooth(subject.oracle_prob.volume(), blur_fwhm_mm));
}

namespace {

double median_inplace(std::vector<double>& v)
{
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0)
        m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
}

// Visits the 26-neighbourhood of linear index `i`.
template <typename F>
void for_each_neighbour(const Dims& d, std::size_t i, F&& f)
{
    const Index3 c = d.coord(i);
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0 && dz == 0)
                    continue;
                const auto x = static_cast<std::ptrdiff_t>(c.x) + dx;
                const auto y = static_cast<std::ptrdiff_t>(c.y) + dy;
                const auto z = static_cast<std::ptrdiff_t>(c.z) + dz;
                if (x < 0 || y < 0 || z < 0 || x >= static_cast<std::ptrdiff_t>(d.nx) || y >= static_cast<std::ptrdiff_t>(d.ny) ||
                    z >= static_cast<std::ptrdiff_t>(d.nz))
                    continue;
                f(d.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z)));
            }
}

// Raw 26-connected labelling: returns components as linear-index lists in
// discovery order.
std::vector<std::vector<std::size_t>> label_components(const Dims& d, const std::vector<std::uint8_t>& mask)
{
    std::vector<std::vector<std::size_t>> comps;
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i] || seen[i])
            continue;
        std::vector<std::size_t> comp;
        seen[i] = 1;
        stack.push_back(i);
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            comp.push_back(cur);
            for_each_neighbour(d, cur, [&](std::size_t n) {
                if (mask[n] && !seen[n]) {
                    seen[n] = 1;
                    stack.push_back(n);
                }
            });
        }
        comps.push_back(std::move(comp));
    }
    return comps;
}

} // namespace

LesionProbMap heuristic_probmap(const Volume& volume, const HeuristicConfig& config)
{
    if (!(config.tau > 0.0))
        throw DomainError("heuristic tau must be positive");
    const Volume smooth = gaussian_smooth(volume, config.smoothing_fwhm_mm);
    std::vector<double> work(smooth.data().begin(), smooth.data().end());
    const double b = median_inplace(work);
    for (std::size_t i = 0; i < work.size(); ++i)
        work[i] = std::abs(smooth[i] - b);
    const double mad = median_inplace(work);
    const double spread = 1.4826 * mad + config.epsilon;

    Volume prob(volume.dims(), volume.spacing());
    for (std::size_t i = 0; i < prob.size(); ++i) {
        const double z = (smooth[i] - b) / spread;
        prob[i] = 1.0 / (1.0 + std::exp(-(z - config.z0) / config.tau));
    }

    std::vector<std::uint8_t> mask(prob.size());
    for (std::size_t i = 0; i < prob.size(); ++i)
        mask[i] = prob[i] > 0.5;
    for (const auto& comp : label_components(volume.dims(), mask))
        if (comp.size() < config.min_voxels)
            for (std::size_t i : comp)
                prob[i] = 0.0;
    return LesionProbMap::clamped(std::move(prob));
}

std::size_t Mask::count() const { return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1})); }

Mask binarize(const LesionProbMap& probmap, double threshold)
{
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw DomainError("binarization threshold must lie in [0,1]");
    Mask m{probmap.dims(), std::vector<std::uint8_t>(probmap.data().size())};
    for (std::size_t i = 0; i < m.data.size(); ++i)
        m.data[i] = probmap[i] > threshold ? 1 : 0;
    return m;
}

Volume mask_to_volume(const Mask& mask, const Spacing& spacing)
{
    Volume v(mask.dims, spacing);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        v[i] = mask.data[i] ? 1.0 : 0.0;
    return v;
}

std::vector<LesionInstance> connected_components(const Mask& mask, const Spacing& voxel_size)
{
    if (mask.data.size() != mask.dims.count())
        throw DimensionError("mask data does not match its dims");
    const double voxel_mm3 = voxel_size[0] * voxel_size[1] * voxel_size[2];
    std::vector<LesionInstance> out;
    for (auto& comp : label_components(mask.dims, mask.data)) {
        LesionInstance inst;
        inst.voxels.reserve(comp.size());
        for (std::size_t i : comp)
            inst.voxels.push_back(mask.dims.coord(i));
        std::sort(inst.voxels.begin(), inst.voxels.end());
        inst.volume_mm3 = static_cast<double>(inst.voxels.size()) * voxel_mm3;
        out.push_back(std::move(inst));
    }
    std::sort(out.begin(), out.end(), [](const LesionInstance& a, const LesionInstance& b) {
        if (a.voxels.size() != b.voxels.size())
            return a.voxels.size() > b.voxels.size();
        return a.voxels.front() < b.voxels.front();
    });
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k].label = k + 1;
    return out;
}

std::vector<LesionInstance> quantify_lesions(std::vector<LesionInstance> instances, const Volume& volume)
{
    const Dims& d = volume.dims();
    for (auto& inst : instances) {
        if (inst.voxels.empty())
            throw DomainError("lesion " + std::to_string(inst.label) + " has no voxels");
        double sum = 0.0;
        double peak = -std::numeric_limits<double>::infinity();
        for (const Index3& v : inst.voxels) {
            if (v.x >= d.nx || v.y >= d.ny || v.z >= d.nz)
                throw DimensionError("lesion voxel " + to_string(v) + " outside volume " + to_string(d));
            const double val = volume(v.x, v.y, v.z);
            sum += val;
            peak = std::max(peak, val);
        }
        inst.suv_mean = sum / static_cast<double>(inst.voxels.size());
        inst.suv_max = peak;
        inst.volume_mm3 = static_cast<double>(inst.voxels.size()) * volume.voxel_volume_mm3();
    }
    return instances;
}

} // namespace leqmod
