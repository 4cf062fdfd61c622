#include "leqmod/filter.hpp"

#include "leqmod/error.hpp"

#include <cmath>

namespace leqmod {

double fwhm_to_sigma(double fwhm_mm) noexcept { return fwhm_mm / (2.0 * std::sqrt(2.0 * std::log(2.0))); }

std::vector<double> gaussian_kernel(double sigma_voxels)
{
    if (!(sigma_voxels > 0.0))
        return {1.0};
    const auto radius = static_cast<std::size_t>(std::ceil(3.0 * sigma_voxels));
    std::vector<double> k(2 * radius + 1);
    double total = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        const double d = static_cast<double>(i) - static_cast<double>(radius);
        k[i] = std::exp(-0.5 * d * d / (sigma_voxels * sigma_voxels));
        total += k[i];
    }
    for (double& v : k)
        v /= total;
    return k;
}

namespace {

// Convolves along one axis; `step` is the linear-index stride of the axis.
void smooth_axis(std::vector<double>& data, const Dims& dims, int axis, const std::vector<double>& kernel)
{
    if (kernel.size() == 1)
        return;
    const std::size_t n = axis == 0 ? dims.nx : axis == 1 ? dims.ny : dims.nz;
    const std::size_t step = axis == 0 ? 1 : axis == 1 ? dims.nx : dims.nx * dims.ny;
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);

    std::vector<double> line(n), out(n);
    const std::size_t lines = dims.count() / n;
    for (std::size_t l = 0; l < lines; ++l) {
        // Base index of the l-th line along `axis`.
        std::size_t base = 0;
        if (axis == 0)
            base = l * dims.nx;
        else if (axis == 1)
            base = (l % dims.nx) + (l / dims.nx) * dims.nx * dims.ny;
        else
            base = l;
        for (std::size_t i = 0; i < n; ++i)
            line[i] = data[base + i * step];
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0, wsum = 0.0;
            for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
                const auto j = static_cast<std::ptrdiff_t>(i) + t;
                if (j < 0 || j >= static_cast<std::ptrdiff_t>(n))
                    continue;
                const double w = kernel[static_cast<std::size_t>(t + radius)];
                acc += w * line[static_cast<std::size_t>(j)];
                wsum += w;
            }
            out[i] = acc / wsum;
        }
        for (std::size_t i = 0; i < n; ++i)
            data[base + i * step] = out[i];
    }
}

} // namespace

Volume gaussian_smooth(const Volume& volume, double fwhm_mm)
{
    if (fwhm_mm < 0.0 || !std::isfinite(fwhm_mm))
        throw DomainError("smoothing FWHM must be >= 0");
    if (fwhm_mm == 0.0)
        return volume;
    std::vector<double> data(volume.data().begin(), volume.data().end());
    const double sigma_mm = fwhm_to_sigma(fwhm_mm);
    for (int axis = 0; axis < 3; ++axis)
        smooth_axis(data, volume.dims(), axis, gaussian_kernel(sigma_mm / volume.spacing()[static_cast<std::size_t>(axis)]));
    return Volume(volume.dims(), volume.spacing(), std::move(data));
}

} // namespace leqmod
