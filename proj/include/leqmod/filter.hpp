#pragma once

#include "leqmod/volume.hpp"

#include <vector>

namespace leqmod {

/// FWHM (mm) to standard deviation (mm).
double fwhm_to_sigma(double fwhm_mm) noexcept;

/// Normalised 1D Gaussian taps truncated at 3 sigma; sigma in voxels.
std::vector<double> gaussian_kernel(double sigma_voxels);

/// Separable Gaussian smoothing with per-axis sigma derived from the voxel
/// spacing. Taps falling outside the volume are dropped and the remaining
/// weights renormalised, so constant volumes stay constant up to the border.
/// fwhm_mm == 0 returns the input unchanged.
Volume gaussian_smooth(const Volume& volume, double fwhm_mm);

} // namespace leqmod
