#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace leqmod {

struct Index3 {
    std::size_t x = 0;
    std::size_t y = 0;
    std::size_t z = 0;

    auto operator<=>(const Index3&) const = default;
};

std::string to_string(const Index3& idx);

struct Dims {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::size_t nz = 0;

    std::size_t count() const noexcept { return nx * ny * nz; }
    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept { return x + nx * (y + ny * z); }
    std::size_t index(const Index3& i) const noexcept { return index(i.x, i.y, i.z); }
    Index3 coord(std::size_t linear) const noexcept { return {linear % nx, (linear / nx) % ny, linear / (nx * ny)}; }

    static Dims cube(std::size_t edge) noexcept { return {edge, edge, edge}; }
    bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

/// Voxel edge lengths in millimetres.
using Spacing = std::array<double, 3>;

/// Dense 3D scalar field in SUV units, x-fastest. Values are kept in double
/// precision; the on-disk format stores single precision.
class Volume {
public:
    Volume() = default;
    Volume(Dims dims, Spacing spacing, double fill = 0.0);
    Volume(Dims dims, Spacing spacing, std::vector<double> data);

    const Dims& dims() const noexcept { return dims_; }
    const Spacing& spacing() const noexcept { return spacing_; }
    double voxel_volume_mm3() const noexcept { return spacing_[0] * spacing_[1] * spacing_[2]; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    double operator()(std::size_t x, std::size_t y, std::size_t z) const noexcept { return data_[dims_.index(x, y, z)]; }
    double& operator()(std::size_t x, std::size_t y, std::size_t z) noexcept { return data_[dims_.index(x, y, z)]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }

    /// Throws DomainError naming the first non-finite voxel.
    void require_finite() const;

private:
    Dims dims_{};
    Spacing spacing_{1.0, 1.0, 1.0};
    std::vector<double> data_;
};

/// Cubic sub-array of a parent volume.
struct Patch {
    Index3 origin;
    std::size_t size = 0;
    std::vector<double> data;

    Dims dims() const noexcept { return Dims::cube(size); }
};

struct PatchGrid {
    std::size_t patch_size = 0;
    std::size_t stride = 0;
    Dims dims;
    std::vector<Index3> origins;
};

/// Start positions along one axis of extent `extent` for windows of `window`
/// with step `stride`: {0, stride, 2*stride, ...} plus the flush position
/// extent-window when the stride does not land on it.
std::vector<std::size_t> axis_positions(std::size_t extent, std::size_t window, std::size_t stride);

PatchGrid build_patch_grid(const Dims& dims, std::size_t patch_size, std::size_t stride);

Patch extract_patch(const Volume& volume, const Index3& origin, std::size_t size);

/// Overwrites the covered region of `volume` with the patch contents.
void write_patch(Volume& volume, const Patch& patch);

/// Averages all patch values covering each voxel. Throws CoverageError
/// naming the first uncovered voxel in storage order.
Volume reassemble(std::span<const Patch> patches, const Dims& dims, const Spacing& spacing = {1.0, 1.0, 1.0});

// LQMV binary volume format.
void write_volume(const Volume& volume, const std::filesystem::path& path);
Volume read_volume(const std::filesystem::path& path);
std::vector<char> encode_volume(const Volume& volume);
Volume decode_volume(std::span<const char> bytes);

} // namespace leqmod
