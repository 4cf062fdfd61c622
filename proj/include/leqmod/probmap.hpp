#pragma once

#include "leqmod/volume.hpp"

namespace leqmod {

/// Per-voxel lesion probability in [0, 1].
class LesionProbMap {
public:
    LesionProbMap() = default;
    /// Throws DomainError if any value lies outside [0, 1].
    explicit LesionProbMap(Volume values);

    /// Clamps into [0, 1] instead of rejecting.
    static LesionProbMap clamped(Volume values);
    static LesionProbMap zeros(const Dims& dims, const Spacing& spacing);

    const Volume& volume() const noexcept { return values_; }
    const Dims& dims() const noexcept { return values_.dims(); }
    std::span<const double> data() const noexcept { return values_.data(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

private:
    Volume values_;
};

} // namespace leqmod
