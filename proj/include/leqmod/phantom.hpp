#pragma once

#include "leqmod/probmap.hpp"
#include "leqmod/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace leqmod {

/// FDG-avid hot spot. Center in voxel coordinates, radius in mm.
struct Lesion {
    Index3 center;
    double radius_mm = 0.0;
    double suv = 0.0;

    bool operator==(const Lesion&) const = default;
};

/// Soft-edged uptake region (liver, heart, ...). Can be colder than background.
struct Organ {
    Index3 center;
    double radius_mm = 0.0;
    double suv = 0.0;
};

struct PhantomSpec {
    Dims dims{64, 64, 64};
    Spacing voxel_size{2.0, 2.0, 2.0};
    double background_suv = 1.0;
    std::vector<Organ> organs;
    std::vector<Lesion> lesions;
    /// One-voxel linear falloff around each lesion sphere.
    bool edge_ramp = true;
    std::uint64_t seed = 0;
};

struct Phantom {
    Volume activity;
    LesionProbMap oracle;
    std::vector<Lesion> lesions;
};

/// Throws GenerationError for invalid or overlapping lesions.
void validate_phantom_spec(const PhantomSpec& spec);

Phantom generate_phantom(const PhantomSpec& spec);

struct CountSimConfig {
    /// Expected counts per SUV per voxel at the full (100%) level.
    double sensitivity = 100.0;
    std::vector<double> count_levels{5.0};
    double smoothing_fwhm_mm = 2.0;
    std::uint64_t seed = 0;
};

struct SimulatedImages {
    Volume hc;
    std::map<double, Volume> lc;
};

/// Poisson counts at full level, binomial thinning for each reduced level,
/// scaled back to SUV and optionally smoothed.
SimulatedImages simulate_counts(const Volume& activity, const CountSimConfig& config);

struct Subject {
    std::string id;
    Volume hc;
    std::map<double, Volume> lc;
    LesionProbMap oracle_prob;
    std::vector<Lesion> lesion_truth;
};

struct CohortOptions {
    double lesion_free_fraction = 0.3;
    std::size_t max_lesions = 5;
    double lesion_radius_min_mm = 3.0;
    double lesion_radius_max_mm = 6.0;
    double lesion_suv_min = 3.0;
    double lesion_suv_max = 8.0;
    std::size_t max_retries = 200;
};

/// Default body template: background plus a few organ blobs scaled to `dims`.
PhantomSpec default_phantom_template(const Dims& dims, const Spacing& voxel_size, double background_suv);

std::vector<Subject> generate_cohort(std::size_t n_subjects, const PhantomSpec& spec_template,
                                     const CountSimConfig& config, const CohortOptions& options = {});

/// Rounds every voxel to single precision so in-memory volumes equal their
/// on-disk representation.
void round_to_storage(Volume& volume);

inline constexpr const char* kManifestName = "manifest.txt";

std::filesystem::path write_manifest(const std::vector<Subject>& cohort, const std::filesystem::path& dir);
std::vector<Subject> read_manifest(const std::filesystem::path& manifest_path);

std::string level_tag(double level);

} // namespace leqmod
