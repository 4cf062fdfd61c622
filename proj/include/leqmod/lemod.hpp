#pragma once

#include "leqmod/phantom.hpp"
#include "leqmod/rng.hpp"
#include "leqmod/seg.hpp"
#include "leqmod/volume.hpp"

#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace leqmod {

/// How the lesion-loss normaliser counts lesion voxels.
enum class LesionNormalizer {
    soft, ///< sum of probabilities
    hard, ///< number of voxels with probability > 0.5
};

struct SamplingConfig {
    double w_min = 0.3;
    /// Noise-aware factor per count level (%).
    std::map<double, double> eta_table{{1.0, 0.35}, {2.0, 0.25}, {5.0, 0.15}, {10.0, 0.12}, {25.0, 0.08}, {50.0, 0.05}};

    /// Throws ConfigError unless w_min in (0,1], all eta > 0 and eta is
    /// non-increasing in the count level.
    void validate() const;
};

/// Noise-aware factor. Levels between table keys interpolate linearly in
/// log(level); levels outside the table clamp to the nearest endpoint.
double eta_for_level(double count_level, const SamplingConfig& config);
bool eta_is_tabulated(double count_level, const SamplingConfig& config);

/// eta(level) * max(prob, w_min).
double sampling_weight(double max_lesion_prob, double count_level, const SamplingConfig& config);

struct TrainingPatchRecord {
    std::size_t subject = 0; ///< index into the cohort span
    std::string subject_id;
    Index3 origin;
    double count_level = 0.0;
    double max_lesion_prob = 0.0;
    double weight = 0.0;
};

/// One record per (subject, count level, origin) in that order.
std::vector<TrainingPatchRecord> build_weight_table(std::span<const Subject> cohort, const ProbMapProvider& provider,
                                                    const PatchGrid& grid, const SamplingConfig& config);

/// Same table with every weight replaced by 1 (uniform sampling).
std::vector<TrainingPatchRecord> uniform_weights(std::vector<TrainingPatchRecord> table);

void write_weight_table_csv(std::span<const TrainingPatchRecord> table, std::ostream& out);

/// Draws with replacement, P(i) = w_i / sum(w).
class WeightedSampler {
public:
    explicit WeightedSampler(std::span<const TrainingPatchRecord> table);
    explicit WeightedSampler(std::span<const double> weights);

    std::size_t draw(Rng& rng) const;
    std::vector<std::size_t> draw(std::size_t count, Rng& rng) const;
    double probability(std::size_t i) const;
    std::size_t size() const noexcept { return cumulative_.size(); }

private:
    void build(std::span<const double> weights);
    std::vector<double> cumulative_;
};

std::vector<std::size_t> sample_batch(std::span<const TrainingPatchRecord> table, std::size_t batch_size, Rng& rng);

struct LeLossResult {
    double value = 0.0;
    std::vector<double> grad;
};

/// Probability-weighted L1 between denoised and reference patches over the
/// lesion voxels, with sign(0) := 0 as the subgradient.
LeLossResult le_loss(std::span<const double> den, std::span<const double> hc, std::span<const double> prob,
                     LesionNormalizer normalizer = LesionNormalizer::soft);

inline constexpr double kLeLossEpsilon = 1e-8;

} // namespace leqmod
