#pragma once

#include "leqmod/phantom.hpp"
#include "leqmod/seg.hpp"
#include "leqmod/volume.hpp"

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace leqmod {

/// RMSE normalized by the reference mean.
double nrmse(std::span<const double> test, std::span<const double> ref);
double nrmse(const Volume& test, const Volume& ref);

/// Peak is the reference maximum. Identical inputs give +infinity.
double psnr(std::span<const double> test, std::span<const double> ref);
double psnr(const Volume& test, const Volume& ref);

inline constexpr std::size_t kSsimWindow = 7;

/// Mean local SSIM over every window lying fully inside the volume, with a
/// uniform cubic window and population (co)variances.
double ssim(const Volume& test, const Volume& ref, std::size_t window = kSsimWindow);

struct LesionBias {
    std::size_t label = 0;
    double suv_mean_bias_pct = 0.0;
    double suv_max_bias_pct = 0.0;
};

struct QuantificationBiases {
    std::vector<LesionBias> lesions;
    double tlg_den = 0.0;
    double tlg_hc = 0.0;
    /// Undefined for lesion-free subjects or zero reference TLG.
    std::optional<double> tlg_bias_pct;
    std::vector<std::string> warnings;
};

/// Biases of `den` relative to `hc` over the voxel sets of `instances`.
QuantificationBiases quantification_biases(const Volume& den, const Volume& hc, std::span<const LesionInstance> instances);

/// |TP| / (|TP| + alpha |FP| + beta |FN|); two empty masks give 1.
double tversky(const Mask& den, const Mask& hc, double alpha, double beta);
double dice(const Mask& a, const Mask& b);

inline constexpr double kBlandAltmanZ = 2.054;

struct BlandAltmanSummary {
    std::vector<double> means;
    std::vector<double> differences;
    double mean_bias = 0.0;
    double sd = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// Pairs are (test, reference); differences are test - reference.
BlandAltmanSummary bland_altman(std::span<const std::pair<double, double>> pairs);

struct WilcoxonResult {
    double statistic = 0.0; ///< sum of ranks of positive differences
    double p_value = 1.0;
    std::size_t n = 0;      ///< pairs with non-zero difference
    bool exact = false;
    bool degenerate = false;
};

inline constexpr std::size_t kWilcoxonExactMax = 15;

/// Two-sided signed-rank test of a - b.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct EvalConfig {
    std::vector<std::pair<double, double>> tversky_pairs{{0.3, 0.7}, {0.5, 0.5}, {0.7, 0.3}};
    double threshold = 0.5;
    std::size_t ssim_window = kSsimWindow;
};

struct SubjectMetrics {
    std::string subject;
    double level = 0.0;
    double nrmse = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    std::size_t n_lesions = 0;
    QuantificationBiases biases;
    std::optional<double> suv_mean_bias_pct;
    std::optional<double> suv_max_bias_pct;
    std::vector<double> tversky;
};

struct CohortMetrics {
    std::vector<std::pair<double, double>> tversky_pairs;
    std::vector<SubjectMetrics> rows;
};

/// Keyed by (subject id, count level).
using DenoisedSet = std::map<std::pair<std::string, double>, Volume>;

/// Lesion instances come from `labeler` applied to each HC image; the
/// visibility tier segments both images with `observer`.
CohortMetrics evaluate_cohort(std::span<const Subject> cohort, const DenoisedSet& denoised, const ProbMapProvider& labeler,
                              const ProbMapProvider& observer, const EvalConfig& config = {});

std::string tversky_column(double alpha, double beta);
void write_metrics_csv(const CohortMetrics& metrics, std::ostream& out);
/// Mean and sample sd of every column per level.
void write_metrics_summary_csv(const CohortMetrics& metrics, std::ostream& out);

/// Mean of |SUV_max bias| over every lesion of every row.
double mean_abs_suv_max_bias(const CohortMetrics& metrics);
double mean_nrmse(const CohortMetrics& metrics);

} // namespace leqmod
