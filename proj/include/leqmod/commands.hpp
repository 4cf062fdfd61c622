#pragma once

#include "leqmod/config.hpp"
#include "leqmod/denoiser.hpp"
#include "leqmod/metrics.hpp"
#include "leqmod/phantom.hpp"

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace leqmod {

inline constexpr const char* kModelName = "model.lqmp";
inline constexpr const char* kTrainLogName = "train_log.csv";
inline constexpr const char* kWeightsName = "weights.csv";
inline constexpr const char* kMetricsName = "metrics.csv";
inline constexpr const char* kMetricsSummaryName = "metrics_summary.csv";
inline constexpr const char* kBlandAltmanName = "bland_altman.csv";
inline constexpr const char* kBlandAltmanSummaryName = "bland_altman_summary.csv";
inline constexpr const char* kAblationName = "ablation.csv";

struct ArmSpec {
    std::string name;
    bool lemod = false;
    bool qumod = false;
};

/// Baseline, +LeMod, +QuMod, +LeqMod.
const std::vector<ArmSpec>& ablation_arms();

/// Disabling LeMod switches to uniform sampling and drops the lesion loss;
/// disabling QuMod drops the quantification loss.
void apply_toggles(RunConfig& config, bool lemod, bool qumod);

std::vector<Subject> generate_cohort(const RunConfig& config);
std::vector<Subject> load_cohort(const RunConfig& config);
/// FNV-1a over subject ids and the stored bytes of every volume.
std::string cohort_hash(std::span<const Subject> cohort);

struct CohortParts {
    CohortSplit split;
    std::span<const Subject> train;
    std::span<const Subject> val;
    std::span<const Subject> eval;
};

CohortParts partition(const RunConfig& config, std::span<const Subject> cohort);
PatchGrid patch_grid(const RunConfig& config, const Dims& dims);

TrainResult train_model(const RunConfig& config, std::span<const Subject> cohort);
DenoisedSet denoise_subjects(const RunConfig& config, const ModelParams& params, std::span<const Subject> subjects);
CohortMetrics evaluate_subjects(const RunConfig& config, std::span<const Subject> subjects, const DenoisedSet& denoised);

std::string denoised_name(const std::string& subject_id, double level);

/// (denoised TLG, reference TLG) for every row with a defined TLG bias.
std::vector<std::pair<double, double>> tlg_pairs(const CohortMetrics& metrics);

struct ArmResult {
    ArmSpec arm;
    std::string cohort_hash;
    TrainResult training;
    CohortMetrics metrics;
};

struct AblationReport {
    std::string cohort_hash;
    std::vector<ArmResult> arms;
};

AblationReport run_ablation(const RunConfig& config, std::span<const Subject> cohort, std::ostream* progress = nullptr);
void write_ablation_csv(const AblationReport& report, std::ostream& out);
void write_bland_altman_csv(std::span<const std::pair<std::string, const CohortMetrics*>> runs, std::ostream& out);
void write_bland_altman_summary_csv(std::span<const std::pair<std::string, const CohortMetrics*>> runs, std::ostream& out);

// Subcommands. Each writes its outputs and the config echo under `out`.
void cmd_gen(const RunConfig& config, const std::filesystem::path& out);
void cmd_train(const RunConfig& config, const std::filesystem::path& out, std::ostream* progress = nullptr);
void cmd_denoise(const RunConfig& config, const std::filesystem::path& out);
void cmd_eval(const RunConfig& config, const std::filesystem::path& out);
void cmd_ablate(const RunConfig& config, const std::filesystem::path& out, std::ostream* progress = nullptr);
void cmd_plan_dump(const RunConfig& config, std::ostream& out);

} // namespace leqmod
