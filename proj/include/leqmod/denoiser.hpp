#pragma once

#include "leqmod/lemod.hpp"
#include "leqmod/phantom.hpp"
#include "leqmod/qumod.hpp"
#include "leqmod/seg.hpp"
#include "leqmod/volume.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace leqmod {

enum class Architecture : std::uint32_t {
    convnet = 0,   ///< 3x conv 3^3, channels 1->8->8->1, ReLU, additive input skip
    linfilter = 1, ///< single 5^3 linear filter with bias
};

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& name);

struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Flat parameter vector; block order is fixed per architecture:
///   convnet:   conv1.weight conv1.bias conv2.weight conv2.bias conv3.weight conv3.bias
///   linfilter: filter.weight filter.bias
/// Weights are stored [out][in][kz][ky][kx].
struct ModelParams {
    Architecture arch = Architecture::convnet;
    std::vector<double> values;

    const std::vector<ParamBlock>& blocks() const;
    std::span<double> block(std::size_t i) { return std::span<double>(values).subspan(blocks()[i].offset, blocks()[i].size); }
    std::span<const double> block(std::size_t i) const
    {
        return std::span<const double>(values).subspan(blocks()[i].offset, blocks()[i].size);
    }
};

std::size_t parameter_count(Architecture arch);
const std::vector<ParamBlock>& parameter_blocks(Architecture arch);

ModelParams zero_params(Architecture arch);
/// convnet: all zero (skip path only); linfilter: centred delta kernel.
ModelParams identity_params(Architecture arch);
/// Centred uniform weights scaled by 1/sqrt(fan_in), zero biases.
ModelParams init_params(Architecture arch, std::uint64_t seed);

/// Activations kept from a forward pass for the backward pass, stored
/// zero-padded by the kernel radius.
struct ForwardCache {
    std::size_t edge = 0;
    std::vector<double> input;
    std::vector<double> hidden1; ///< post-ReLU, 8 channels
    std::vector<double> hidden2; ///< post-ReLU, 8 channels
};

std::vector<double> forward(const ModelParams& params, std::span<const double> input, std::size_t edge,
                            ForwardCache* cache = nullptr);

struct Gradients {
    std::vector<double> params;
    std::vector<double> input;
};

Gradients backward(const ModelParams& params, std::span<const double> input, std::size_t edge,
                   std::span<const double> upstream);
Gradients backward(const ModelParams& params, const ForwardCache& cache, std::span<const double> upstream);

struct LossConfig {
    double lambda_le = 0.15;
    double lambda_qu = 0.5;
    bool use_base = true;
    bool use_le = true;
    bool use_qu = true;
    LesionNormalizer normalizer = LesionNormalizer::soft;
};

/// Unweighted component values; disabled components read 0.
struct LossComponents {
    double base = 0.0;
    double le = 0.0;
    double qu = 0.0;
};

struct CombinedLoss {
    double value = 0.0;
    std::vector<double> grad;
    LossComponents components;
};

/// Mean squared error.
double base_loss(std::span<const double> den, std::span<const double> hc, std::vector<double>* grad = nullptr);

CombinedLoss combined_loss(std::span<const double> den, std::span<const double> hc, std::span<const double> prob,
                           const ParcellationPlan& plan, const LossConfig& config);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    static OptimizerState for_params(const ModelParams& params);
};

/// Bias-corrected Adam. Throws TrainingError naming the parameter block if
/// any gradient is non-finite; parameters are left untouched in that case.
void adam_step(ModelParams& params, std::span<const double> grads, OptimizerState& state, double lr,
               const AdamConfig& config = {});

struct TrainConfig {
    Architecture arch = Architecture::convnet;
    LossConfig loss;
    std::array<double, 4> scale_weights = kDefaultScaleWeights;
    AdamConfig adam;
    double lr0 = 1e-4;
    double lr_decay = 0.1;
    std::size_t patience = 5;
    double lr_min = 1e-7;
    std::size_t batch_size = 4;
    std::size_t max_epochs = 100;
    /// Patches per epoch; 0 means one pass worth of the weight table.
    std::size_t epoch_samples = 0;
    /// Upper bound on fixed validation patches; 0 means all.
    std::size_t val_patches = 64;
    bool weighted_sampling = true;
    std::uint64_t seed = 0;
};

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double loss_total = 0.0;
    double loss_base = 0.0;
    double loss_le = 0.0;
    double loss_qu = 0.0;
    double val_loss = 0.0;
    double lesion_fraction = 0.0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochLog> log;
    std::size_t table_size = 0;
};

/// Subjects [0, n_train) train, [n_train, n_train+n_val) validate and the
/// rest are held out.
struct CohortSplit {
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::size_t n_test = 0;
};

CohortSplit split_cohort(std::size_t n_subjects, double train_fraction, double val_fraction);

struct TrainInputs {
    std::span<const Subject> train;
    std::span<const Subject> val;
    const ProbMapProvider* provider = nullptr;
    PatchGrid grid;
    /// Optional initial parameters; defaults to init_params(arch, seed).
    const ModelParams* initial = nullptr;
};

TrainResult train(const TrainInputs& inputs, const TrainConfig& config, const SamplingConfig& sampling);

void write_train_log_csv(std::span<const EpochLog> log, std::ostream& out);

/// Patch-wise inference, reassembly, and clamping of negative outputs to 0.
Volume denoise_volume(const ModelParams& params, const Volume& volume, const PatchGrid& grid);

// LQMP checkpoint format.
std::vector<char> encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(std::span<const char> bytes);
void write_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams read_checkpoint(const std::filesystem::path& path);

} // namespace leqmod
