#include "leqmod/denoiser.hpp"

#include "leqmod/error.hpp"
#include "leqmod/rng.hpp"
#include "leqmod/text.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

namespace leqmod {

std::string to_string(Architecture arch) { return arch == Architecture::convnet ? "convnet" : "linfilter"; }

Architecture parse_architecture(const std::string& name)
{
    if (name == "convnet")
        return Architecture::convnet;
    if (name == "linfilter")
        return Architecture::linfilter;
    throw ConfigError("unknown architecture '" + name + "' (expected convnet or linfilter)");
}

namespace {

struct ConvShape {
    std::size_t cin;
    std::size_t cout;
    std::size_t k;

    std::size_t weights() const noexcept { return cout * cin * k * k * k; }
};

constexpr std::size_t kHidden = 8;
constexpr ConvShape kConv1{1, kHidden, 3};
constexpr ConvShape kConv2{kHidden, kHidden, 3};
constexpr ConvShape kConv3{kHidden, 1, 3};
constexpr ConvShape kFilter{1, 1, 5};

std::vector<ParamBlock> make_blocks(std::initializer_list<std::pair<const char*, ConvShape>> layers)
{
    std::vector<ParamBlock> blocks;
    std::size_t off = 0;
    for (const auto& [name, shape] : layers) {
        blocks.push_back({std::string(name) + ".weight", off, shape.weights()});
        off += shape.weights();
        blocks.push_back({std::string(name) + ".bias", off, shape.cout});
        off += shape.cout;
    }
    return blocks;
}

// Activations live in a zero-padded cube of edge n + 2r so that every kernel
// tap becomes one contiguous shifted loop over the interior span. Values
// computed at padding positions inside that span are discarded.
struct PadGrid {
    std::size_t n = 0;
    std::size_t r = 0;
    std::size_t p = 0;
    std::ptrdiff_t begin = 0;
    std::ptrdiff_t end = 0;

    PadGrid(std::size_t edge, std::size_t radius) : n(edge), r(radius), p(edge + 2 * radius)
    {
        begin = static_cast<std::ptrdiff_t>(at(r, r, r));
        end = static_cast<std::ptrdiff_t>(at(r + n - 1, r + n - 1, r + n - 1)) + 1;
    }
    std::size_t size() const noexcept { return p * p * p; }
    std::size_t at(std::size_t x, std::size_t y, std::size_t z) const noexcept { return x + p * (y + p * z); }
    std::ptrdiff_t shift(std::ptrdiff_t dx, std::ptrdiff_t dy, std::ptrdiff_t dz) const noexcept
    {
        const auto sp = static_cast<std::ptrdiff_t>(p);
        return dx + sp * (dy + sp * dz);
    }
};

constexpr std::ptrdiff_t kChunk = 2048;

std::vector<double> pad(std::span<const double> v, const PadGrid& g)
{
    std::vector<double> out(g.size(), 0.0);
    for (std::size_t z = 0; z < g.n; ++z)
        for (std::size_t y = 0; y < g.n; ++y)
            std::copy_n(v.data() + g.n * (y + g.n * z), g.n, out.data() + g.at(g.r, g.r + y, g.r + z));
    return out;
}

std::vector<double> unpad(const double* v, const PadGrid& g)
{
    std::vector<double> out(g.n * g.n * g.n);
    for (std::size_t z = 0; z < g.n; ++z)
        for (std::size_t y = 0; y < g.n; ++y)
            std::copy_n(v + g.at(g.r, g.r + y, g.r + z), g.n, out.data() + g.n * (y + g.n * z));
    return out;
}

void zero_padding(double* v, const PadGrid& g)
{
    const std::size_t lo = g.r, hi = g.r + g.n;
    for (std::size_t z = 0; z < g.p; ++z)
        for (std::size_t y = 0; y < g.p; ++y) {
            double* row = v + g.at(0, y, z);
            if (z < lo || z >= hi || y < lo || y >= hi) {
                std::fill_n(row, g.p, 0.0);
                continue;
            }
            std::fill_n(row, lo, 0.0);
            std::fill(row + hi, row + g.p, 0.0);
        }
}

// Same-padded cross-correlation on padded buffers:
// out[co] = b[co] + sum_ci w[co][ci] * in[ci]. Padding of out is zeroed.
// Taps along x are fused so each output row segment is touched once per
// (kz, ky) pair.
template <std::size_t K>
void conv_forward_k(const ConvShape& s, const double* w, const double* b, const double* in, double* out, const PadGrid& g)
{
    constexpr auto r = static_cast<std::ptrdiff_t>(K / 2);
    const std::size_t sz = g.size();
    for (std::size_t co = 0; co < s.cout; ++co)
        std::fill(out + co * sz, out + (co + 1) * sz, b[co]);
    for (std::ptrdiff_t c0 = g.begin; c0 < g.end; c0 += kChunk) {
        const std::ptrdiff_t c1 = std::min(g.end, c0 + kChunk);
        for (std::size_t co = 0; co < s.cout; ++co) {
            double* o = out + co * sz;
            for (std::size_t ci = 0; ci < s.cin; ++ci) {
                const double* wk = w + (co * s.cin + ci) * K * K * K;
                for (std::size_t kz = 0; kz < K; ++kz)
                    for (std::size_t ky = 0; ky < K; ++ky) {
                        const double* wr = wk + K * (ky + K * kz);
                        const double* x = in + ci * sz + g.shift(-r, static_cast<std::ptrdiff_t>(ky) - r,
                                                                  static_cast<std::ptrdiff_t>(kz) - r);
                        std::array<double, K> wv;
                        std::copy_n(wr, K, wv.begin());
#pragma omp simd
                        for (std::ptrdiff_t i = c0; i < c1; ++i) {
                            double acc = o[i];
                            for (std::size_t kx = 0; kx < K; ++kx)
                                acc += wv[kx] * x[i + static_cast<std::ptrdiff_t>(kx)];
                            o[i] = acc;
                        }
                    }
            }
        }
    }
    for (std::size_t co = 0; co < s.cout; ++co)
        zero_padding(out + co * sz, g);
}

// Reverse of conv_forward. gout must have zero padding. Accumulates into gin
// (may be null; its padding is zeroed afterwards), gw and gb.
template <std::size_t K>
void conv_backward_k(const ConvShape& s, const double* w, const double* in, const double* gout, double* gin, double* gw,
                     double* gb, const PadGrid& g)
{
    constexpr auto r = static_cast<std::ptrdiff_t>(K / 2);
    const std::size_t sz = g.size();
    for (std::size_t co = 0; co < s.cout; ++co) {
        const double* go = gout + co * sz;
        double acc = 0.0;
#pragma omp simd reduction(+ : acc)
        for (std::ptrdiff_t i = g.begin; i < g.end; ++i)
            acc += go[i];
        gb[co] += acc;
    }
    for (std::ptrdiff_t c0 = g.begin; c0 < g.end; c0 += kChunk) {
        const std::ptrdiff_t c1 = std::min(g.end, c0 + kChunk);
        for (std::size_t co = 0; co < s.cout; ++co) {
            const double* go = gout + co * sz;
            for (std::size_t ci = 0; ci < s.cin; ++ci) {
                const std::size_t wo = (co * s.cin + ci) * K * K * K;
                for (std::size_t kz = 0; kz < K; ++kz)
                    for (std::size_t ky = 0; ky < K; ++ky) {
                        const std::ptrdiff_t base =
                            g.shift(-r, static_cast<std::ptrdiff_t>(ky) - r, static_cast<std::ptrdiff_t>(kz) - r);
                        const std::size_t t0 = wo + K * (ky + K * kz);
                        const double* x = in + ci * sz + base;
                        for (std::size_t kx = 0; kx < K; ++kx) {
                            double acc = 0.0;
                            const double* xs = x + kx;
#pragma omp simd reduction(+ : acc)
                            for (std::ptrdiff_t i = c0; i < c1; ++i)
                                acc += go[i] * xs[i];
                            gw[t0 + kx] += acc;
                        }
                        if (gin) {
                            // gin[j] += sum_kx w * gout[j - base - kx]
                            std::array<double, K> wv;
                            std::copy_n(w + t0, K, wv.begin());
                            double* gx = gin + ci * sz;
                            const double* y = go - base;
#pragma omp simd
                            for (std::ptrdiff_t j = c0; j < c1; ++j) {
                                double acc = gx[j];
                                for (std::size_t kx = 0; kx < K; ++kx)
                                    acc += wv[kx] * y[j - static_cast<std::ptrdiff_t>(kx)];
                                gx[j] = acc;
                            }
                        }
                    }
            }
        }
    }
    if (gin)
        for (std::size_t ci = 0; ci < s.cin; ++ci)
            zero_padding(gin + ci * sz, g);
}

void conv_forward(const ConvShape& s, const double* w, const double* b, const double* in, double* out, const PadGrid& g)
{
    if (s.k == 3)
        conv_forward_k<3>(s, w, b, in, out, g);
    else
        conv_forward_k<5>(s, w, b, in, out, g);
}

void conv_backward(const ConvShape& s, const double* w, const double* in, const double* gout, double* gin, double* gw,
                   double* gb, const PadGrid& g)
{
    if (s.k == 3)
        conv_backward_k<3>(s, w, in, gout, gin, gw, gb, g);
    else
        conv_backward_k<5>(s, w, in, gout, gin, gw, gb, g);
}

void relu_inplace(std::vector<double>& v)
{
    for (double& x : v)
        x = x > 0.0 ? x : 0.0;
}

void check_edge(std::span<const double> input, std::size_t edge)
{
    if (edge == 0 || input.size() != edge * edge * edge)
        throw DimensionError("model input has " + std::to_string(input.size()) + " values, expected " + std::to_string(edge) +
                             "^3");
}

} // namespace

const std::vector<ParamBlock>& parameter_blocks(Architecture arch)
{
    static const std::vector<ParamBlock> convnet = make_blocks({{"conv1", kConv1}, {"conv2", kConv2}, {"conv3", kConv3}});
    static const std::vector<ParamBlock> linfilter = make_blocks({{"filter", kFilter}});
    return arch == Architecture::convnet ? convnet : linfilter;
}

std::size_t parameter_count(Architecture arch)
{
    const auto& b = parameter_blocks(arch);
    return b.back().offset + b.back().size;
}

const std::vector<ParamBlock>& ModelParams::blocks() const { return parameter_blocks(arch); }

ModelParams zero_params(Architecture arch) { return {arch, std::vector<double>(parameter_count(arch), 0.0)}; }

ModelParams identity_params(Architecture arch)
{
    ModelParams p = zero_params(arch);
    if (arch == Architecture::linfilter)
        p.block(0)[62] = 1.0; // centre of 5x5x5
    return p;
}

ModelParams init_params(Architecture arch, std::uint64_t seed)
{
    ModelParams p = zero_params(arch);
    Rng rng = make_stream(seed, 0x1417);
    const auto fill = [&](std::size_t block, const ConvShape& s) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.cin * s.k * s.k * s.k));
        for (double& w : p.block(block))
            w = uniform(rng, -bound, bound);
    };
    if (arch == Architecture::convnet) {
        fill(0, kConv1);
        fill(2, kConv2);
        fill(4, kConv3);
    } else {
        fill(0, kFilter);
    }
    return p;
}

std::vector<double> forward(const ModelParams& params, std::span<const double> input, std::size_t edge, ForwardCache* cache)
{
    check_edge(input, edge);
    if (params.values.size() != parameter_count(params.arch))
        throw DimensionError("parameter vector does not match architecture " + to_string(params.arch));
    const std::size_t n3 = input.size();
    const PadGrid g(edge, params.arch == Architecture::linfilter ? kFilter.k / 2 : 1);
    std::vector<double> xin = pad(input, g);
    std::vector<double> out(g.size());
    if (params.arch == Architecture::linfilter) {
        conv_forward(kFilter, params.block(0).data(), params.block(1).data(), xin.data(), out.data(), g);
        if (cache) {
            cache->edge = edge;
            cache->input = std::move(xin);
        }
        return unpad(out.data(), g);
    }

    std::vector<double> h1(kHidden * g.size()), h2(kHidden * g.size());
    conv_forward(kConv1, params.block(0).data(), params.block(1).data(), xin.data(), h1.data(), g);
    relu_inplace(h1);
    conv_forward(kConv2, params.block(2).data(), params.block(3).data(), h1.data(), h2.data(), g);
    relu_inplace(h2);
    conv_forward(kConv3, params.block(4).data(), params.block(5).data(), h2.data(), out.data(), g);
    std::vector<double> result = unpad(out.data(), g);
    for (std::size_t i = 0; i < n3; ++i)
        result[i] += input[i];
    if (cache) {
        cache->edge = edge;
        cache->input = std::move(xin);
        cache->hidden1 = std::move(h1);
        cache->hidden2 = std::move(h2);
    }
    return result;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache, std::span<const double> upstream)
{
    const std::size_t n = cache.edge;
    const std::size_t n3 = n * n * n;
    if (upstream.size() != n3)
        throw DimensionError("upstream gradient has " + std::to_string(upstream.size()) + " values, expected " +
                             std::to_string(n3));
    const PadGrid g(n, params.arch == Architecture::linfilter ? kFilter.k / 2 : 1);
    if (cache.input.size() != g.size())
        throw DimensionError("forward cache does not match architecture " + to_string(params.arch));
    Gradients grads{std::vector<double>(params.values.size(), 0.0), {}};
    const auto gblock = [&](std::size_t i) { return grads.params.data() + params.blocks()[i].offset; };
    const std::vector<double> gup = pad(upstream, g);
    std::vector<double> gx(g.size(), 0.0);

    if (params.arch == Architecture::linfilter) {
        conv_backward(kFilter, params.block(0).data(), cache.input.data(), gup.data(), gx.data(), gblock(0), gblock(1), g);
        grads.input = unpad(gx.data(), g);
        return grads;
    }

    std::vector<double> gh2(kHidden * g.size(), 0.0), gh1(kHidden * g.size(), 0.0);
    conv_backward(kConv3, params.block(4).data(), cache.hidden2.data(), gup.data(), gh2.data(), gblock(4), gblock(5), g);
    for (std::size_t i = 0; i < gh2.size(); ++i)
        if (!(cache.hidden2[i] > 0.0))
            gh2[i] = 0.0;
    conv_backward(kConv2, params.block(2).data(), cache.hidden1.data(), gh2.data(), gh1.data(), gblock(2), gblock(3), g);
    for (std::size_t i = 0; i < gh1.size(); ++i)
        if (!(cache.hidden1[i] > 0.0))
            gh1[i] = 0.0;
    conv_backward(kConv1, params.block(0).data(), cache.input.data(), gh1.data(), gx.data(), gblock(0), gblock(1), g);
    grads.input = unpad(gx.data(), g);
    // Skip connection.
    for (std::size_t i = 0; i < n3; ++i)
        grads.input[i] += upstream[i];
    return grads;
}

Gradients backward(const ModelParams& params, std::span<const double> input, std::size_t edge, std::span<const double> upstream)
{
    ForwardCache cache;
    forward(params, input, edge, &cache);
    return backward(params, cache, upstream);
}

// --- losses ------------------------------------------------------------------

double base_loss(std::span<const double> den, std::span<const double> hc, std::vector<double>* grad)
{
    if (den.size() != hc.size() || den.empty())
        throw DimensionError("base loss inputs differ in size");
    const double inv_n = 1.0 / static_cast<double>(den.size());
    long double acc = 0.0L;
    if (grad)
        grad->assign(den.size(), 0.0);
    for (std::size_t j = 0; j < den.size(); ++j) {
        const double d = den[j] - hc[j];
        acc += d * d;
        if (grad)
            (*grad)[j] = 2.0 * inv_n * d;
    }
    return static_cast<double>(acc) * inv_n;
}

CombinedLoss combined_loss(std::span<const double> den, std::span<const double> hc, std::span<const double> prob,
                           const ParcellationPlan& plan, const LossConfig& config)
{
    if (den.size() != hc.size() || den.size() != prob.size())
        throw DimensionError("combined loss inputs differ in size");
    if (config.lambda_le < 0.0 || config.lambda_qu < 0.0)
        throw ConfigError("loss weights must be non-negative");
    CombinedLoss out;
    out.grad.assign(den.size(), 0.0);
    if (config.use_base) {
        std::vector<double> g;
        out.components.base = base_loss(den, hc, &g);
        out.value += out.components.base;
        for (std::size_t j = 0; j < g.size(); ++j)
            out.grad[j] += g[j];
    }
    if (config.use_le) {
        const auto le = le_loss(den, hc, prob, config.normalizer);
        out.components.le = le.value;
        out.value += config.lambda_le * le.value;
        for (std::size_t j = 0; j < le.grad.size(); ++j)
            out.grad[j] += config.lambda_le * le.grad[j];
    }
    if (config.use_qu) {
        const auto qu = qu_loss(den, hc, plan);
        out.components.qu = qu.value;
        out.value += config.lambda_qu * qu.value;
        for (std::size_t j = 0; j < qu.grad.size(); ++j)
            out.grad[j] += config.lambda_qu * qu.grad[j];
    }
    return out;
}

// --- Adam ----------------------------------------------------------------------

OptimizerState OptimizerState::for_params(const ModelParams& params)
{
    return {std::vector<double>(params.values.size(), 0.0), std::vector<double>(params.values.size(), 0.0), 0};
}

void adam_step(ModelParams& params, std::span<const double> grads, OptimizerState& state, double lr, const AdamConfig& config)
{
    if (grads.size() != params.values.size() || state.m.size() != params.values.size() || state.v.size() != params.values.size())
        throw DimensionError("optimizer state, gradients and parameters differ in size");
    for (const auto& b : params.blocks())
        for (std::size_t i = b.offset; i < b.offset + b.size; ++i)
            if (!std::isfinite(grads[i]))
                throw TrainingError("non-finite gradient in parameter block " + b.name);

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params.values[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

// --- training -----------------------------------------------------------------

CohortSplit split_cohort(std::size_t n_subjects, double train_fraction, double val_fraction)
{
    if (train_fraction <= 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0)
        throw ConfigError("split fractions must satisfy 0 < train, 0 <= val, train + val <= 1");
    CohortSplit s;
    s.n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n_subjects))));
    s.n_train = std::min(s.n_train, n_subjects);
    s.n_val = std::min(n_subjects - s.n_train, static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(n_subjects))));
    s.n_test = n_subjects - s.n_train - s.n_val;
    return s;
}

namespace {

struct PatchTriple {
    std::vector<double> lc, hc, prob;
};

PatchTriple load_patch(const Subject& s, const LesionProbMap& prob, const TrainingPatchRecord& r, std::size_t size)
{
    const auto it = s.lc.find(r.count_level);
    if (it == s.lc.end())
        throw TrainingError("subject " + s.id + " lacks count level " + text::format_double(r.count_level));
    return {extract_patch(it->second, r.origin, size).data, extract_patch(s.hc, r.origin, size).data,
            extract_patch(prob.volume(), r.origin, size).data};
}

} // namespace

TrainResult train(const TrainInputs& inputs, const TrainConfig& config, const SamplingConfig& sampling)
{
    if (inputs.train.empty())
        throw TrainingError("empty training cohort");
    if (!inputs.provider)
        throw TrainingError("no probability-map provider");
    if (config.batch_size == 0)
        throw ConfigError("batch size must be >= 1");
    if (!(config.lr0 > 0.0))
        throw ConfigError("initial learning rate must be positive");
    sampling.validate();

    const std::size_t edge = inputs.grid.patch_size;
    const ParcellationPlan plan = build_parcellation(edge, config.scale_weights);

    std::vector<TrainingPatchRecord> table = build_weight_table(inputs.train, *inputs.provider, inputs.grid, sampling);
    if (!config.weighted_sampling)
        table = uniform_weights(std::move(table));
    std::vector<LesionProbMap> train_prob;
    for (const auto& s : inputs.train)
        train_prob.push_back(inputs.provider->probmap(s, s.hc));

    std::vector<PatchTriple> val_set;
    if (!inputs.val.empty()) {
        const auto val_table = build_weight_table(inputs.val, *inputs.provider, inputs.grid, sampling);
        std::vector<LesionProbMap> val_prob;
        for (const auto& s : inputs.val)
            val_prob.push_back(inputs.provider->probmap(s, s.hc));
        const std::size_t want =
            config.val_patches == 0 ? val_table.size() : std::min(config.val_patches, val_table.size());
        for (std::size_t k = 0; k < want; ++k) {
            const auto& r = val_table[k * val_table.size() / want];
            val_set.push_back(load_patch(inputs.val[r.subject], val_prob[r.subject], r, edge));
        }
    }

    TrainResult result;
    result.table_size = table.size();
    result.params = inputs.initial ? *inputs.initial : init_params(config.arch, config.seed);
    if (result.params.arch != config.arch)
        throw ConfigError("initial parameters do not match the configured architecture");
    if (config.max_epochs == 0)
        return result;

    ModelParams& params = result.params;
    OptimizerState state = OptimizerState::for_params(params);
    const WeightedSampler sampler(table);
    Rng rng = make_stream(config.seed, 0x5a3b1e);

    const std::size_t samples = config.epoch_samples == 0 ? table.size() : config.epoch_samples;
    const std::size_t steps = std::max<std::size_t>(1, (samples + config.batch_size - 1) / config.batch_size);
    const double inv_batch = 1.0 / static_cast<double>(config.batch_size);

    double lr = config.lr0;
    double best = std::numeric_limits<double>::infinity();
    std::size_t wait = 0;
    std::vector<double> grads(params.values.size());
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        EpochLog log;
        log.epoch = epoch;
        log.lr = lr;
        std::size_t drawn = 0, lesion_draws = 0;
        for (std::size_t step = 0; step < steps; ++step) {
            std::fill(grads.begin(), grads.end(), 0.0);
            for (std::size_t b = 0; b < config.batch_size; ++b) {
                const auto& rec = table[sampler.draw(rng)];
                const PatchTriple p = load_patch(inputs.train[rec.subject], train_prob[rec.subject], rec, edge);
                ForwardCache cache;
                const auto den = forward(params, p.lc, edge, &cache);
                const auto loss = combined_loss(den, p.hc, p.prob, plan, config.loss);
                if (!std::isfinite(loss.value))
                    throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
                const auto g = backward(params, cache, loss.grad);
                for (std::size_t i = 0; i < grads.size(); ++i)
                    grads[i] += inv_batch * g.params[i];
                log.loss_total += loss.value;
                log.loss_base += loss.components.base;
                log.loss_le += loss.components.le;
                log.loss_qu += loss.components.qu;
                ++drawn;
                lesion_draws += rec.max_lesion_prob > 0.5 ? 1 : 0;
            }
            adam_step(params, grads, state, lr, config.adam);
        }
        const double inv = 1.0 / static_cast<double>(drawn);
        log.loss_total *= inv;
        log.loss_base *= inv;
        log.loss_le *= inv;
        log.loss_qu *= inv;
        log.lesion_fraction = static_cast<double>(lesion_draws) * inv;

        if (val_set.empty()) {
            log.val_loss = log.loss_total;
        } else {
            double acc = 0.0;
            for (const auto& p : val_set)
                acc += combined_loss(forward(params, p.lc, edge), p.hc, p.prob, plan, config.loss).value;
            log.val_loss = acc / static_cast<double>(val_set.size());
        }
        if (!std::isfinite(log.val_loss))
            throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
        result.log.push_back(log);

        if (log.val_loss < best) {
            best = log.val_loss;
            wait = 0;
        } else if (++wait >= config.patience) {
            lr *= config.lr_decay;
            wait = 0;
        }
        if (lr < config.lr_min)
            break;
    }
    return result;
}

void write_train_log_csv(std::span<const EpochLog> log, std::ostream& out)
{
    using text::format_double;
    out << "epoch,lr,loss_total,loss_base,loss_le,loss_qu,val_loss,lesion_fraction\n";
    for (const auto& e : log)
        out << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.loss_total) << ',' << format_double(e.loss_base)
            << ',' << format_double(e.loss_le) << ',' << format_double(e.loss_qu) << ',' << format_double(e.val_loss) << ','
            << format_double(e.lesion_fraction) << '\n';
}

Volume denoise_volume(const ModelParams& params, const Volume& volume, const PatchGrid& grid)
{
    if (!(grid.dims == volume.dims()))
        throw DimensionError("grid dims " + to_string(grid.dims) + " differ from volume " + to_string(volume.dims()));
    std::vector<Patch> patches;
    patches.reserve(grid.origins.size());
    for (const Index3& o : grid.origins) {
        Patch p = extract_patch(volume, o, grid.patch_size);
        p.data = forward(params, p.data, grid.patch_size);
        patches.push_back(std::move(p));
    }
    Volume out = reassemble(patches, volume.dims(), volume.spacing());
    for (double& v : out.data())
        v = std::max(v, 0.0);
    return out;
}

// --- LQMP ----------------------------------------------------------------------

namespace {

constexpr char kCkptMagic[4] = {'L', 'Q', 'M', 'P'};
constexpr std::uint32_t kCkptVersion = 1;
constexpr std::size_t kCkptHeader = 4 + 4 + 4 + 8;

template <typename T>
void put_le(std::vector<char>& out, T v)
{
    for (std::size_t b = 0; b < sizeof(T); ++b)
        out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

template <typename T>
T get_le(std::span<const char> in, std::size_t off)
{
    T v = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b)
        v |= static_cast<T>(static_cast<unsigned char>(in[off + b])) << (8 * b);
    return v;
}

} // namespace

std::vector<char> encode_checkpoint(const ModelParams& params)
{
    if (params.values.size() != parameter_count(params.arch))
        throw DimensionError("parameter vector does not match architecture " + to_string(params.arch));
    std::vector<char> out;
    out.reserve(kCkptHeader + 8 * params.values.size());
    out.insert(out.end(), std::begin(kCkptMagic), std::end(kCkptMagic));
    put_le<std::uint32_t>(out, kCkptVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.arch));
    put_le<std::uint64_t>(out, params.values.size());
    for (double v : params.values)
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

ModelParams decode_checkpoint(std::span<const char> bytes)
{
    if (bytes.size() < kCkptHeader)
        throw FormatError("truncated checkpoint header", bytes.size());
    if (!std::equal(std::begin(kCkptMagic), std::end(kCkptMagic), bytes.begin()))
        throw FormatError("bad magic, expected LQMP", 0);
    if (const auto v = get_le<std::uint32_t>(bytes, 4); v != kCkptVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(v), 4);
    const auto tag = get_le<std::uint32_t>(bytes, 8);
    if (tag > 1)
        throw FormatError("unknown architecture tag " + std::to_string(tag), 8);
    ModelParams p{static_cast<Architecture>(tag), {}};
    const auto count = get_le<std::uint64_t>(bytes, 12);
    if (count != parameter_count(p.arch))
        throw FormatError("parameter count " + std::to_string(count) + " does not match " + to_string(p.arch), 12);
    if (bytes.size() != kCkptHeader + 8 * count)
        throw FormatError("checkpoint payload has wrong length", bytes.size());
    p.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        p.values[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, kCkptHeader + 8 * i));
        if (!std::isfinite(p.values[i]))
            throw FormatError("non-finite parameter", kCkptHeader + 8 * i);
    }
    return p;
}

void write_checkpoint(const ModelParams& params, const std::filesystem::path& path)
{
    const auto bytes = encode_checkpoint(params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("failed writing " + path.string());
}

ModelParams read_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

} // namespace leqmod
