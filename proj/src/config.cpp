#include "leqmod/config.hpp"

#include "leqmod/error.hpp"
#include "leqmod/text.hpp"

#include <cmath>
#include <fstream>

namespace leqmod {

const std::vector<ConfigKey>& config_keys()
{
    using K = ValueKind;
    static const std::vector<ConfigKey> keys{
        {"seed", K::count, "0", "master seed for cohort, initialisation and sampling"},
        {"path.data", K::word, ".", "directory holding manifest.txt"},
        {"path.model", K::word, "model.lqmp", "checkpoint read by denoise"},
        {"path.denoised", K::word, ".", "directory holding denoised volumes read by eval"},

        {"gen.subjects", K::count, "10", "cohort size"},
        {"gen.dims", K::real_list, "64,64,64", "volume dims in voxels"},
        {"gen.voxel_mm", K::real, "2", "isotropic voxel size"},
        {"gen.background_suv", K::real, "1", "background uptake"},
        {"gen.edge_ramp", K::flag, "true", "one-voxel linear lesion falloff"},
        {"gen.lesion_free_fraction", K::real, "0.3", "share of subjects without lesions"},
        {"gen.max_lesions", K::count, "5", "lesions per lesion-bearing subject, upper bound"},
        {"gen.lesion_radius_min_mm", K::real, "3", ""},
        {"gen.lesion_radius_max_mm", K::real, "6", ""},
        {"gen.lesion_suv_min", K::real, "3", ""},
        {"gen.lesion_suv_max", K::real, "8", ""},
        {"gen.max_retries", K::count, "200", "placement attempts per lesion"},

        {"sim.sensitivity", K::real, "100", "expected counts per SUV per voxel at full count"},
        {"sim.levels", K::real_list, "5", "low-count levels in percent"},
        {"sim.smoothing_fwhm_mm", K::real, "2", "post-simulation Gaussian FWHM, 0 disables"},

        {"grid.patch", K::count, "32", "patch edge in voxels"},
        {"grid.stride", K::count, "8", "patch stride in voxels"},

        {"sampling.weighted", K::flag, "true", "lesion-perceived patch sampling; false samples uniformly"},
        {"sampling.w_min", K::real, "0.3", "floor on patch lesion probability"},
        {"sampling.eta", K::level_table, "1:0.35,2:0.25,5:0.15,10:0.12,25:0.08,50:0.05", "noise-aware factor per level"},

        {"loss.use_base", K::flag, "true", ""},
        {"loss.use_le", K::flag, "true", ""},
        {"loss.use_qu", K::flag, "true", ""},
        {"loss.lambda_le", K::real, "0.15", ""},
        {"loss.lambda_qu", K::real, "0.5", ""},
        {"loss.le_normalizer", K::word, "soft", "soft (sum of p) or hard (count of p > 0.5)"},
        {"qu.mu", K::real_list, "0.03,0.07,0.15,0.75", "per-scale weights, finest last"},

        {"train.arch", K::word, "convnet", "convnet or linfilter"},
        {"train.lr0", K::real, "1e-4", ""},
        {"train.lr_decay", K::real, "0.1", ""},
        {"train.patience", K::count, "5", "epochs without validation improvement before decay"},
        {"train.lr_min", K::real, "1e-7", "stop once lr falls below"},
        {"train.batch", K::count, "4", ""},
        {"train.max_epochs", K::count, "100", ""},
        {"train.epoch_samples", K::count, "0", "patches per epoch, 0 = weight table size"},
        {"train.val_patches", K::count, "64", "fixed validation patches, 0 = all"},
        {"train.train_fraction", K::real, "0.6", ""},
        {"train.val_fraction", K::real, "0.2", ""},
        {"adam.beta1", K::real, "0.9", ""},
        {"adam.beta2", K::real, "0.999", ""},
        {"adam.epsilon", K::real, "1e-8", ""},

        {"seg.provider", K::word, "oracle", "probability maps for sampling, losses and lesion labels"},
        {"seg.oracle_blur_fwhm_mm", K::real, "0", ""},
        {"seg.threshold", K::real, "0.5", "binarisation threshold"},
        {"heur.smoothing_fwhm_mm", K::real, "4", ""},
        {"heur.z0", K::real, "4", ""},
        {"heur.tau", K::real, "1", ""},
        {"heur.min_voxels", K::count, "3", ""},

        {"eval.observer", K::word, "heuristic", "segmenter for lesion visibility"},
        {"eval.split", K::word, "test", "subjects denoised and evaluated: test or all"},
        {"eval.tversky", K::real_list, "0.3,0.7,0.5,0.5,0.7,0.3", "alpha,beta pairs"},
        {"eval.ssim_window", K::count, "7", ""},
    };
    return keys;
}

namespace {

const ConfigKey& find_key(const std::string& key)
{
    for (const auto& k : config_keys())
        if (k.key == key)
            return k;
    throw ConfigError("unknown key '" + key + "'");
}

std::map<double, double> parse_table(std::string_view s, std::string_view what)
{
    std::map<double, double> t;
    for (const auto& item : text::split(s, ',')) {
        const auto parts = text::split(item, ':');
        if (parts.size() != 2)
            throw ConfigError(std::string(what) + ": expected level:value pairs, got '" + item + "'");
        const double level = text::parse_double(parts[0], what);
        if (!t.emplace(level, text::parse_double(parts[1], what)).second)
            throw ConfigError(std::string(what) + ": duplicate level " + text::format_double(level));
    }
    return t;
}

void validate(const ConfigKey& k, const std::string& value)
{
    switch (k.kind) {
    case ValueKind::real: text::parse_double(value, k.key); break;
    case ValueKind::count: text::parse_u64(value, k.key); break;
    case ValueKind::flag: text::parse_bool(value, k.key); break;
    case ValueKind::word:
        if (value.empty())
            throw ConfigError(k.key + " must not be empty");
        break;
    case ValueKind::real_list: text::parse_double_list(value, k.key); break;
    case ValueKind::level_table: parse_table(value, k.key); break;
    }
}

} // namespace

RunConfig::RunConfig()
{
    for (const auto& k : config_keys())
        values_[k.key] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value)
{
    const ConfigKey& k = find_key(key);
    const std::string v(text::trim(value));
    validate(k, v);
    values_[key] = v;
}

void RunConfig::set_assignment(const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("expected key=value, got '" + assignment + "'");
    set(std::string(text::trim(std::string_view(assignment).substr(0, eq))), assignment.substr(eq + 1));
}

void RunConfig::load_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        if (text::trim(line).empty())
            continue;
        try {
            set_assignment(line);
        } catch (const ConfigError& e) {
            std::string msg = e.what();
            if (const auto colon = msg.find(": "); colon != std::string::npos)
                msg.erase(0, colon + 2);
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
        }
    }
}

const std::string& RunConfig::get(const std::string& key) const
{
    const auto it = values_.find(key);
    if (it == values_.end())
        throw ConfigError("unknown key '" + key + "'");
    return it->second;
}

double RunConfig::real(const std::string& key) const { return text::parse_double(get(key), key); }
std::uint64_t RunConfig::count(const std::string& key) const { return text::parse_u64(get(key), key); }
bool RunConfig::flag(const std::string& key) const { return text::parse_bool(get(key), key); }
std::vector<double> RunConfig::reals(const std::string& key) const { return text::parse_double_list(get(key), key); }
std::map<double, double> RunConfig::level_table(const std::string& key) const { return parse_table(get(key), key); }

std::vector<std::string> RunConfig::notes() const
{
    std::vector<std::string> out;
    const SamplingConfig s = sampling_config(*this);
    for (double level : reals("sim.levels"))
        if (!eta_is_tabulated(level, s))
            out.push_back("count level " + text::format_double(level) + " is not in sampling.eta; eta = " +
                          text::format_double(eta_for_level(level, s)) + " by log-level interpolation");
    return out;
}

void RunConfig::write_echo(std::ostream& out) const
{
    out << "# leqmod effective configuration\n";
    for (const auto& n : notes())
        out << "# note: " << n << '\n';
    for (const auto& k : config_keys()) {
        out << k.key << " = " << values_.at(k.key);
        if (!k.doc.empty())
            out << "  # " << k.doc;
        out << '\n';
    }
}

void RunConfig::write_echo(const std::filesystem::path& dir) const
{
    const auto path = dir / kConfigEchoName;
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    write_echo(out);
}

PhantomSpec phantom_template(const RunConfig& c)
{
    const auto d = c.reals("gen.dims");
    if (d.size() != 3)
        throw ConfigError("gen.dims needs three values");
    Dims dims{};
    for (int a = 0; a < 3; ++a) {
        if (!(d[a] >= 1.0) || d[a] != std::floor(d[a]))
            throw ConfigError("gen.dims must be positive integers");
    }
    dims = {static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]), static_cast<std::size_t>(d[2])};
    const double v = c.real("gen.voxel_mm");
    if (!(v > 0.0))
        throw ConfigError("gen.voxel_mm must be positive");
    PhantomSpec spec = default_phantom_template(dims, {v, v, v}, c.real("gen.background_suv"));
    spec.edge_ramp = c.flag("gen.edge_ramp");
    spec.seed = c.count("seed");
    return spec;
}

CountSimConfig count_sim_config(const RunConfig& c)
{
    CountSimConfig s;
    s.sensitivity = c.real("sim.sensitivity");
    s.count_levels = c.reals("sim.levels");
    s.smoothing_fwhm_mm = c.real("sim.smoothing_fwhm_mm");
    s.seed = c.count("seed");
    return s;
}

CohortOptions cohort_options(const RunConfig& c)
{
    CohortOptions o;
    o.lesion_free_fraction = c.real("gen.lesion_free_fraction");
    o.max_lesions = c.count("gen.max_lesions");
    o.lesion_radius_min_mm = c.real("gen.lesion_radius_min_mm");
    o.lesion_radius_max_mm = c.real("gen.lesion_radius_max_mm");
    o.lesion_suv_min = c.real("gen.lesion_suv_min");
    o.lesion_suv_max = c.real("gen.lesion_suv_max");
    o.max_retries = c.count("gen.max_retries");
    return o;
}

SamplingConfig sampling_config(const RunConfig& c)
{
    SamplingConfig s;
    s.w_min = c.real("sampling.w_min");
    s.eta_table = c.level_table("sampling.eta");
    s.validate();
    return s;
}

TrainConfig train_config(const RunConfig& c)
{
    TrainConfig t;
    t.arch = parse_architecture(c.get("train.arch"));
    t.loss.use_base = c.flag("loss.use_base");
    t.loss.use_le = c.flag("loss.use_le");
    t.loss.use_qu = c.flag("loss.use_qu");
    t.loss.lambda_le = c.real("loss.lambda_le");
    t.loss.lambda_qu = c.real("loss.lambda_qu");
    if (t.loss.lambda_le < 0.0 || t.loss.lambda_qu < 0.0)
        throw ConfigError("loss weights must be non-negative");
    const std::string& norm = c.get("loss.le_normalizer");
    if (norm == "soft")
        t.loss.normalizer = LesionNormalizer::soft;
    else if (norm == "hard")
        t.loss.normalizer = LesionNormalizer::hard;
    else
        throw ConfigError("loss.le_normalizer must be soft or hard, got '" + norm + "'");
    const auto mu = c.reals("qu.mu");
    if (mu.size() != 4)
        throw ConfigError("qu.mu needs four weights");
    std::copy(mu.begin(), mu.end(), t.scale_weights.begin());
    t.adam.beta1 = c.real("adam.beta1");
    t.adam.beta2 = c.real("adam.beta2");
    t.adam.epsilon = c.real("adam.epsilon");
    t.lr0 = c.real("train.lr0");
    t.lr_decay = c.real("train.lr_decay");
    t.patience = c.count("train.patience");
    t.lr_min = c.real("train.lr_min");
    t.batch_size = c.count("train.batch");
    t.max_epochs = c.count("train.max_epochs");
    t.epoch_samples = c.count("train.epoch_samples");
    t.val_patches = c.count("train.val_patches");
    t.weighted_sampling = c.flag("sampling.weighted");
    t.seed = c.count("seed");
    return t;
}

HeuristicConfig heuristic_config(const RunConfig& c)
{
    HeuristicConfig h;
    h.smoothing_fwhm_mm = c.real("heur.smoothing_fwhm_mm");
    h.z0 = c.real("heur.z0");
    h.tau = c.real("heur.tau");
    h.min_voxels = c.count("heur.min_voxels");
    return h;
}

EvalConfig eval_config(const RunConfig& c)
{
    EvalConfig e;
    const auto t = c.reals("eval.tversky");
    if (t.empty() || t.size() % 2 != 0)
        throw ConfigError("eval.tversky needs alpha,beta pairs");
    e.tversky_pairs.clear();
    for (std::size_t i = 0; i < t.size(); i += 2)
        e.tversky_pairs.emplace_back(t[i], t[i + 1]);
    e.threshold = c.real("seg.threshold");
    e.ssim_window = c.count("eval.ssim_window");
    return e;
}

std::unique_ptr<ProbMapProvider> make_provider(const std::string& name, const RunConfig& c)
{
    if (name == "oracle")
        return std::make_unique<OracleProvider>(c.real("seg.oracle_blur_fwhm_mm"));
    if (name == "heuristic")
        return std::make_unique<HeuristicProvider>(heuristic_config(c));
    throw ConfigError("unknown probability-map provider '" + name + "' (expected oracle or heuristic)");
}

} // namespace leqmod
