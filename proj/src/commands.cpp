#include "leqmod/commands.hpp"

#include "leqmod/error.hpp"
#include "leqmod/qumod.hpp"
#include "leqmod/text.hpp"

#include <cmath>
#include <fstream>

namespace leqmod {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    return out;
}

std::string fmt(double v) { return text::format_double(v); }

} // namespace

const std::vector<ArmSpec>& ablation_arms()
{
    static const std::vector<ArmSpec> arms{
        {"Baseline", false, false},
        {"+LeMod", true, false},
        {"+QuMod", false, true},
        {"+LeqMod", true, true},
    };
    return arms;
}

void apply_toggles(RunConfig& config, bool lemod, bool qumod)
{
    config.set("sampling.weighted", lemod ? "true" : "false");
    config.set("loss.use_le", lemod ? "true" : "false");
    config.set("loss.use_qu", qumod ? "true" : "false");
}

std::vector<Subject> generate_cohort(const RunConfig& config)
{
    return generate_cohort(config.count("gen.subjects"), phantom_template(config), count_sim_config(config),
                           cohort_options(config));
}

std::vector<Subject> load_cohort(const RunConfig& config)
{
    return read_manifest(fs::path(config.get("path.data")) / kManifestName);
}

std::string cohort_hash(std::span<const Subject> cohort)
{
    std::uint64_t h = text::fnv1a("");
    const auto mix = [&](std::string_view bytes) { h = text::fnv1a(bytes, h); };
    const auto mix_volume = [&](const Volume& v) {
        const auto bytes = encode_volume(v);
        mix(std::string_view(bytes.data(), bytes.size()));
    };
    for (const auto& s : cohort) {
        mix(s.id);
        mix_volume(s.hc);
        for (const auto& [level, lc] : s.lc) {
            mix(fmt(level));
            mix_volume(lc);
        }
        mix_volume(s.oracle_prob.volume());
    }
    return text::hex64(h);
}

CohortParts partition(const RunConfig& config, std::span<const Subject> cohort)
{
    CohortParts p;
    p.split = split_cohort(cohort.size(), config.real("train.train_fraction"), config.real("train.val_fraction"));
    p.train = cohort.subspan(0, p.split.n_train);
    p.val = cohort.subspan(p.split.n_train, p.split.n_val);
    const std::string& which = config.get("eval.split");
    if (which == "test")
        p.eval = cohort.subspan(p.split.n_train + p.split.n_val);
    else if (which == "all")
        p.eval = cohort;
    else
        throw ConfigError("eval.split must be test or all, got '" + which + "'");
    return p;
}

PatchGrid patch_grid(const RunConfig& config, const Dims& dims)
{
    return build_patch_grid(dims, config.count("grid.patch"), config.count("grid.stride"));
}

TrainResult train_model(const RunConfig& config, std::span<const Subject> cohort)
{
    if (cohort.empty())
        throw TrainingError("empty cohort");
    const CohortParts parts = partition(config, cohort);
    const auto provider = make_provider(config.get("seg.provider"), config);
    TrainInputs in;
    in.train = parts.train;
    in.val = parts.val;
    in.provider = provider.get();
    in.grid = patch_grid(config, cohort.front().hc.dims());
    return train(in, train_config(config), sampling_config(config));
}

DenoisedSet denoise_subjects(const RunConfig& config, const ModelParams& params, std::span<const Subject> subjects)
{
    DenoisedSet out;
    for (const auto& s : subjects) {
        const PatchGrid grid = patch_grid(config, s.hc.dims());
        for (const auto& [level, lc] : s.lc) {
            Volume den = denoise_volume(params, lc, grid);
            round_to_storage(den);
            out.emplace(std::make_pair(s.id, level), std::move(den));
        }
    }
    return out;
}

CohortMetrics evaluate_subjects(const RunConfig& config, std::span<const Subject> subjects, const DenoisedSet& denoised)
{
    const auto labeler = make_provider(config.get("seg.provider"), config);
    const auto observer = make_provider(config.get("eval.observer"), config);
    return evaluate_cohort(subjects, denoised, *labeler, *observer, eval_config(config));
}

std::string denoised_name(const std::string& subject_id, double level)
{
    return subject_id + "_den" + level_tag(level) + ".lqmv";
}

std::vector<std::pair<double, double>> tlg_pairs(const CohortMetrics& metrics)
{
    std::vector<std::pair<double, double>> out;
    for (const auto& r : metrics.rows)
        if (r.biases.tlg_bias_pct)
            out.emplace_back(r.biases.tlg_den, r.biases.tlg_hc);
    return out;
}

// --- ablation ------------------------------------------------------------------

AblationReport run_ablation(const RunConfig& config, std::span<const Subject> cohort, std::ostream* progress)
{
    AblationReport report;
    report.cohort_hash = cohort_hash(cohort);
    const CohortParts parts = partition(config, cohort);
    for (const auto& arm : ablation_arms()) {
        RunConfig c = config;
        apply_toggles(c, arm.lemod, arm.qumod);
        if (progress)
            *progress << "[" << arm.name << "] training on " << parts.train.size() << " subjects" << std::endl;
        ArmResult r;
        r.arm = arm;
        r.cohort_hash = cohort_hash(cohort);
        r.training = train_model(c, cohort);
        if (progress)
            *progress << "[" << arm.name << "] " << r.training.log.size() << " epochs; evaluating " << parts.eval.size()
                      << " subjects" << std::endl;
        const DenoisedSet den = denoise_subjects(c, r.training.params, parts.eval);
        r.metrics = evaluate_subjects(c, parts.eval, den);
        report.arms.push_back(std::move(r));
    }
    return report;
}

namespace {

std::vector<std::optional<double>> row_values(const CohortMetrics& m, std::optional<double> (*get)(const SubjectMetrics&))
{
    std::vector<std::optional<double>> v;
    for (const auto& r : m.rows)
        v.push_back(get(r));
    return v;
}

// Per-row columns plus the per-lesion absolute SUV_max bias.
std::vector<std::pair<std::string, std::vector<std::optional<double>>>> ablation_columns(const CohortMetrics& m)
{
    std::vector<std::pair<std::string, std::vector<std::optional<double>>>> cols;
    cols.emplace_back("nrmse", row_values(m, [](const SubjectMetrics& r) -> std::optional<double> { return r.nrmse; }));
    cols.emplace_back("psnr_db", row_values(m, [](const SubjectMetrics& r) -> std::optional<double> { return r.psnr_db; }));
    cols.emplace_back("ssim", row_values(m, [](const SubjectMetrics& r) -> std::optional<double> { return r.ssim; }));
    cols.emplace_back("suv_mean_bias_pct",
                      row_values(m, [](const SubjectMetrics& r) -> std::optional<double> { return r.suv_mean_bias_pct; }));
    cols.emplace_back("suv_max_bias_pct",
                      row_values(m, [](const SubjectMetrics& r) -> std::optional<double> { return r.suv_max_bias_pct; }));
    cols.emplace_back("tlg_bias_pct",
                      row_values(m, [](const SubjectMetrics& r) -> std::optional<double> { return r.biases.tlg_bias_pct; }));
    for (std::size_t t = 0; t < m.tversky_pairs.size(); ++t) {
        std::vector<std::optional<double>> v;
        for (const auto& r : m.rows)
            v.emplace_back(r.tversky[t]);
        cols.emplace_back(tversky_column(m.tversky_pairs[t].first, m.tversky_pairs[t].second), std::move(v));
    }
    std::vector<std::optional<double>> lesion;
    for (const auto& r : m.rows)
        for (const auto& b : r.biases.lesions)
            lesion.emplace_back(std::abs(b.suv_max_bias_pct));
    cols.emplace_back("abs_suv_max_bias_pct", std::move(lesion));
    return cols;
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& v)
{
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& x : v)
        if (x && std::isfinite(*x)) {
            acc += *x;
            ++n;
        }
    if (n == 0)
        return std::nullopt;
    return acc / static_cast<double>(n);
}

std::optional<double> paired_p(const std::vector<std::optional<double>>& a, const std::vector<std::optional<double>>& b)
{
    if (a.size() != b.size())
        return std::nullopt;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] && b[i] && std::isfinite(*a[i]) && std::isfinite(*b[i])) {
            x.push_back(*a[i]);
            y.push_back(*b[i]);
        }
    try {
        return wilcoxon_signed_rank(x, y).p_value;
    } catch (const DomainError&) {
        return std::nullopt;
    }
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

} // namespace

void write_ablation_csv(const AblationReport& report, std::ostream& out)
{
    out << "# cohort_hash=" << report.cohort_hash << '\n';
    for (const auto& a : report.arms)
        out << "# arm=" << a.arm.name << " cohort_hash=" << a.cohort_hash << " epochs=" << a.training.log.size() << '\n';
    if (report.arms.empty())
        return;
    const auto base_cols = ablation_columns(report.arms.front().metrics);
    out << "arm,lemod,qumod";
    for (const auto& [name, v] : base_cols)
        out << ',' << name;
    for (const auto& [name, v] : base_cols)
        out << ",p_" << name;
    out << '\n';
    for (std::size_t i = 0; i < report.arms.size(); ++i) {
        const auto& a = report.arms[i];
        const auto cols = ablation_columns(a.metrics);
        out << a.arm.name << ',' << (a.arm.lemod ? 1 : 0) << ',' << (a.arm.qumod ? 1 : 0);
        for (const auto& [name, v] : cols)
            out << ',' << opt(mean_of(v));
        for (std::size_t c = 0; c < cols.size(); ++c)
            out << ',' << (i == 0 ? "NA" : opt(paired_p(cols[c].second, base_cols[c].second)));
        out << '\n';
    }
}

void write_bland_altman_csv(std::span<const std::pair<std::string, const CohortMetrics*>> runs, std::ostream& out)
{
    out << "run,subject,level,tlg_den,tlg_hc,mean,difference\n";
    for (const auto& [name, m] : runs)
        for (const auto& r : m->rows)
            if (r.biases.tlg_bias_pct)
                out << name << ',' << r.subject << ',' << fmt(r.level) << ',' << fmt(r.biases.tlg_den) << ','
                    << fmt(r.biases.tlg_hc) << ',' << fmt(0.5 * (r.biases.tlg_den + r.biases.tlg_hc)) << ','
                    << fmt(r.biases.tlg_den - r.biases.tlg_hc) << '\n';
}

void write_bland_altman_summary_csv(std::span<const std::pair<std::string, const CohortMetrics*>> runs, std::ostream& out)
{
    out << "run,n,mean_bias,sd,lower,upper\n";
    for (const auto& [name, m] : runs) {
        const auto pairs = tlg_pairs(*m);
        out << name << ',' << pairs.size();
        if (pairs.size() < 2) {
            out << ",NA,NA,NA,NA\n";
            continue;
        }
        const auto s = bland_altman(pairs);
        out << ',' << fmt(s.mean_bias) << ',' << fmt(s.sd) << ',' << fmt(s.lower) << ',' << fmt(s.upper) << '\n';
    }
}

// --- subcommands ---------------------------------------------------------------

void cmd_gen(const RunConfig& config, const fs::path& out)
{
    ensure_dir(out);
    write_manifest(generate_cohort(config), out);
    config.write_echo(out);
}

void cmd_train(const RunConfig& config, const fs::path& out, std::ostream* progress)
{
    const auto cohort = load_cohort(config);
    ensure_dir(out);
    config.write_echo(out);
    const CohortParts parts = partition(config, cohort);
    if (progress)
        *progress << "training on " << parts.train.size() << " subjects, validating on " << parts.val.size() << std::endl;

    {
        const auto provider = make_provider(config.get("seg.provider"), config);
        auto table = build_weight_table(parts.train, *provider, patch_grid(config, cohort.front().hc.dims()),
                                        sampling_config(config));
        if (!config.flag("sampling.weighted"))
            table = uniform_weights(std::move(table));
        auto w = open_out(out / kWeightsName);
        write_weight_table_csv(table, w);
    }

    const TrainResult result = train_model(config, cohort);
    write_checkpoint(result.params, out / kModelName);
    auto log = open_out(out / kTrainLogName);
    write_train_log_csv(result.log, log);
    if (progress)
        *progress << "trained " << result.log.size() << " epochs" << std::endl;
}

void cmd_denoise(const RunConfig& config, const fs::path& out)
{
    const auto cohort = load_cohort(config);
    const ModelParams params = read_checkpoint(config.get("path.model"));
    if (params.arch != parse_architecture(config.get("train.arch")))
        throw FormatError("checkpoint holds a " + to_string(params.arch) + " model but train.arch is " +
                              config.get("train.arch"),
                          8);
    ensure_dir(out);
    config.write_echo(out);
    const CohortParts parts = partition(config, cohort);
    for (const auto& [key, vol] : denoise_subjects(config, params, parts.eval))
        write_volume(vol, out / denoised_name(key.first, key.second));
}

void cmd_eval(const RunConfig& config, const fs::path& out)
{
    const auto cohort = load_cohort(config);
    const CohortParts parts = partition(config, cohort);
    const fs::path dir = config.get("path.denoised");
    DenoisedSet den;
    for (const auto& s : parts.eval)
        for (const auto& [level, lc] : s.lc) {
            const fs::path p = dir / denoised_name(s.id, level);
            if (!fs::exists(p))
                throw EvaluationError("no denoised volume for subject " + s.id + " at level " + fmt(level) + " (" +
                                      p.string() + ")");
            den.emplace(std::make_pair(s.id, level), read_volume(p));
        }
    const CohortMetrics m = evaluate_subjects(config, parts.eval, den);

    ensure_dir(out);
    config.write_echo(out);
    {
        auto f = open_out(out / kMetricsName);
        write_metrics_csv(m, f);
    }
    {
        auto f = open_out(out / kMetricsSummaryName);
        write_metrics_summary_csv(m, f);
    }
    const std::pair<std::string, const CohortMetrics*> run{"eval", &m};
    {
        auto f = open_out(out / kBlandAltmanName);
        write_bland_altman_csv({&run, 1}, f);
    }
    auto f = open_out(out / kBlandAltmanSummaryName);
    write_bland_altman_summary_csv({&run, 1}, f);
}

void cmd_ablate(const RunConfig& config, const fs::path& out, std::ostream* progress)
{
    const bool from_disk = fs::exists(fs::path(config.get("path.data")) / kManifestName);
    const auto cohort = from_disk ? load_cohort(config) : generate_cohort(config);
    if (progress)
        *progress << (from_disk ? "loaded " : "generated ") << cohort.size() << " subjects" << std::endl;
    ensure_dir(out);
    config.write_echo(out);
    const AblationReport report = run_ablation(config, cohort, progress);

    std::vector<std::pair<std::string, const CohortMetrics*>> runs;
    for (const auto& a : report.arms) {
        runs.emplace_back(a.arm.name, &a.metrics);
        const fs::path arm_dir = out / ("arm_" + a.arm.name.substr(a.arm.name[0] == '+' ? 1 : 0));
        ensure_dir(arm_dir);
        write_checkpoint(a.training.params, arm_dir / kModelName);
        auto log = open_out(arm_dir / kTrainLogName);
        write_train_log_csv(a.training.log, log);
        auto m = open_out(arm_dir / kMetricsName);
        write_metrics_csv(a.metrics, m);
    }
    {
        auto f = open_out(out / kAblationName);
        write_ablation_csv(report, f);
    }
    {
        auto f = open_out(out / kBlandAltmanName);
        write_bland_altman_csv(runs, f);
    }
    auto f = open_out(out / kBlandAltmanSummaryName);
    write_bland_altman_summary_csv(runs, f);
}

void cmd_plan_dump(const RunConfig& config, std::ostream& out)
{
    const TrainConfig t = train_config(config);
    write_plan(build_parcellation(config.count("grid.patch"), t.scale_weights), out);
}

} // namespace leqmod
