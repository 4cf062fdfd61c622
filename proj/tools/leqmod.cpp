// leqmod command-line front end.

#include "leqmod/commands.hpp"
#include "leqmod/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct CommonOptions {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::vector<std::string> sets;
    std::string data;
    std::string model;
    std::string denoised;
    std::optional<std::uint64_t> subjects;
    std::string levels;
    std::optional<std::uint64_t> patch;
    std::optional<std::uint64_t> stride;
    bool no_lemod = false;
    bool no_qumod = false;
    bool no_leqmod = false;
};

void add_common(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_option("--config", o.config_file, "key = value configuration file");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--set", o.sets, "override key=value (repeatable)");
    cmd->add_option("--data", o.data, "cohort directory holding manifest.txt");
    cmd->add_option("--model", o.model, "checkpoint path");
    cmd->add_option("--denoised", o.denoised, "directory of denoised volumes");
    cmd->add_option("--subjects", o.subjects, "cohort size");
    cmd->add_option("--levels", o.levels, "comma-separated count levels in percent");
    cmd->add_option("--patch", o.patch, "patch edge in voxels");
    cmd->add_option("--stride", o.stride, "patch stride in voxels");
}

void add_toggles(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_flag("--no-lemod", o.no_lemod, "uniform sampling, no lesion loss");
    cmd->add_flag("--no-qumod", o.no_qumod, "no quantification loss");
    cmd->add_flag("--no-leqmod", o.no_leqmod, "plain L2 baseline");
}

leqmod::RunConfig build_config(const CommonOptions& o)
{
    leqmod::RunConfig c;
    if (!o.config_file.empty())
        c.load_file(o.config_file);
    if (o.seed)
        c.set("seed", std::to_string(*o.seed));
    if (!o.data.empty())
        c.set("path.data", o.data);
    if (!o.model.empty())
        c.set("path.model", o.model);
    if (!o.denoised.empty())
        c.set("path.denoised", o.denoised);
    if (o.subjects)
        c.set("gen.subjects", std::to_string(*o.subjects));
    if (!o.levels.empty())
        c.set("sim.levels", o.levels);
    if (o.patch)
        c.set("grid.patch", std::to_string(*o.patch));
    if (o.stride)
        c.set("grid.stride", std::to_string(*o.stride));
    for (const auto& s : o.sets)
        c.set_assignment(s);
    if (o.no_lemod || o.no_qumod || o.no_leqmod) {
        const bool lemod = !(o.no_lemod || o.no_leqmod) && c.flag("loss.use_le");
        const bool qumod = !(o.no_qumod || o.no_leqmod) && c.flag("loss.use_qu");
        leqmod::apply_toggles(c, lemod, qumod);
    }
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"LeqMod: lesion- and quantification-aware low-count PET denoising"};
    app.require_subcommand(1);
    CommonOptions o;

    auto* gen = app.add_subcommand("gen", "generate a phantom cohort with simulated low-count images");
    auto* trn = app.add_subcommand("train", "train a denoiser on a generated cohort");
    auto* den = app.add_subcommand("denoise", "denoise held-out subjects with a checkpoint");
    auto* evl = app.add_subcommand("eval", "compute metrics for denoised volumes");
    auto* abl = app.add_subcommand("ablate", "run the four ablation arms end to end");
    auto* plan = app.add_subcommand("plan-dump", "print the parcellation plan");
    for (auto* cmd : {gen, trn, den, evl, abl, plan})
        add_common(cmd, o);
    add_toggles(trn, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(leqmod::ExitCode::usage);
    }

    try {
        const leqmod::RunConfig config = build_config(o);
        if (gen->parsed())
            leqmod::cmd_gen(config, o.out);
        else if (trn->parsed())
            leqmod::cmd_train(config, o.out, &std::cerr);
        else if (den->parsed())
            leqmod::cmd_denoise(config, o.out);
        else if (evl->parsed())
            leqmod::cmd_eval(config, o.out);
        else if (abl->parsed())
            leqmod::cmd_ablate(config, o.out, &std::cerr);
        else if (plan->parsed())
            leqmod::cmd_plan_dump(config, std::cout);
    } catch (const leqmod::Error& e) {
        std::cerr << "leqmod: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "leqmod: " << e.what() << '\n';
        return static_cast<int>(leqmod::ExitCode::data);
    }
    return 0;
}
