#pragma once

#include "leqmod/denoiser.hpp"
#include "leqmod/lemod.hpp"
#include "leqmod/metrics.hpp"
#include "leqmod/phantom.hpp"
#include "leqmod/seg.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace leqmod {

enum class ValueKind { real, count, flag, word, real_list, level_table };

struct ConfigKey {
    std::string key;
    ValueKind kind;
    std::string default_value;
    std::string doc;
};

/// Every recognised key with its default, in echo order.
const std::vector<ConfigKey>& config_keys();

/// Flat key=value run configuration. Values are validated on assignment;
/// unknown keys are rejected.
class RunConfig {
public:
    RunConfig();

    void set(const std::string& key, const std::string& value);
    /// Parses "key=value".
    void set_assignment(const std::string& assignment);
    /// `key = value` lines; '#' starts a comment.
    void load_file(const std::filesystem::path& path);

    const std::string& get(const std::string& key) const;
    double real(const std::string& key) const;
    std::uint64_t count(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<double> reals(const std::string& key) const;
    std::map<double, double> level_table(const std::string& key) const;

    /// Remarks about derived values, e.g. interpolated eta for untabulated levels.
    std::vector<std::string> notes() const;
    void write_echo(std::ostream& out) const;
    void write_echo(const std::filesystem::path& dir) const;

    const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    std::map<std::string, std::string> values_;
};

inline constexpr const char* kConfigEchoName = "config_echo.txt";

PhantomSpec phantom_template(const RunConfig& config);
CountSimConfig count_sim_config(const RunConfig& config);
CohortOptions cohort_options(const RunConfig& config);
SamplingConfig sampling_config(const RunConfig& config);
TrainConfig train_config(const RunConfig& config);
HeuristicConfig heuristic_config(const RunConfig& config);
EvalConfig eval_config(const RunConfig& config);

/// "oracle" or "heuristic".
std::unique_ptr<ProbMapProvider> make_provider(const std::string& name, const RunConfig& config);

} // namespace leqmod
