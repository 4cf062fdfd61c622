#include "leqmod/lemod.hpp"

#include "leqmod/error.hpp"
#include "leqmod/text.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>

namespace leqmod {

void SamplingConfig::validate() const
{
    if (!(w_min > 0.0 && w_min <= 1.0))
        throw ConfigError("w_min must lie in (0, 1]");
    if (eta_table.empty())
        throw ConfigError("eta table is empty");
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& [level, eta] : eta_table) {
        if (!(level > 0.0 && level <= 100.0))
            throw ConfigError("eta table level " + text::format_double(level) + " outside (0, 100]");
        if (!(eta > 0.0))
            throw ConfigError("eta must be positive");
        if (eta > prev)
            throw ConfigError("eta must be non-increasing in the count level");
        prev = eta;
    }
}

bool eta_is_tabulated(double count_level, const SamplingConfig& config) { return config.eta_table.count(count_level) != 0; }

double eta_for_level(double count_level, const SamplingConfig& config)
{
    if (!(count_level > 0.0))
        throw DomainError("count level must be positive");
    const auto& t = config.eta_table;
    if (t.empty())
        throw ConfigError("eta table is empty");
    if (count_level <= t.begin()->first)
        return t.begin()->second;
    if (count_level >= t.rbegin()->first)
        return t.rbegin()->second;
    const auto hi = t.lower_bound(count_level);
    if (hi->first == count_level)
        return hi->second;
    const auto lo = std::prev(hi);
    const double f = (std::log(count_level) - std::log(lo->first)) / (std::log(hi->first) - std::log(lo->first));
    return lo->second + f * (hi->second - lo->second);
}

double sampling_weight(double max_lesion_prob, double count_level, const SamplingConfig& config)
{
    if (!(max_lesion_prob >= 0.0 && max_lesion_prob <= 1.0))
        throw DomainError("lesion probability " + text::format_double(max_lesion_prob) + " outside [0,1]");
    return eta_for_level(count_level, config) * std::max(max_lesion_prob, config.w_min);
}

std::vector<TrainingPatchRecord> build_weight_table(std::span<const Subject> cohort, const ProbMapProvider& provider,
                                                    const PatchGrid& grid, const SamplingConfig& config)
{
    std::vector<TrainingPatchRecord> table;
    for (std::size_t s = 0; s < cohort.size(); ++s) {
        const Subject& subj = cohort[s];
        if (!(subj.hc.dims() == grid.dims))
            throw DimensionError("subject " + subj.id + " dims " + to_string(subj.hc.dims()) + " differ from grid " +
                                 to_string(grid.dims));
        const LesionProbMap prob = provider.probmap(subj, subj.hc);
        if (!(prob.dims() == subj.hc.dims()))
            throw DimensionError("provider map dims differ from subject " + subj.id);

        std::vector<double> max_prob;
        max_prob.reserve(grid.origins.size());
        for (const Index3& o : grid.origins) {
            const Patch p = extract_patch(prob.volume(), o, grid.patch_size);
            max_prob.push_back(*std::max_element(p.data.begin(), p.data.end()));
        }
        for (const auto& [level, lc] : subj.lc) {
            for (std::size_t k = 0; k < grid.origins.size(); ++k) {
                TrainingPatchRecord r;
                r.subject = s;
                r.subject_id = subj.id;
                r.origin = grid.origins[k];
                r.count_level = level;
                r.max_lesion_prob = max_prob[k];
                r.weight = sampling_weight(max_prob[k], level, config);
                table.push_back(std::move(r));
            }
        }
    }
    return table;
}

std::vector<TrainingPatchRecord> uniform_weights(std::vector<TrainingPatchRecord> table)
{
    for (auto& r : table)
        r.weight = 1.0;
    return table;
}

void write_weight_table_csv(std::span<const TrainingPatchRecord> table, std::ostream& out)
{
    out << "subject,level,origin_x,origin_y,origin_z,prob,weight\n";
    for (const auto& r : table)
        out << r.subject_id << ',' << text::format_double(r.count_level) << ',' << r.origin.x << ',' << r.origin.y << ','
            << r.origin.z << ',' << text::format_double(r.max_lesion_prob) << ',' << text::format_double(r.weight) << '\n';
}

// --- sampler -----------------------------------------------------------------

WeightedSampler::WeightedSampler(std::span<const TrainingPatchRecord> table)
{
    std::vector<double> w;
    w.reserve(table.size());
    for (const auto& r : table)
        w.push_back(r.weight);
    build(w);
}

WeightedSampler::WeightedSampler(std::span<const double> weights) { build(weights); }

void WeightedSampler::build(std::span<const double> weights)
{
    if (weights.empty())
        throw DomainError("cannot sample from an empty table");
    cumulative_.resize(weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
            throw DomainError("sampling weight " + std::to_string(i) + " must be positive and finite");
        acc += weights[i];
        cumulative_[i] = acc;
    }
}

std::size_t WeightedSampler::draw(Rng& rng) const
{
    const double u = uniform01(rng) * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
}

std::vector<std::size_t> WeightedSampler::draw(std::size_t count, Rng& rng) const
{
    std::vector<std::size_t> out(count);
    for (auto& i : out)
        i = draw(rng);
    return out;
}

double WeightedSampler::probability(std::size_t i) const
{
    const double lo = i == 0 ? 0.0 : cumulative_[i - 1];
    return (cumulative_[i] - lo) / cumulative_.back();
}

std::vector<std::size_t> sample_batch(std::span<const TrainingPatchRecord> table, std::size_t batch_size, Rng& rng)
{
    if (batch_size == 0)
        return {};
    return WeightedSampler(table).draw(batch_size, rng);
}

// --- lesion loss ---------------------------------------------------------------

LeLossResult le_loss(std::span<const double> den, std::span<const double> hc, std::span<const double> prob,
                     LesionNormalizer normalizer)
{
    if (den.size() != hc.size() || den.size() != prob.size())
        throw DimensionError("lesion loss inputs differ in size (" + std::to_string(den.size()) + ", " +
                             std::to_string(hc.size()) + ", " + std::to_string(prob.size()) + ")");
    double norm = 0.0;
    if (normalizer == LesionNormalizer::soft) {
        for (double p : prob)
            norm += p;
        norm = std::max(norm, kLeLossEpsilon);
    } else {
        for (double p : prob)
            norm += p > 0.5 ? 1.0 : 0.0;
        norm = std::max(norm, 1.0);
    }

    LeLossResult r;
    r.grad.assign(den.size(), 0.0);
    double acc = 0.0;
    for (std::size_t j = 0; j < den.size(); ++j) {
        if (prob[j] == 0.0)
            continue;
        const double d = den[j] - hc[j];
        acc += prob[j] * std::abs(d);
        const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        r.grad[j] = prob[j] * sgn / norm;
    }
    r.value = acc / norm;
    return r;
}

} // namespace leqmod
