#include "leqmod/metrics.hpp"

#include "leqmod/error.hpp"
#include "leqmod/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace leqmod {

namespace {

void check_same(std::span<const double> a, std::span<const double> b, const char* what)
{
    if (a.size() != b.size() || a.empty())
        throw DimensionError(std::string(what) + " inputs have " + std::to_string(a.size()) + " and " +
                             std::to_string(b.size()) + " values");
}

void check_same(const Volume& a, const Volume& b, const char* what)
{
    if (!(a.dims() == b.dims()))
        throw DimensionError(std::string(what) + " inputs have dims " + to_string(a.dims()) + " and " + to_string(b.dims()));
}

double mse(std::span<const double> test, std::span<const double> ref)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = test[i] - ref[i];
        acc += d * d;
    }
    return acc / static_cast<double>(ref.size());
}

// Sum over every length-w window along one axis; the output shrinks along it.
std::vector<double> box_axis(const std::vector<double>& in, const Dims& d, int axis, std::size_t w, Dims& out_dims)
{
    out_dims = d;
    std::size_t& n = axis == 0 ? out_dims.nx : axis == 1 ? out_dims.ny : out_dims.nz;
    n = n - w + 1;
    const std::size_t step = axis == 0 ? 1 : axis == 1 ? d.nx : d.nx * d.ny;
    std::vector<double> out(out_dims.count());
    std::size_t o = 0;
    for (std::size_t z = 0; z < out_dims.nz; ++z)
        for (std::size_t y = 0; y < out_dims.ny; ++y)
            for (std::size_t x = 0; x < out_dims.nx; ++x) {
                const double* p = in.data() + d.index(x, y, z);
                double acc = 0.0;
                for (std::size_t k = 0; k < w; ++k)
                    acc += p[k * step];
                out[o++] = acc;
            }
    return out;
}

std::vector<double> box_sum(std::vector<double> v, const Dims& d, std::size_t w)
{
    Dims cur = d, next;
    for (int axis = 0; axis < 3; ++axis) {
        v = box_axis(v, cur, axis, w, next);
        cur = next;
    }
    return v;
}

struct Stat {
    double mean = 0.0;
    std::optional<double> sd;
    std::size_t n = 0;
};

Stat stat_of(const std::vector<double>& v)
{
    Stat s;
    s.n = v.size();
    if (v.empty())
        return s;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() >= 2) {
        double acc = 0.0;
        for (double x : v)
            acc += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
    }
    return s;
}

std::string fmt(double v) { return text::format_double(v); }
std::string fmt(const std::optional<double>& v) { return v ? text::format_double(*v) : "NA"; }

} // namespace

double nrmse(std::span<const double> test, std::span<const double> ref)
{
    check_same(test, ref, "nrmse");
    const double mean = std::accumulate(ref.begin(), ref.end(), 0.0) / static_cast<double>(ref.size());
    if (!(mean > 0.0))
        throw DomainError("nrmse reference mean must be positive, got " + fmt(mean));
    return std::sqrt(mse(test, ref)) / mean;
}

double nrmse(const Volume& test, const Volume& ref)
{
    check_same(test, ref, "nrmse");
    return nrmse(test.data(), ref.data());
}

double psnr(std::span<const double> test, std::span<const double> ref)
{
    check_same(test, ref, "psnr");
    const double e = mse(test, ref);
    if (e == 0.0)
        return std::numeric_limits<double>::infinity();
    const double peak = *std::max_element(ref.begin(), ref.end());
    return 20.0 * std::log10(peak) - 10.0 * std::log10(e);
}

double psnr(const Volume& test, const Volume& ref)
{
    check_same(test, ref, "psnr");
    return psnr(test.data(), ref.data());
}

double ssim(const Volume& test, const Volume& ref, std::size_t window)
{
    check_same(test, ref, "ssim");
    const Dims d = ref.dims();
    if (window == 0 || d.nx < window || d.ny < window || d.nz < window)
        throw DomainError("ssim window " + std::to_string(window) + " exceeds volume " + to_string(d));
    const auto x = test.data();
    const auto y = ref.data();
    const double peak = *std::max_element(y.begin(), y.end());
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    const std::size_t n = d.count();
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto sx = box_sum({x.begin(), x.end()}, d, window);
    const auto sy = box_sum({y.begin(), y.end()}, d, window);
    const auto sxx = box_sum(std::move(xx), d, window);
    const auto syy = box_sum(std::move(yy), d, window);
    const auto sxy = box_sum(std::move(xy), d, window);

    const double inv = 1.0 / static_cast<double>(window * window * window);
    double acc = 0.0;
    for (std::size_t i = 0; i < sx.size(); ++i) {
        const double mx = sx[i] * inv, my = sy[i] * inv;
        const double vx = sxx[i] * inv - mx * mx;
        const double vy = syy[i] * inv - my * my;
        const double cxy = sxy[i] * inv - mx * my;
        acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    return acc / static_cast<double>(sx.size());
}

QuantificationBiases quantification_biases(const Volume& den, const Volume& hc, std::span<const LesionInstance> instances)
{
    check_same(den, hc, "quantification");
    const std::vector<LesionInstance> base(instances.begin(), instances.end());
    const auto qd = quantify_lesions(base, den);
    const auto qh = quantify_lesions(base, hc);
    QuantificationBiases r;
    for (std::size_t i = 0; i < base.size(); ++i) {
        r.tlg_den += qd[i].volume_mm3 * qd[i].suv_mean;
        r.tlg_hc += qh[i].volume_mm3 * qh[i].suv_mean;
        if (qh[i].suv_mean == 0.0 || qh[i].suv_max == 0.0) {
            r.warnings.push_back("lesion " + std::to_string(qh[i].label) + " skipped: reference SUV is 0");
            continue;
        }
        LesionBias b;
        b.label = qh[i].label;
        b.suv_mean_bias_pct = 100.0 * (qd[i].suv_mean - qh[i].suv_mean) / qh[i].suv_mean;
        b.suv_max_bias_pct = 100.0 * (qd[i].suv_max - qh[i].suv_max) / qh[i].suv_max;
        r.lesions.push_back(b);
    }
    if (!base.empty()) {
        if (r.tlg_hc != 0.0)
            r.tlg_bias_pct = 100.0 * (r.tlg_den - r.tlg_hc) / r.tlg_hc;
        else
            r.warnings.push_back("TLG bias undefined: reference TLG is 0");
    }
    return r;
}

double tversky(const Mask& den, const Mask& hc, double alpha, double beta)
{
    if (!(den.dims == hc.dims))
        throw DimensionError("tversky masks have dims " + to_string(den.dims) + " and " + to_string(hc.dims));
    if (!(alpha >= 0.0 && beta >= 0.0))
        throw DomainError("tversky weights must be non-negative");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < den.data.size(); ++i) {
        const bool a = den.data[i] != 0, b = hc.data[i] != 0;
        tp += a && b;
        fp += a && !b;
        fn += !a && b;
    }
    if (tp + fp + fn == 0)
        return 1.0;
    const double t = static_cast<double>(tp);
    const double denom = t + alpha * static_cast<double>(fp) + beta * static_cast<double>(fn);
    return denom == 0.0 ? 0.0 : t / denom;
}

double dice(const Mask& a, const Mask& b) { return tversky(a, b, 0.5, 0.5); }

BlandAltmanSummary bland_altman(std::span<const std::pair<double, double>> pairs)
{
    if (pairs.size() < 2)
        throw DomainError("Bland-Altman analysis needs at least 2 pairs, got " + std::to_string(pairs.size()));
    BlandAltmanSummary s;
    for (const auto& [test, ref] : pairs) {
        s.means.push_back(0.5 * (test + ref));
        s.differences.push_back(test - ref);
    }
    const Stat st = stat_of(s.differences);
    s.mean_bias = st.mean;
    s.sd = *st.sd;
    s.lower = s.mean_bias - kBlandAltmanZ * s.sd;
    s.upper = s.mean_bias + kBlandAltmanZ * s.sd;
    return s;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw DimensionError("paired samples differ in size (" + std::to_string(a.size()) + ", " + std::to_string(b.size()) +
                             ")");
    std::vector<double> diff;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (!std::isfinite(d))
            throw DomainError("non-finite paired difference at index " + std::to_string(i));
        if (d != 0.0)
            diff.push_back(d);
    }
    WilcoxonResult r;
    r.n = diff.size();
    if (r.n == 0) {
        r.degenerate = true;
        return r;
    }
    if (r.n < 5)
        throw DomainError("signed-rank test needs at least 5 non-zero differences, got " + std::to_string(r.n));

    std::vector<std::size_t> order(r.n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(diff[i]) < std::abs(diff[j]); });
    // Doubled average ranks stay integral.
    std::vector<std::size_t> rank2(r.n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < r.n;) {
        std::size_t j = i;
        while (j + 1 < r.n && std::abs(diff[order[j + 1]]) == std::abs(diff[order[i]]))
            ++j;
        for (std::size_t k = i; k <= j; ++k)
            rank2[order[k]] = (i + 1) + (j + 1);
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    std::size_t w2 = 0;
    for (std::size_t i = 0; i < r.n; ++i)
        if (diff[i] > 0.0)
            w2 += rank2[i];
    r.statistic = 0.5 * static_cast<double>(w2);

    const double n = static_cast<double>(r.n);
    if (r.n <= kWilcoxonExactMax) {
        r.exact = true;
        const std::size_t total = std::accumulate(rank2.begin(), rank2.end(), std::size_t{0});
        std::vector<double> count(total + 1, 0.0);
        count[0] = 1.0;
        std::size_t reach = 0;
        for (std::size_t rk : rank2) {
            for (std::size_t s = reach + 1; s-- > 0;)
                count[s + rk] += count[s];
            reach += rk;
        }
        double lo = 0.0, hi = 0.0;
        for (std::size_t s = 0; s <= total; ++s) {
            if (s <= w2)
                lo += count[s];
            if (s >= w2)
                hi += count[s];
        }
        const double all = std::ldexp(1.0, static_cast<int>(r.n));
        r.p_value = std::min(1.0, 2.0 * std::min(lo, hi) / all);
        return r;
    }
    const double mean = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if (!(var > 0.0)) {
        r.degenerate = true;
        return r;
    }
    const double z = std::max(0.0, std::abs(r.statistic - mean) - 0.5) / std::sqrt(var);
    r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return r;
}

CohortMetrics evaluate_cohort(std::span<const Subject> cohort, const DenoisedSet& denoised, const ProbMapProvider& labeler,
                              const ProbMapProvider& observer, const EvalConfig& config)
{
    CohortMetrics out;
    out.tversky_pairs = config.tversky_pairs;
    for (const Subject& subj : cohort) {
        const Spacing spacing = subj.hc.spacing();
        auto lesions = connected_components(binarize(labeler.probmap(subj, subj.hc), config.threshold), spacing);
        const Mask hc_mask = binarize(observer.probmap(subj, subj.hc), config.threshold);
        for (const auto& [level, lc] : subj.lc) {
            const auto it = denoised.find({subj.id, level});
            if (it == denoised.end())
                throw EvaluationError("no denoised volume for subject " + subj.id + " at level " + fmt(level));
            const Volume& den = it->second;
            check_same(den, subj.hc, "evaluation");

            SubjectMetrics m;
            m.subject = subj.id;
            m.level = level;
            m.nrmse = nrmse(den, subj.hc);
            m.psnr_db = psnr(den, subj.hc);
            m.ssim = ssim(den, subj.hc, config.ssim_window);
            m.n_lesions = lesions.size();
            m.biases = quantification_biases(den, subj.hc, lesions);
            if (!m.biases.lesions.empty()) {
                double sm = 0.0, sx = 0.0;
                for (const auto& b : m.biases.lesions) {
                    sm += b.suv_mean_bias_pct;
                    sx += b.suv_max_bias_pct;
                }
                const double k = static_cast<double>(m.biases.lesions.size());
                m.suv_mean_bias_pct = sm / k;
                m.suv_max_bias_pct = sx / k;
            }
            const Mask den_mask = binarize(observer.probmap(subj, den), config.threshold);
            for (const auto& [alpha, beta] : config.tversky_pairs)
                m.tversky.push_back(tversky(den_mask, hc_mask, alpha, beta));
            out.rows.push_back(std::move(m));
        }
    }
    return out;
}

std::string tversky_column(double alpha, double beta)
{
    if (alpha == 0.5 && beta == 0.5)
        return "dice";
    const auto tag = [](double v) {
        const double tenths = v * 10.0;
        if (tenths == std::round(tenths) && v >= 0.0 && v < 1.0)
            return "0" + std::to_string(static_cast<int>(std::round(tenths)));
        std::string s = text::format_double(v);
        std::replace(s.begin(), s.end(), '.', 'p');
        return s;
    };
    return "tversky_" + tag(alpha) + "_" + tag(beta);
}

namespace {

std::vector<std::string> metric_columns(const CohortMetrics& m)
{
    std::vector<std::string> cols{"nrmse", "psnr_db", "ssim", "ssim_x100", "n_lesions", "suv_mean_bias_pct",
                                  "suv_max_bias_pct", "tlg_bias_pct"};
    for (const auto& [a, b] : m.tversky_pairs)
        cols.push_back(tversky_column(a, b));
    return cols;
}

std::vector<std::optional<double>> metric_values(const SubjectMetrics& r)
{
    std::vector<std::optional<double>> v{r.nrmse,
                                         r.psnr_db,
                                         r.ssim,
                                         100.0 * r.ssim,
                                         static_cast<double>(r.n_lesions),
                                         r.suv_mean_bias_pct,
                                         r.suv_max_bias_pct,
                                         r.biases.tlg_bias_pct};
    for (double t : r.tversky)
        v.emplace_back(t);
    return v;
}

} // namespace

void write_metrics_csv(const CohortMetrics& metrics, std::ostream& out)
{
    out << "subject,level";
    for (const auto& c : metric_columns(metrics))
        out << ',' << c;
    out << '\n';
    for (const auto& r : metrics.rows) {
        out << r.subject << ',' << fmt(r.level);
        for (const auto& v : metric_values(r))
            out << ',' << fmt(v);
        out << '\n';
    }
}

void write_metrics_summary_csv(const CohortMetrics& metrics, std::ostream& out)
{
    const auto cols = metric_columns(metrics);
    out << "level,stat";
    for (const auto& c : cols)
        out << ',' << c;
    out << '\n';
    std::map<double, std::vector<const SubjectMetrics*>> by_level;
    for (const auto& r : metrics.rows)
        by_level[r.level].push_back(&r);
    for (const auto& [level, rows] : by_level) {
        std::vector<Stat> stats;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            std::vector<double> v;
            for (const auto* r : rows)
                if (const auto x = metric_values(*r)[c]; x && std::isfinite(*x))
                    v.push_back(*x);
            stats.push_back(stat_of(v));
        }
        out << fmt(level) << ",mean";
        for (const auto& s : stats)
            out << ',' << (s.n ? fmt(s.mean) : "NA");
        out << '\n' << fmt(level) << ",sd";
        for (const auto& s : stats)
            out << ',' << fmt(s.sd);
        out << '\n';
    }
}

double mean_abs_suv_max_bias(const CohortMetrics& metrics)
{
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : metrics.rows)
        for (const auto& b : r.biases.lesions) {
            acc += std::abs(b.suv_max_bias_pct);
            ++n;
        }
    return n ? acc / static_cast<double>(n) : 0.0;
}

double mean_nrmse(const CohortMetrics& metrics)
{
    if (metrics.rows.empty())
        return 0.0;
    double acc = 0.0;
    for (const auto& r : metrics.rows)
        acc += r.nrmse;
    return acc / static_cast<double>(metrics.rows.size());
}

} // namespace leqmod
