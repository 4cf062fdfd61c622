#include "leqmod/qumod.hpp"

#include "leqmod/error.hpp"
#include "leqmod/text.hpp"
#include "leqmod/volume.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace leqmod {

ParcellationPlan build_parcellation(std::size_t patch_size, std::array<double, 4> mu)
{
    if (patch_size < 4)
        throw ConfigError("parcellation needs patch size >= 4, got " + std::to_string(patch_size));
    for (double m : mu)
        if (!(m >= 0.0))
            throw ConfigError("scale weights must be non-negative");

    ParcellationPlan plan{patch_size, {}};
    const double total = std::accumulate(mu.begin(), mu.end(), 0.0);
    double kept = 0.0;
    for (int l = 1; l <= 4; ++l) {
        const std::size_t sub = std::max<std::size_t>(1, patch_size >> l);
        if (sub < 2)
            continue;
        const std::size_t stride = std::max<std::size_t>(1, sub / 2);
        ParcellationScale s{l, sub, stride, axis_positions(patch_size, sub, stride), mu[static_cast<std::size_t>(l - 1)]};
        kept += s.mu;
        plan.scales.push_back(std::move(s));
    }
    if (kept > 0.0 && kept != total)
        for (auto& s : plan.scales)
            s.mu *= total / kept;
    return plan;
}

ParcellationPlan custom_parcellation(std::size_t patch_size, std::span<const ScaleSpec> scales)
{
    ParcellationPlan plan{patch_size, {}};
    int l = 1;
    for (const auto& spec : scales) {
        if (spec.sub_size == 0 || spec.sub_size > patch_size || spec.stride == 0)
            throw ConfigError("invalid custom scale");
        plan.scales.push_back({l++, spec.sub_size, spec.stride, axis_positions(patch_size, spec.sub_size, spec.stride), spec.mu});
    }
    return plan;
}

void write_plan(const ParcellationPlan& plan, std::ostream& out)
{
    out << "patch_size=" << plan.patch_size << "\n";
    out << "scale,sub_size,stride,positions_per_axis,N,mu\n";
    for (const auto& s : plan.scales)
        out << s.level << ',' << s.sub_size << ',' << s.stride << ',' << s.positions.size() << ',' << s.count() << ','
            << text::format_double(s.mu) << '\n';
}

namespace {

void check_inputs(std::span<const double> den, std::span<const double> hc, const ParcellationPlan& plan)
{
    const std::size_t n = plan.patch_size;
    if (den.size() != n * n * n || hc.size() != n * n * n)
        throw DimensionError("quantification loss expects " + std::to_string(n) + "^3 patches, got " +
                             std::to_string(den.size()) + " and " + std::to_string(hc.size()) + " values");
}

struct Best {
    double value;
    std::size_t index;
};

// Total order: larger value first, then earlier storage index.
inline bool better(const Best& a, const Best& b) noexcept
{
    return a.value > b.value || (a.value == b.value && a.index < b.index);
}

// Sliding maximum of width w along one axis of a box with extents `ext`.
// The output has extent ext[axis]-w+1 along that axis.
std::vector<Best> slide_max(const std::vector<Best>& in, std::array<std::size_t, 3> ext, int axis, std::size_t w)
{
    std::array<std::size_t, 3> out_ext = ext;
    out_ext[static_cast<std::size_t>(axis)] = ext[static_cast<std::size_t>(axis)] - w + 1;
    std::vector<Best> out(out_ext[0] * out_ext[1] * out_ext[2]);

    const auto in_idx = [&](std::size_t x, std::size_t y, std::size_t z) { return x + ext[0] * (y + ext[1] * z); };
    const auto out_idx = [&](std::size_t x, std::size_t y, std::size_t z) { return x + out_ext[0] * (y + out_ext[1] * z); };

    const std::size_t len = ext[static_cast<std::size_t>(axis)];
    // Two remaining axes enumerate lines.
    const int a1 = axis == 0 ? 1 : 0;
    const int a2 = axis == 2 ? 1 : 2;
    std::deque<std::size_t> dq;
    std::array<std::size_t, 3> c{};
    for (std::size_t u = 0; u < ext[static_cast<std::size_t>(a1)]; ++u)
        for (std::size_t v = 0; v < ext[static_cast<std::size_t>(a2)]; ++v) {
            c[static_cast<std::size_t>(a1)] = u;
            c[static_cast<std::size_t>(a2)] = v;
            const auto at = [&](std::size_t t) {
                c[static_cast<std::size_t>(axis)] = t;
                return in[in_idx(c[0], c[1], c[2])];
            };
            dq.clear();
            for (std::size_t t = 0; t < len; ++t) {
                const Best cur = at(t);
                while (!dq.empty() && better(cur, at(dq.back())))
                    dq.pop_back();
                dq.push_back(t);
                if (dq.front() + w <= t)
                    dq.pop_front();
                if (t + 1 >= w) {
                    const Best best = at(dq.front());
                    c[static_cast<std::size_t>(axis)] = t + 1 - w;
                    out[out_idx(c[0], c[1], c[2])] = best;
                }
            }
        }
    return out;
}

// Maxima (with first-in-storage-order argmax) of every w^3 window of an n^3
// cube, indexed by window origin over an (n-w+1)^3 grid.
std::vector<Best> window_maxima(std::span<const double> data, std::size_t n, std::size_t w)
{
    std::vector<Best> cur(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        cur[i] = {data[i], i};
    std::array<std::size_t, 3> ext{n, n, n};
    for (int axis = 0; axis < 3; ++axis) {
        cur = slide_max(cur, ext, axis, w);
        ext[static_cast<std::size_t>(axis)] = n - w + 1;
    }
    return cur;
}

// Summed-area table with a zero border: sat[(x,y,z)] = sum over [0,x)x[0,y)x[0,z).
std::vector<double> summed_area(std::span<const double> data, std::size_t n)
{
    const std::size_t m = n + 1;
    std::vector<double> sat(m * m * m, 0.0);
    const auto idx = [m](std::size_t x, std::size_t y, std::size_t z) { return x + m * (y + m * z); };
    for (std::size_t z = 1; z <= n; ++z)
        for (std::size_t y = 1; y <= n; ++y)
            for (std::size_t x = 1; x <= n; ++x)
                sat[idx(x, y, z)] = data[(x - 1) + n * ((y - 1) + n * (z - 1))] + sat[idx(x - 1, y, z)] + sat[idx(x, y - 1, z)] +
                                    sat[idx(x, y, z - 1)] - sat[idx(x - 1, y - 1, z)] - sat[idx(x - 1, y, z - 1)] -
                                    sat[idx(x, y - 1, z - 1)] + sat[idx(x - 1, y - 1, z - 1)];
    return sat;
}

double box_sum(const std::vector<double>& sat, std::size_t n, std::size_t x, std::size_t y, std::size_t z, std::size_t w)
{
    const std::size_t m = n + 1;
    const auto at = [&](std::size_t a, std::size_t b, std::size_t c) { return sat[a + m * (b + m * c)]; };
    const std::size_t X = x + w, Y = y + w, Z = z + w;
    return at(X, Y, Z) - at(x, Y, Z) - at(X, y, Z) - at(X, Y, z) + at(x, y, Z) + at(x, Y, z) + at(X, y, z) - at(x, y, z);
}

inline double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

} // namespace

QuLossResult qu_loss(std::span<const double> den, std::span<const double> hc, const ParcellationPlan& plan)
{
    check_inputs(den, hc, plan);
    const std::size_t n = plan.patch_size;
    const std::size_t m = n + 1;

    std::vector<double> diff(den.size());
    for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = den[i] - hc[i];
    const auto sat = summed_area(diff, n);

    QuLossResult r;
    r.grad.assign(den.size(), 0.0);
    // Difference array for the box-constant mean-term gradients.
    std::vector<double> boxgrad(m * m * m, 0.0);
    const auto bidx = [m](std::size_t x, std::size_t y, std::size_t z) { return x + m * (y + m * z); };

    for (const auto& scale : plan.scales) {
        const std::size_t w = scale.sub_size;
        const std::size_t span_n = n - w + 1;
        const auto den_max = window_maxima(den, n, w);
        const auto hc_max = window_maxima(hc, n, w);
        const double coeff = scale.mu / static_cast<double>(scale.count());
        const double inv_j = 1.0 / static_cast<double>(w * w * w);

        double acc = 0.0;
        for (std::size_t z : scale.positions)
            for (std::size_t y : scale.positions)
                for (std::size_t x : scale.positions) {
                    const double dmean = box_sum(sat, n, x, y, z, w) * inv_j;
                    const std::size_t wi = x + span_n * (y + span_n * z);
                    const double dmax = den_max[wi].value - hc_max[wi].value;
                    acc += std::abs(dmean) + std::abs(dmax);

                    const double g_mean = coeff * sign(dmean) * inv_j;
                    if (g_mean != 0.0) {
                        const std::size_t X = x + w, Y = y + w, Z = z + w;
                        boxgrad[bidx(x, y, z)] += g_mean;
                        boxgrad[bidx(X, y, z)] -= g_mean;
                        boxgrad[bidx(x, Y, z)] -= g_mean;
                        boxgrad[bidx(x, y, Z)] -= g_mean;
                        boxgrad[bidx(X, Y, z)] += g_mean;
                        boxgrad[bidx(X, y, Z)] += g_mean;
                        boxgrad[bidx(x, Y, Z)] += g_mean;
                        boxgrad[bidx(X, Y, Z)] -= g_mean;
                    }
                    r.grad[den_max[wi].index] += coeff * sign(dmax);
                }
        const double scale_value = coeff * acc;
        r.per_scale.push_back(scale_value);
        r.value += scale_value;
    }

    // Prefix sums along each axis turn the corner deltas into box fills.
    for (std::size_t z = 0; z < m; ++z)
        for (std::size_t y = 0; y < m; ++y)
            for (std::size_t x = 1; x < m; ++x)
                boxgrad[bidx(x, y, z)] += boxgrad[bidx(x - 1, y, z)];
    for (std::size_t z = 0; z < m; ++z)
        for (std::size_t y = 1; y < m; ++y)
            for (std::size_t x = 0; x < m; ++x)
                boxgrad[bidx(x, y, z)] += boxgrad[bidx(x, y - 1, z)];
    for (std::size_t z = 1; z < m; ++z)
        for (std::size_t y = 0; y < m; ++y)
            for (std::size_t x = 0; x < m; ++x)
                boxgrad[bidx(x, y, z)] += boxgrad[bidx(x, y, z - 1)];
    for (std::size_t z = 0; z < n; ++z)
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x)
                r.grad[x + n * (y + n * z)] += boxgrad[bidx(x, y, z)];
    return r;
}

double qu_loss_bruteforce(std::span<const double> den, std::span<const double> hc, const ParcellationPlan& plan)
{
    check_inputs(den, hc, plan);
    const std::size_t n = plan.patch_size;
    double total = 0.0;
    for (const auto& scale : plan.scales) {
        const std::size_t w = scale.sub_size;
        double acc = 0.0;
        for (std::size_t oz : scale.positions)
            for (std::size_t oy : scale.positions)
                for (std::size_t ox : scale.positions) {
                    double sum_den = 0.0, sum_hc = 0.0;
                    double max_den = -std::numeric_limits<double>::infinity();
                    double max_hc = -std::numeric_limits<double>::infinity();
                    for (std::size_t z = oz; z < oz + w; ++z)
                        for (std::size_t y = oy; y < oy + w; ++y)
                            for (std::size_t x = ox; x < ox + w; ++x) {
                                const std::size_t i = x + n * (y + n * z);
                                sum_den += den[i];
                                sum_hc += hc[i];
                                max_den = std::max(max_den, den[i]);
                                max_hc = std::max(max_hc, hc[i]);
                            }
                    const double j = static_cast<double>(w * w * w);
                    acc += std::abs(sum_den / j - sum_hc / j) + std::abs(max_den - max_hc);
                }
        total += scale.mu / static_cast<double>(scale.count()) * acc;
    }
    return total;
}

} // namespace leqmod
