#include "helpers.hpp"

#include "leqmod/error.hpp"
#include "leqmod/lemod.hpp"

#include <doctest.h>

#include <numeric>
#include <sstream>

using namespace leqmod;

namespace {

double le_value_ref(const std::vector<double>& den, const std::vector<double>& hc, const std::vector<double>& p)
{
    double num = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < den.size(); ++i) {
        num += p[i] * std::abs(den[i] - hc[i]);
        norm += p[i];
    }
    return num / std::max(norm, 1e-8);
}

// Upper 1% point of chi-square with 49 degrees of freedom.
constexpr double kChi2Crit49 = 74.919;

Subject subject_with(std::size_t edge, std::vector<Lesion> lesions)
{
    PhantomSpec s;
    s.dims = Dims::cube(edge);
    s.voxel_size = {2, 2, 2};
    s.lesions = std::move(lesions);
    const Phantom p = generate_phantom(s);
    Subject subj;
    subj.id = "s";
    subj.hc = p.activity;
    subj.oracle_prob = p.oracle;
    subj.lesion_truth = s.lesions;
    subj.lc.emplace(5.0, p.activity);
    subj.lc.emplace(50.0, p.activity);
    return subj;
}

} // namespace

TEST_CASE("sampling weight examples")
{
    const SamplingConfig c;
    CHECK(sampling_weight(0.9, 1.0, c) == doctest::Approx(0.315).epsilon(1e-15));
    CHECK(sampling_weight(0.0, 50.0, c) == doctest::Approx(0.015).epsilon(1e-15));
    CHECK(sampling_weight(0.3, 5.0, c) == sampling_weight(0.0, 5.0, c));
    CHECK(sampling_weight(1.0, 5.0, c) / sampling_weight(0.0, 5.0, c) == doctest::Approx(1.0 / 0.3).epsilon(1e-14));
    CHECK_THROWS_AS(sampling_weight(1.2, 5.0, c), DomainError);
    CHECK_THROWS_AS(sampling_weight(-0.1, 5.0, c), DomainError);
}

TEST_CASE("eta interpolation")
{
    const SamplingConfig c;
    CHECK(eta_for_level(10.0, c) == 0.12);
    CHECK(eta_is_tabulated(25.0, c));
    CHECK_FALSE(eta_is_tabulated(3.0, c));
    const double t = (std::log(3.0) - std::log(2.0)) / (std::log(5.0) - std::log(2.0));
    CHECK(eta_for_level(3.0, c) == doctest::Approx(0.25 + t * (0.15 - 0.25)).epsilon(1e-14));
    CHECK(eta_for_level(0.5, c) == 0.35);
    CHECK(eta_for_level(100.0, c) == 0.05);

    SamplingConfig bad = c;
    bad.eta_table[10.0] = 0.2;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.w_min = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sampling weight monotonicity")
{
    const SamplingConfig c;
    Rng rng = make_stream(1, 7);
    for (int trial = 0; trial < 1000; ++trial) {
        const double p1 = uniform(rng, 0.0, 1.0), p2 = uniform(rng, 0.0, 1.0);
        const double l1 = std::exp(uniform(rng, 0.0, std::log(100.0))), l2 = std::exp(uniform(rng, 0.0, std::log(100.0)));
        const double lo = std::min(p1, p2), hi = std::max(p1, p2);
        CHECK(sampling_weight(lo, l1, c) <= sampling_weight(hi, l1, c));
        CHECK(sampling_weight(p1, std::min(l1, l2), c) >= sampling_weight(p1, std::max(l1, l2), c));
    }
}

TEST_CASE("weight table")
{
    const SamplingConfig c;
    const OracleProvider oracle;
    const std::vector<Subject> free{subject_with(16, {})};
    const PatchGrid g = build_patch_grid(Dims::cube(16), 8, 8);
    const auto t0 = build_weight_table(free, oracle, g, c);
    REQUIRE(t0.size() == 2 * 8);
    for (const auto& r : t0)
        CHECK(r.weight == eta_for_level(r.count_level, c) * c.w_min);
    CHECK(t0.front().count_level == 5.0);
    CHECK(t0.back().count_level == 50.0);

    // Lesion reach (radius + ramp) is 4 mm = 2 voxels around (4,4,4): inside patch (0,0,0).
    const std::vector<Subject> one{subject_with(16, {{{4, 4, 4}, 2.0, 5.0}})};
    const auto t1 = build_weight_table(one, oracle, g, c);
    for (const auto& r : t1) {
        if (r.origin == Index3{0, 0, 0}) {
            CHECK(r.max_lesion_prob == 1.0);
            CHECK(r.weight / (eta_for_level(r.count_level, c) * c.w_min) == doctest::Approx(1.0 / 0.3).epsilon(1e-14));
        } else {
            CHECK(r.max_lesion_prob == 0.0);
        }
        CHECK(r.weight == sampling_weight(r.max_lesion_prob, r.count_level, c));
    }

    std::ostringstream csv;
    write_weight_table_csv(t1, csv);
    std::size_t lines = 0;
    for (char ch : csv.str())
        lines += ch == '\n';
    CHECK(lines == t1.size() + 1);

    const PatchGrid wrong = build_patch_grid(Dims::cube(12), 4, 4);
    CHECK_THROWS_AS(build_weight_table(one, oracle, wrong, c), DimensionError);

    for (const auto& r : uniform_weights(t1))
        CHECK(r.weight == 1.0);
}

TEST_CASE("sampler basics")
{
    const std::vector<double> single{0.4};
    const WeightedSampler s1(single);
    Rng rng = make_stream(2, 2);
    for (std::size_t i : s1.draw(16, rng))
        CHECK(i == 0);
    CHECK(s1.draw(0, rng).empty());

    const std::vector<double> w{3.0, 1.0};
    const WeightedSampler s2(w);
    CHECK(s2.probability(0) == 0.75);
    Rng a = make_stream(5, 1), b = make_stream(5, 1);
    const auto da = s2.draw(200000, a);
    CHECK(da == s2.draw(200000, b));
    const double f = static_cast<double>(std::count(da.begin(), da.end(), 0)) / static_cast<double>(da.size());
    CHECK(std::abs(f - 0.75) < 0.01);

    const std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS(WeightedSampler{std::span<const double>(zero)});
}

TEST_CASE("sampler chi-square on 50 records")
{
    Rng wrng = make_stream(3, 3);
    const auto w = testutil::random_values(50, wrng, 0.01, 1.0);
    const WeightedSampler s(w);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    Rng rng = make_stream(3, 4);
    const std::size_t n = 100000;
    std::vector<double> counts(50, 0.0);
    for (std::size_t i : s.draw(n, rng))
        counts[i] += 1.0;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        const double e = static_cast<double>(n) * w[i] / total;
        chi2 += (counts[i] - e) * (counts[i] - e) / e;
        CHECK(s.probability(i) == doctest::Approx(w[i] / total).epsilon(1e-12));
    }
    CHECK(chi2 < kChi2Crit49);
}

TEST_CASE("lesion loss examples")
{
    const std::vector<double> hc{1, 2, 3, 4};
    const std::vector<double> ones(4, 1.0), zeros(4, 0.0);
    const auto same = le_loss(hc, hc, ones);
    CHECK(same.value == 0.0);
    for (double g : same.grad)
        CHECK(g == 0.0);

    const std::vector<double> den{2, 3, 2, 3};
    const auto half = le_loss(den, hc, ones);
    CHECK(half.value == 1.0);
    CHECK(half.grad == std::vector<double>{0.25, 0.25, -0.25, -0.25});

    const std::vector<double> wild{100, -50, 7, 1e6};
    const auto off = le_loss(wild, hc, zeros);
    CHECK(off.value == 0.0);
    for (double g : off.grad)
        CHECK(g == 0.0);

    const std::vector<double> soft{0.2, 0.8, 0.6, 0.0};
    const auto hard = le_loss(den, hc, soft, LesionNormalizer::hard);
    CHECK(hard.value == doctest::Approx((0.2 + 0.8 + 0.6) / 2.0).epsilon(1e-15));

    const std::vector<double> shorter{1, 2, 3};
    CHECK_THROWS_AS(le_loss(shorter, hc, ones), DimensionError);
}

TEST_CASE("lesion loss gradient matches finite differences")
{
    Rng rng = make_stream(8, 8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 6 * 6 * 6;
        const auto hc = testutil::random_values(n, rng, 0.0, 5.0);
        auto den = testutil::random_values(n, rng, 0.0, 5.0);
        auto p = testutil::random_values(n, rng, 0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(den[i] - hc[i]) < 1e-3)
                den[i] += 0.01;
            if (i % 5 == 0)
                p[i] = 0.0;
        }
        const auto r = le_loss(den, hc, p);
        CHECK(r.value == doctest::Approx(le_value_ref(den, hc, p)).epsilon(1e-13));
        const auto num = testutil::numeric_gradient([&](const std::vector<double>& x) { return le_loss(x, hc, p).value; }, den);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            worst = std::max(worst, std::abs(r.grad[i] - num[i]) / std::max(std::abs(num[i]), 1e-3));
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("lesion loss ignores off-lesion voxels exactly")
{
    Rng rng = make_stream(9, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 4 * 4 * 4;
        const auto hc = testutil::random_values(n, rng, 0.0, 5.0);
        auto den = testutil::random_values(n, rng, 0.0, 5.0);
        auto p = testutil::random_values(n, rng, 0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i)
            if (uniform(rng, 0.0, 1.0) < 0.5)
                p[i] = 0.0;
        const auto before = le_loss(den, hc, p);
        for (std::size_t i = 0; i < n; ++i)
            if (p[i] == 0.0)
                den[i] += uniform(rng, -10.0, 10.0);
        const auto after = le_loss(den, hc, p);
        CHECK(after.value == before.value);
        CHECK(after.grad == before.grad);
    }
}
