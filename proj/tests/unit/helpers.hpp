#pragma once

#include "leqmod/phantom.hpp"
#include "leqmod/rng.hpp"
#include "leqmod/volume.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace testutil {

inline std::vector<double> random_values(std::size_t n, leqmod::Rng& rng, double lo = 0.0, double hi = 1.0)
{
    std::vector<double> v(n);
    for (auto& x : v)
        x = leqmod::uniform(rng, lo, hi);
    return v;
}

inline leqmod::Volume random_volume(const leqmod::Dims& d, leqmod::Rng& rng, double lo = 0.0, double hi = 1.0,
                                    leqmod::Spacing sp = {1.0, 1.0, 1.0})
{
    return leqmod::Volume(d, sp, random_values(d.count(), rng, lo, hi));
}

// Max over i of |a_i - b_i| / max(|b_i|, floor).
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-6)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
    return worst;
}

// Central differences of f at x, one coordinate at a time.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-6)
{
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag)
    {
        path = std::filesystem::temp_directory_path() /
               ("leqmod_test_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

} // namespace testutil
