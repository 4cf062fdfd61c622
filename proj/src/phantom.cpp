#include "leqmod/phantom.hpp"

#include "leqmod/error.hpp"
#include "leqmod/filter.hpp"
#include "leqmod/rng.hpp"
#include "leqmod/text.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace leqmod {

namespace {

double min_spacing(const Spacing& s) { return std::min({s[0], s[1], s[2]}); }

double dist_mm(std::size_t x, std::size_t y, std::size_t z, const Index3& c, const Spacing& sp)
{
    const double dx = (static_cast<double>(x) - static_cast<double>(c.x)) * sp[0];
    const double dy = (static_cast<double>(y) - static_cast<double>(c.y)) * sp[1];
    const double dz = (static_cast<double>(z) - static_cast<double>(c.z)) * sp[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double center_dist_mm(const Index3& a, const Index3& b, const Spacing& sp)
{
    return dist_mm(a.x, a.y, a.z, b, sp);
}

double ramp_width(const PhantomSpec& spec) { return spec.edge_ramp ? min_spacing(spec.voxel_size) : 0.0; }

bool lesion_inside(const Lesion& l, const Dims& dims, const Spacing& sp, double ramp)
{
    const double reach = l.radius_mm + ramp;
    const std::array<std::size_t, 3> c{l.center.x, l.center.y, l.center.z};
    const std::array<std::size_t, 3> n{dims.nx, dims.ny, dims.nz};
    for (std::size_t a = 0; a < 3; ++a) {
        const double pos = static_cast<double>(c[a]) * sp[a];
        if (pos - reach < 0.0 || pos + reach > static_cast<double>(n[a] - 1) * sp[a])
            return false;
    }
    return true;
}

bool lesions_overlap(const Lesion& a, const Lesion& b, const Spacing& sp, double ramp)
{
    return center_dist_mm(a.center, b.center, sp) < a.radius_mm + b.radius_mm + 2.0 * ramp;
}

} // namespace

void validate_phantom_spec(const PhantomSpec& spec)
{
    if (spec.dims.count() == 0)
        throw GenerationError("phantom dims must be >= 1");
    if (!(spec.background_suv > 0.0))
        throw GenerationError("background SUV must be positive");
    for (const auto& o : spec.organs)
        if (!(o.suv > 0.0) || !(o.radius_mm > 0.0))
            throw GenerationError("organ SUV and radius must be positive");
    const double ramp = ramp_width(spec);
    const double max_sp = std::max({spec.voxel_size[0], spec.voxel_size[1], spec.voxel_size[2]});
    for (std::size_t i = 0; i < spec.lesions.size(); ++i) {
        const Lesion& l = spec.lesions[i];
        if (!(l.suv > spec.background_suv))
            throw GenerationError("lesion " + std::to_string(i) + " SUV must exceed background");
        if (l.radius_mm < max_sp)
            throw GenerationError("lesion " + std::to_string(i) + " radius is below one voxel");
        if (!lesion_inside(l, spec.dims, spec.voxel_size, ramp))
            throw GenerationError("lesion " + std::to_string(i) + " extends outside the body region");
        for (std::size_t j = 0; j < i; ++j)
            if (lesions_overlap(spec.lesions[j], l, spec.voxel_size, ramp))
                throw GenerationError("lesions " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
    }
}

Phantom generate_phantom(const PhantomSpec& spec)
{
    validate_phantom_spec(spec);
    const Dims& d = spec.dims;
    const Spacing& sp = spec.voxel_size;
    Volume activity(d, sp, spec.background_suv);
    Volume prob(d, sp, 0.0);

    const double soft = min_spacing(sp);
    for (const auto& o : spec.organs) {
        for (std::size_t z = 0; z < d.nz; ++z)
            for (std::size_t y = 0; y < d.ny; ++y)
                for (std::size_t x = 0; x < d.nx; ++x) {
                    const double r = dist_mm(x, y, z, o.center, sp);
                    const double w = 1.0 / (1.0 + std::exp((r - o.radius_mm) / soft));
                    activity(x, y, z) += (o.suv - spec.background_suv) * w;
                }
    }
    // Cold organs must not drive activity to zero.
    for (double& v : activity.data())
        v = std::max(v, 0.05 * spec.background_suv);

    const double ramp = ramp_width(spec);
    for (const auto& l : spec.lesions) {
        const double reach = l.radius_mm + ramp;
        const auto lo = [&](std::size_t c, double s) {
            return static_cast<std::size_t>(std::max(0.0, std::floor(static_cast<double>(c) - reach / s)));
        };
        const auto hi = [&](std::size_t c, double s, std::size_t n) {
            return std::min(n - 1, static_cast<std::size_t>(std::ceil(static_cast<double>(c) + reach / s)));
        };
        for (std::size_t z = lo(l.center.z, sp[2]); z <= hi(l.center.z, sp[2], d.nz); ++z)
            for (std::size_t y = lo(l.center.y, sp[1]); y <= hi(l.center.y, sp[1], d.ny); ++y)
                for (std::size_t x = lo(l.center.x, sp[0]); x <= hi(l.center.x, sp[0], d.nx); ++x) {
                    const double r = dist_mm(x, y, z, l.center, sp);
                    if (r <= l.radius_mm) {
                        activity(x, y, z) = l.suv;
                        prob(x, y, z) = 1.0;
                    } else if (ramp > 0.0 && r < reach) {
                        const double t = (r - l.radius_mm) / ramp;
                        activity(x, y, z) = (1.0 - t) * l.suv + t * activity(x, y, z);
                        prob(x, y, z) = std::max(prob(x, y, z), 1.0 - t);
                    }
                }
    }
    return {std::move(activity), LesionProbMap(std::move(prob)), spec.lesions};
}

SimulatedImages simulate_counts(const Volume& activity, const CountSimConfig& config)
{
    if (!(config.sensitivity > 0.0))
        throw DomainError("sensitivity must be positive");
    for (double r : config.count_levels)
        if (!(r > 0.0 && r <= 100.0))
            throw DomainError("count level " + text::format_double(r) + "% outside (0, 100]");
    for (std::size_t i = 0; i < activity.size(); ++i)
        if (!(activity[i] >= 0.0))
            throw DomainError("negative activity at voxel " + to_string(activity.dims().coord(i)));

    const std::size_t n = activity.size();
    std::vector<std::uint64_t> counts(n);
    {
        Rng rng = make_stream(config.seed, 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double mean = activity[i] * config.sensitivity;
            if (mean > 0.0) {
                std::poisson_distribution<std::uint64_t> dist(mean);
                counts[i] = dist(rng);
            }
        }
    }

    SimulatedImages out;
    Volume hc(activity.dims(), activity.spacing());
    for (std::size_t i = 0; i < n; ++i)
        hc[i] = static_cast<double>(counts[i]) / config.sensitivity;
    out.hc = gaussian_smooth(hc, config.smoothing_fwhm_mm);

    for (double level : config.count_levels) {
        const double keep = level / 100.0;
        Volume lc(activity.dims(), activity.spacing());
        if (level >= 100.0) {
            lc = hc;
        } else {
            Rng rng = make_stream(config.seed, 2, std::bit_cast<std::uint64_t>(level));
            const double scale = config.sensitivity * keep;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[i] == 0)
                    continue;
                std::binomial_distribution<std::uint64_t> dist(counts[i], keep);
                lc[i] = static_cast<double>(dist(rng)) / scale;
            }
        }
        out.lc.emplace(level, gaussian_smooth(lc, config.smoothing_fwhm_mm));
    }
    return out;
}

PhantomSpec default_phantom_template(const Dims& dims, const Spacing& voxel_size, double background_suv)
{
    PhantomSpec spec;
    spec.dims = dims;
    spec.voxel_size = voxel_size;
    spec.background_suv = background_suv;
    const auto at = [&](double fx, double fy, double fz) {
        return Index3{static_cast<std::size_t>(fx * static_cast<double>(dims.nx - 1)),
                      static_cast<std::size_t>(fy * static_cast<double>(dims.ny - 1)),
                      static_cast<std::size_t>(fz * static_cast<double>(dims.nz - 1))};
    };
    const double extent = std::min({static_cast<double>(dims.nx) * voxel_size[0], static_cast<double>(dims.ny) * voxel_size[1],
                                    static_cast<double>(dims.nz) * voxel_size[2]});
    // Liver-like warm region, a hot heart-like blob and a cold lung-like region.
    spec.organs = {
        {at(0.30, 0.60, 0.40), 0.18 * extent, 2.0 * background_suv},
        {at(0.68, 0.35, 0.65), 0.09 * extent, 3.0 * background_suv},
        {at(0.70, 0.70, 0.30), 0.14 * extent, 0.4 * background_suv},
    };
    return spec;
}

void round_to_storage(Volume& volume)
{
    for (double& v : volume.data())
        v = static_cast<double>(static_cast<float>(v));
}

std::vector<Subject> generate_cohort(std::size_t n_subjects, const PhantomSpec& spec_template,
                                     const CountSimConfig& config, const CohortOptions& options)
{
    if (n_subjects == 0)
        throw GenerationError("cohort needs at least one subject");
    if (options.lesion_free_fraction < 0.0 || options.lesion_free_fraction > 1.0)
        throw GenerationError("lesion-free fraction must lie in [0, 1]");
    if (options.lesion_radius_min_mm > options.lesion_radius_max_mm || options.lesion_suv_min > options.lesion_suv_max)
        throw GenerationError("lesion radius/SUV ranges are inverted");

    // Fixed-quota assignment of lesion-free subjects over a seeded permutation.
    const auto n_free = static_cast<std::size_t>(std::lround(options.lesion_free_fraction * static_cast<double>(n_subjects)));
    std::vector<std::size_t> order(n_subjects);
    std::iota(order.begin(), order.end(), std::size_t{0});
    {
        Rng rng = make_stream(spec_template.seed, 0x51u);
        for (std::size_t i = n_subjects; i > 1; --i)
            std::swap(order[i - 1], order[uniform_int(rng, 0, i - 1)]);
    }
    std::vector<bool> lesion_free(n_subjects, false);
    for (std::size_t i = 0; i < n_free; ++i)
        lesion_free[order[i]] = true;

    const double ramp = spec_template.edge_ramp ? min_spacing(spec_template.voxel_size) : 0.0;
    std::vector<Subject> cohort;
    cohort.reserve(n_subjects);
    for (std::size_t s = 0; s < n_subjects; ++s) {
        PhantomSpec spec = spec_template;
        spec.seed = stream_seed(spec_template.seed, s, 1);
        spec.lesions.clear();
        Rng rng(spec.seed);
        if (!lesion_free[s]) {
            const auto count = static_cast<std::size_t>(uniform_int(rng, 1, std::max<std::size_t>(1, options.max_lesions)));
            for (std::size_t k = 0; k < count; ++k) {
                bool placed = false;
                for (std::size_t attempt = 0; attempt < options.max_retries && !placed; ++attempt) {
                    Lesion l;
                    l.radius_mm = uniform(rng, options.lesion_radius_min_mm, options.lesion_radius_max_mm);
                    l.suv = uniform(rng, options.lesion_suv_min, options.lesion_suv_max);
                    l.center = {uniform_int(rng, 0, spec.dims.nx - 1), uniform_int(rng, 0, spec.dims.ny - 1),
                                uniform_int(rng, 0, spec.dims.nz - 1)};
                    if (!lesion_inside(l, spec.dims, spec.voxel_size, ramp))
                        continue;
                    if (std::any_of(spec.lesions.begin(), spec.lesions.end(),
                                    [&](const Lesion& o) { return lesions_overlap(o, l, spec.voxel_size, ramp); }))
                        continue;
                    spec.lesions.push_back(l);
                    placed = true;
                }
                if (!placed)
                    throw GenerationError("could not place lesion " + std::to_string(k) + " of subject " + std::to_string(s) +
                                          " after " + std::to_string(options.max_retries) + " attempts");
            }
        }

        Phantom phantom = generate_phantom(spec);
        CountSimConfig sim = config;
        sim.seed = stream_seed(config.seed, s, 2);
        SimulatedImages images = simulate_counts(phantom.activity, sim);

        Subject subj;
        char id[32];
        std::snprintf(id, sizeof id, "subj%03zu", s);
        subj.id = id;
        subj.hc = std::move(images.hc);
        round_to_storage(subj.hc);
        for (auto& [level, vol] : images.lc) {
            round_to_storage(vol);
            subj.lc.emplace(level, std::move(vol));
        }
        Volume prob = phantom.oracle.volume();
        round_to_storage(prob);
        subj.oracle_prob = LesionProbMap::clamped(std::move(prob));
        subj.lesion_truth = std::move(phantom.lesions);
        cohort.push_back(std::move(subj));
    }
    return cohort;
}

// --- manifest ------------------------------------------------------------------

std::string level_tag(double level) { return text::format_double(level); }

std::filesystem::path write_manifest(const std::vector<Subject>& cohort, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

    std::ostringstream m;
    m << "# leqmod cohort manifest v1\n";
    m << "subjects=" << cohort.size() << "\n";
    for (const Subject& s : cohort) {
        m << "subject id=" << s.id << "\n";
        const std::string hc_name = s.id + "_hc.lqmv";
        write_volume(s.hc, dir / hc_name);
        m << "file id=" << s.id << " role=hc count_level=100 path=" << hc_name << "\n";
        for (const auto& [level, vol] : s.lc) {
            const std::string name = s.id + "_lc" + level_tag(level) + ".lqmv";
            write_volume(vol, dir / name);
            m << "file id=" << s.id << " role=lc count_level=" << level_tag(level) << " path=" << name << "\n";
        }
        const std::string prob_name = s.id + "_prob.lqmv";
        write_volume(s.oracle_prob.volume(), dir / prob_name);
        m << "file id=" << s.id << " role=prob count_level=0 path=" << prob_name << "\n";
        for (const Lesion& l : s.lesion_truth)
            m << "lesion id=" << s.id << " center=" << l.center.x << "," << l.center.y << "," << l.center.z
              << " radius_mm=" << text::format_double(l.radius_mm) << " suv=" << text::format_double(l.suv) << "\n";
    }
    const auto path = dir / kManifestName;
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << m.str();
    if (!out)
        throw IoError("failed writing " + path.string());
    return path;
}

namespace {

std::map<std::string, std::string> parse_fields(const std::vector<std::string>& tokens, std::size_t line_no)
{
    std::map<std::string, std::string> f;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        if (tokens[i].empty())
            continue;
        const auto eq = tokens[i].find('=');
        if (eq == std::string::npos)
            throw FormatError("manifest line " + std::to_string(line_no) + ": expected key=value, got '" + tokens[i] + "'", 0);
        f[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
    }
    return f;
}

const std::string& need(const std::map<std::string, std::string>& f, const std::string& key, std::size_t line_no)
{
    const auto it = f.find(key);
    if (it == f.end())
        throw FormatError("manifest line " + std::to_string(line_no) + ": missing field '" + key + "'", 0);
    return it->second;
}

} // namespace

std::vector<Subject> read_manifest(const std::filesystem::path& manifest_path)
{
    std::ifstream in(manifest_path);
    if (!in)
        throw IoError("cannot open manifest " + manifest_path.string());
    const auto dir = manifest_path.parent_path();

    std::vector<Subject> cohort;
    std::map<std::string, std::size_t> by_id;
    const auto subject = [&](const std::string& id, std::size_t line_no) -> Subject& {
        const auto it = by_id.find(id);
        if (it == by_id.end())
            throw FormatError("manifest line " + std::to_string(line_no) + ": unknown subject '" + id + "'", 0);
        return cohort[it->second];
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#')
            continue;
        const auto tokens = text::split(t, ' ');
        const std::string& kind = tokens.front();
        if (kind.rfind("subjects=", 0) == 0)
            continue;
        const auto f = parse_fields(tokens, line_no);
        if (kind == "subject") {
            const auto& id = need(f, "id", line_no);
            by_id[id] = cohort.size();
            cohort.push_back(Subject{id, {}, {}, {}, {}});
        } else if (kind == "file") {
            Subject& s = subject(need(f, "id", line_no), line_no);
            const auto path = dir / need(f, "path", line_no);
            if (!std::filesystem::exists(path))
                throw IoError("manifest references missing file " + path.string());
            const auto& role = need(f, "role", line_no);
            if (role == "hc")
                s.hc = read_volume(path);
            else if (role == "lc")
                s.lc.emplace(text::parse_double(need(f, "count_level", line_no), "count_level"), read_volume(path));
            else if (role == "prob")
                s.oracle_prob = LesionProbMap(read_volume(path));
            else
                throw FormatError("manifest line " + std::to_string(line_no) + ": unknown role '" + role + "'", 0);
        } else if (kind == "lesion") {
            Subject& s = subject(need(f, "id", line_no), line_no);
            const auto c = text::parse_double_list(need(f, "center", line_no), "lesion center");
            if (c.size() != 3)
                throw FormatError("manifest line " + std::to_string(line_no) + ": lesion center needs 3 coordinates", 0);
            Lesion l;
            l.center = {static_cast<std::size_t>(c[0]), static_cast<std::size_t>(c[1]), static_cast<std::size_t>(c[2])};
            l.radius_mm = text::parse_double(need(f, "radius_mm", line_no), "radius_mm");
            l.suv = text::parse_double(need(f, "suv", line_no), "suv");
            s.lesion_truth.push_back(l);
        } else {
            throw FormatError("manifest line " + std::to_string(line_no) + ": unknown record '" + kind + "'", 0);
        }
    }
    for (const Subject& s : cohort) {
        if (s.hc.size() == 0)
            throw FormatError("subject " + s.id + " has no hc volume", 0);
        for (const auto& [level, v] : s.lc)
            if (!(v.dims() == s.hc.dims()))
                throw DimensionError("subject " + s.id + " lc volume dims differ from hc");
        if (s.oracle_prob.volume().size() == 0)
            throw FormatError("subject " + s.id + " has no probability map", 0);
    }
    return cohort;
}

} // namespace leqmod
