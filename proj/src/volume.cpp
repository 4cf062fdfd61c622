#include "leqmod/volume.hpp"

#include "leqmod/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace leqmod {

std::string to_string(const Index3& idx)
{
    return "(" + std::to_string(idx.x) + "," + std::to_string(idx.y) + "," + std::to_string(idx.z) + ")";
}

std::string to_string(const Dims& d)
{
    return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

namespace {

void validate_header(const Dims& dims, const Spacing& spacing)
{
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
        throw DimensionError("volume dims must be >= 1, got " + to_string(dims));
    for (double s : spacing)
        if (!(s > 0.0) || !std::isfinite(s))
            throw DomainError("voxel size must be positive and finite");
}

} // namespace

Volume::Volume(Dims dims, Spacing spacing, double fill)
    : dims_(dims), spacing_(spacing), data_(dims.count(), fill)
{
    validate_header(dims_, spacing_);
}

Volume::Volume(Dims dims, Spacing spacing, std::vector<double> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data))
{
    validate_header(dims_, spacing_);
    if (data_.size() != dims_.count())
        throw DimensionError("data length " + std::to_string(data_.size()) + " does not match dims " + to_string(dims_));
}

void Volume::require_finite() const
{
    for (std::size_t i = 0; i < data_.size(); ++i)
        if (!std::isfinite(data_[i]))
            throw DomainError("non-finite value at voxel " + to_string(dims_.coord(i)));
}

std::vector<std::size_t> axis_positions(std::size_t extent, std::size_t window, std::size_t stride)
{
    if (window == 0 || window > extent)
        throw DimensionError("window " + std::to_string(window) + " does not fit extent " + std::to_string(extent));
    if (stride == 0)
        throw DimensionError("stride must be >= 1");
    std::vector<std::size_t> out;
    const std::size_t last = extent - window;
    for (std::size_t p = 0; p <= last; p += stride)
        out.push_back(p);
    if (out.back() != last)
        out.push_back(last);
    return out;
}

PatchGrid build_patch_grid(const Dims& dims, std::size_t patch_size, std::size_t stride)
{
    if (patch_size == 0 || patch_size > dims.nx || patch_size > dims.ny || patch_size > dims.nz)
        throw DimensionError("patch size " + std::to_string(patch_size) + " exceeds volume " + to_string(dims));
    if (stride > patch_size)
        throw DimensionError("stride " + std::to_string(stride) + " exceeds patch size " + std::to_string(patch_size) +
                             "; the grid would leave voxels uncovered");
    const auto xs = axis_positions(dims.nx, patch_size, stride);
    const auto ys = axis_positions(dims.ny, patch_size, stride);
    const auto zs = axis_positions(dims.nz, patch_size, stride);

    PatchGrid grid{patch_size, stride, dims, {}};
    grid.origins.reserve(xs.size() * ys.size() * zs.size());
    for (auto x : xs)
        for (auto y : ys)
            for (auto z : zs)
                grid.origins.push_back({x, y, z});
    return grid;
}

namespace {

void check_patch_bounds(const Dims& dims, const Index3& origin, std::size_t size)
{
    if (size == 0 || origin.x + size > dims.nx || origin.y + size > dims.ny || origin.z + size > dims.nz)
        throw DimensionError("patch at " + to_string(origin) + " of size " + std::to_string(size) +
                             " exceeds volume " + to_string(dims));
}

} // namespace

Patch extract_patch(const Volume& volume, const Index3& origin, std::size_t size)
{
    check_patch_bounds(volume.dims(), origin, size);
    Patch p{origin, size, std::vector<double>(size * size * size)};
    const auto src = volume.data();
    auto dst = p.data.begin();
    for (std::size_t k = 0; k < size; ++k)
        for (std::size_t j = 0; j < size; ++j) {
            const auto row = src.begin() + static_cast<std::ptrdiff_t>(volume.dims().index(origin.x, origin.y + j, origin.z + k));
            dst = std::copy(row, row + static_cast<std::ptrdiff_t>(size), dst);
        }
    return p;
}

void write_patch(Volume& volume, const Patch& patch)
{
    check_patch_bounds(volume.dims(), patch.origin, patch.size);
    const std::size_t s = patch.size;
    auto src = patch.data.begin();
    for (std::size_t k = 0; k < s; ++k)
        for (std::size_t j = 0; j < s; ++j) {
            auto row = volume.data().begin() +
                       static_cast<std::ptrdiff_t>(volume.dims().index(patch.origin.x, patch.origin.y + j, patch.origin.z + k));
            std::copy(src, src + static_cast<std::ptrdiff_t>(s), row);
            src += static_cast<std::ptrdiff_t>(s);
        }
}

Volume reassemble(std::span<const Patch> patches, const Dims& dims, const Spacing& spacing)
{
    std::vector<double> sum(dims.count(), 0.0);
    std::vector<std::uint32_t> hits(dims.count(), 0);
    for (const Patch& p : patches) {
        check_patch_bounds(dims, p.origin, p.size);
        if (p.data.size() != p.size * p.size * p.size)
            throw DimensionError("patch data length does not match its size");
        const std::size_t s = p.size;
        std::size_t src = 0;
        for (std::size_t k = 0; k < s; ++k)
            for (std::size_t j = 0; j < s; ++j) {
                const std::size_t row = dims.index(p.origin.x, p.origin.y + j, p.origin.z + k);
                for (std::size_t i = 0; i < s; ++i, ++src) {
                    sum[row + i] += p.data[src];
                    ++hits[row + i];
                }
            }
    }
    for (std::size_t i = 0; i < sum.size(); ++i) {
        if (hits[i] == 0)
            throw CoverageError("voxel " + to_string(dims.coord(i)) + " is not covered by any patch");
        if (hits[i] > 1)
            sum[i] /= static_cast<double>(hits[i]);
    }
    return Volume(dims, spacing, std::move(sum));
}

// --- LQMV ------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'L', 'Q', 'M', 'V'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 12 + 12;

void put_u32(std::vector<char>& out, std::uint32_t v)
{
    for (int b = 0; b < 4; ++b)
        out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

void put_f32(std::vector<char>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(std::span<const char> in, std::size_t off)
{
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + b])) << (8 * b);
    return v;
}

float get_f32(std::span<const char> in, std::size_t off) { return std::bit_cast<float>(get_u32(in, off)); }

} // namespace

std::vector<char> encode_volume(const Volume& volume)
{
    std::vector<char> out;
    out.reserve(kHeaderBytes + 4 * volume.size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, kVersion);
    const Dims& d = volume.dims();
    for (std::size_t n : {d.nx, d.ny, d.nz})
        put_u32(out, static_cast<std::uint32_t>(n));
    for (double s : volume.spacing())
        put_f32(out, static_cast<float>(s));
    for (std::size_t i = 0; i < volume.size(); ++i) {
        const float f = static_cast<float>(volume[i]);
        if (!std::isfinite(f))
            throw FormatError("non-finite value at voxel " + to_string(d.coord(i)), kHeaderBytes + 4 * i);
        put_f32(out, f);
    }
    return out;
}

Volume decode_volume(std::span<const char> bytes)
{
    if (bytes.size() < kHeaderBytes)
        throw FormatError("truncated header (" + std::to_string(bytes.size()) + " bytes)", bytes.size());
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw FormatError("bad magic, expected LQMV", 0);
    if (const auto v = get_u32(bytes, 4); v != kVersion)
        throw FormatError("unsupported version " + std::to_string(v), 4);
    const Dims dims{get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16)};
    if (dims.count() == 0)
        throw FormatError("zero dimension in header", 8);
    Spacing spacing{};
    for (std::size_t a = 0; a < 3; ++a) {
        spacing[a] = get_f32(bytes, 20 + 4 * a);
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
            throw FormatError("voxel size must be positive", 20 + 4 * a);
    }
    const std::size_t expected = kHeaderBytes + 4 * dims.count();
    if (bytes.size() < expected)
        throw FormatError("truncated payload: expected " + std::to_string(dims.count()) + " values, found " +
                              std::to_string((bytes.size() - kHeaderBytes) / 4),
                          bytes.size());
    if (bytes.size() > expected)
        throw FormatError("trailing bytes after payload", expected);

    std::vector<double> data(dims.count());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const float f = get_f32(bytes, kHeaderBytes + 4 * i);
        if (!std::isfinite(f))
            throw FormatError("non-finite value at voxel " + to_string(dims.coord(i)), kHeaderBytes + 4 * i);
        data[i] = f;
    }
    return Volume(dims, spacing, std::move(data));
}

void write_volume(const Volume& volume, const std::filesystem::path& path)
{
    const auto bytes = encode_volume(volume);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("failed writing " + path.string());
}

Volume read_volume(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_volume(bytes);
}

} // namespace leqmod
