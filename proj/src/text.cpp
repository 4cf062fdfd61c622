#include "leqmod/text.hpp"

#include "leqmod/error.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace leqmod::text {

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::string_view trim(std::string_view s) noexcept
{
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view s, std::string_view what)
{
    s = trim(s);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("cannot parse '" + std::string(s) + "' as a number for " + std::string(what));
    return v;
}

std::uint64_t parse_u64(std::string_view s, std::string_view what)
{
    s = trim(s);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("cannot parse '" + std::string(s) + "' as an unsigned integer for " + std::string(what));
    return v;
}

bool parse_bool(std::string_view s, std::string_view what)
{
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes" || s == "on")
        return true;
    if (s == "false" || s == "0" || s == "no" || s == "off")
        return false;
    throw ConfigError("cannot parse '" + std::string(s) + "' as a boolean for " + std::string(what));
}

std::vector<double> parse_double_list(std::string_view s, std::string_view what)
{
    std::vector<double> out;
    if (trim(s).empty())
        return out;
    for (const auto& f : split(s, ','))
        out.push_back(parse_double(f, what));
    return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) noexcept
{
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    std::array<char, 17> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + 16, v, 16);
    std::string s(buf.data(), res.ptr);
    return std::string(16 - s.size(), '0') + s;
}

} // namespace leqmod::text
