#pragma once

#include <array>
#include <charconv>
#include <cstddef>
#include <string>
#include <system_error>

#include "cascademl/errors.hpp"

namespace cml {

/// Shortest decimal form that parses back to the same double.
/// Locale-independent, so serialized output is byte-stable.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

/// Fixed-point with `precision` digits after the decimal point.
inline std::string format_fixed(double v, int precision) {
    std::array<char, 128> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                             std::chars_format::fixed, precision);
    return std::string(buf.data(), res.ptr);
}

/// General format with `precision` significant digits.
inline std::string format_general(double v, int precision) {
    std::array<char, 128> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                             std::chars_format::general, precision);
    return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view text) {
    double out = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end)
        throw io_error("not a number: '" + std::string(text) + "'");
    return out;
}

} // namespace cml
