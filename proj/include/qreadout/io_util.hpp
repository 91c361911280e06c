#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

namespace qreadout {
namespace detail {

inline bool parse_int(const std::string& tok, int& out) {
    std::size_t pos = 0;
    try {
        out = std::stoi(tok, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == tok.size();
}

inline bool parse_double(const std::string& tok, double& out) {
    std::size_t pos = 0;
    try {
        out = std::stod(tok, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == tok.size() && std::isfinite(out);
}

inline std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xCBF29CE484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace detail

/// All serialized values are rounded to 1e-9 so that reports are
/// reproducible at a documented precision.
inline double round_for_output(double x) {
    if (!std::isfinite(x)) return x;
    return std::nearbyint(x * 1e9) / 1e9;
}

/// Compact decimal form of a value already rounded to 1e-9.
inline std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", round_for_output(x));
    return buf;
}

}  // namespace qreadout
