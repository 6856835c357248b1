#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace perfguard {

/// Shortest round-trip decimal form; used for CSV so identical values always
/// serialize to identical bytes.
inline std::string format_double(double value) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

/// Fixed 6-decimal form for human-facing CLI output.
inline std::string format_fixed6(double value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return std::string(buf);
}

} // namespace perfguard
