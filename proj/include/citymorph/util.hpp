#pragma once

#include <charconv>
#include <string>

namespace citymorph {

// Shortest round-trip decimal form; locale-independent and deterministic, so
// CSV/JSON artifacts are byte-stable across runs.
inline std::string fmt_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

} // namespace citymorph
