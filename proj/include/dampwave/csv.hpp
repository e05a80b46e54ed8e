#pragma once

#include <charconv>
#include <string>

namespace dampwave {

/// Shortest-round-trip style text with 17 significant digits and '.' as the decimal
/// separator, independent of the global locale.
inline std::string format_double(double x)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

} // namespace dampwave
