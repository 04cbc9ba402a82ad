#pragma once

#include <string>
#include <string_view>

namespace mixlen {

inline constexpr std::string_view kVersion = "0.1.0";

// Shortest decimal text that round-trips to the same double; "" for NaN.
std::string format_double(double v);

// 64-bit FNV-1a digest as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace mixlen
