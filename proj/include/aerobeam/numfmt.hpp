#pragma once

#include <string>

namespace aerobeam {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

// Strict parse of a full string as double; throws DomainError on garbage.
double parse_double(const std::string& s);

// 64-bit FNV-1a over a byte string.
unsigned long long fnv1a64(const std::string& bytes);

}  // namespace aerobeam
