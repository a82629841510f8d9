#include "aerobeam/numfmt.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "aerobeam/errors.hpp"

namespace aerobeam {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) throw DomainError("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw DomainError("not a number: '" + s + "'");
  }
  return v;
}

unsigned long long fnv1a64(const std::string& bytes) {
  unsigned long long h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace aerobeam
