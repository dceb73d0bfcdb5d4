#pragma once

#include <charconv>
#include <stdexcept>
#include <string>

namespace oodrl {

// Shortest round-trip decimal representation; keeps CSV output byte-stable
// across reruns.
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc{}) throw std::runtime_error("fmt_double: conversion failed");
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::runtime_error("parse_double: bad number: " + s);
    return v;
}

}  // namespace oodrl
