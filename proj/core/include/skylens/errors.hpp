#pragma once

#include <stdexcept>
#include <string>

namespace skylens {

// Filesystem/serialization failures, kept distinct from argument and
// numerical errors so callers can branch on them.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error("io error: " + what) {}
};

// Input data insufficient or internally inconsistent for an estimation
// procedure (e.g. RANSAC consensus too small, single-class labels).
class EstimationError : public std::runtime_error {
public:
    explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace skylens
