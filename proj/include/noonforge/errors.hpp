#pragma once

#include <stdexcept>
#include <string>

namespace noonforge {

/// Argument outside its mathematical domain (bad tau, non-square matrix, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Photon number or grid size above the configured cap.
class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// The ring boundary-condition system is singular or too ill-conditioned to trust.
class DegenerateDeviceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace noonforge
