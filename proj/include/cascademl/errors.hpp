#pragma once

#include <stdexcept>
#include <string>

namespace cml {

/// Base class for every error thrown by this library.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad arguments, invariant violations, malformed configuration.
class validation_error : public error {
public:
    explicit validation_error(const std::string& what) : error(what) {}
};

/// Filesystem and parsing failures.
class io_error : public error {
public:
    explicit io_error(const std::string& what) : error(what) {}
};

/// A feature selector rejected every feature.
class no_features_error : public error {
public:
    explicit no_features_error(const std::string& what) : error(what) {}
};

/// Training produced a non-finite loss.
class divergence_error : public error {
public:
    explicit divergence_error(const std::string& what) : error(what) {}
};

} // namespace cml
