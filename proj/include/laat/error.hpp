#pragma once

#include <stdexcept>
#include <string>

namespace laat {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV, schema, rule files).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or argument combination.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Transport, status, or validation failure talking to a chat-completion provider.
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, int attempts = 0)
        : Error(what), attempts_(attempts) {}

    [[nodiscard]] int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// A cache entry exists but cannot be decoded.
class CacheError : public Error {
public:
    using Error::Error;
};

/// Statistical test preconditions not met (e.g. too few nonzero differences).
class StatsError : public Error {
public:
    using Error::Error;
};

} // namespace laat
