#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zest
{
    /// Base class for every error raised by the library.
    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Vector or matrix sizes that do not line up.
    class DimensionError : public Error
    {
    public:
        using Error::Error;
    };

    /// Invalid combination of settings (k < 2 with bias correction, missing gradient, ...).
    class ConfigError : public Error
    {
    public:
        using Error::Error;
    };

    /// Input outside the region where a closed form holds (e.g. 1 - t rho^2 lambda <= 0).
    class DomainError : public Error
    {
    public:
        using Error::Error;
    };

    /// Iterative routine failed to converge or produced a non-finite value.
    class NumericError : public Error
    {
    public:
        using Error::Error;
    };

    /// File could not be read or written.
    class IoError : public Error
    {
    public:
        using Error::Error;
    };

    /// Objective returned a non-finite loss. Carries the query that produced it.
    class EvaluationError : public Error
    {
    public:
        EvaluationError(const std::string &what, std::ptrdiff_t query_index = -1)
            : Error(what), query_index_(query_index)
        {
        }

        std::ptrdiff_t query_index() const noexcept { return query_index_; }

    private:
        std::ptrdiff_t query_index_;
    };
}
