#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace comsgarch {

/// Malformed input: bad shapes, non-increasing timestamps, out-of-range settings.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure: a variance or probability left its admissible range.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what, std::optional<std::size_t> index = std::nullopt)
        : std::domain_error(what), index_(index) {}

    /// Zero-based position in the series where the failure happened, if known.
    [[nodiscard]] std::optional<std::size_t> index() const noexcept { return index_; }

private:
    std::optional<std::size_t> index_;
};

/// Wraps a DomainError with the series position it came from.
[[noreturn]] void rethrow_with_index(const DomainError& err, std::size_t index);

}  // namespace comsgarch
