#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sofof {

/// Scenario-epoch time in integer milliseconds.
using TimeMs = std::int64_t;

/// Raised when a value violates a type invariant (bad polygon, empty route, ...).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an argument lies outside the domain of an operation (v_c <= 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct StationId {
    std::uint32_t value{0};

    friend auto operator<=>(const StationId&, const StationId&) = default;
};

/// Short lowercase identifier of an offloadable service, e.g. "tpl".
class ServiceId {
public:
    ServiceId() = default;
    explicit ServiceId(std::string name);

    const std::string& str() const noexcept { return name_; }

    static bool is_valid(std::string_view name) noexcept;

    friend auto operator<=>(const ServiceId&, const ServiceId&) = default;

private:
    std::string name_;
};

inline bool ServiceId::is_valid(std::string_view name) noexcept
{
    if (name.empty()) {
        return false;
    }
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
        if (!ok) {
            return false;
        }
    }
    return true;
}

inline ServiceId::ServiceId(std::string name) : name_(std::move(name))
{
    if (!is_valid(name_)) {
        throw ValidationError("invalid service id '" + name_ +
                              "': expected lowercase alphanumerics and '-'");
    }
}

}  // namespace sofof

template <>
struct std::hash<sofof::StationId> {
    std::size_t operator()(const sofof::StationId& id) const noexcept
    {
        return std::hash<std::uint32_t>{}(id.value);
    }
};
