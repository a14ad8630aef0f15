#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tde_plankton {

enum class ErrorKind {
    Domain,
    InvalidParams,
    SingularRate,
    NoCoexistence,
    NotExist,
    NoConverge,
    NoSignChange,
    NewtonFail,
    InsufficientHistory,
    InfeasibleBiomass,
    OutOfRegion,
    Config,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Domain: return "Domain";
        case ErrorKind::InvalidParams: return "InvalidParams";
        case ErrorKind::SingularRate: return "SingularRate";
        case ErrorKind::NoCoexistence: return "NoCoexistence";
        case ErrorKind::NotExist: return "NotExist";
        case ErrorKind::NoConverge: return "NoConverge";
        case ErrorKind::NoSignChange: return "NoSignChange";
        case ErrorKind::NewtonFail: return "NewtonFail";
        case ErrorKind::InsufficientHistory: return "InsufficientHistory";
        case ErrorKind::InfeasibleBiomass: return "InfeasibleBiomass";
        case ErrorKind::OutOfRegion: return "OutOfRegion";
        case ErrorKind::Config: return "Config";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a kind so callers (and the
/// CLI exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace tde_plankton
