#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gossipcd {

// Library-wide error type. `code` is a stable machine-readable identifier;
// the CLI prints errors as a single line "error[<code>] <message>".
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error("error[" + code + "] " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(std::string_view code, const std::string& message) {
    throw Error(std::string(code), message);
}

namespace errc {
inline constexpr std::string_view invalid_edge = "InvalidEdge";
inline constexpr std::string_view disconnected_graph = "DisconnectedGraph";
inline constexpr std::string_view too_large = "TooLarge";
inline constexpr std::string_view empty_support = "EmptySupport";
inline constexpr std::string_view not_irreducible = "NotIrreducible";
inline constexpr std::string_view degenerate_bound = "DegenerateBound";
inline constexpr std::string_view nondistinguishable_pair = "NondistinguishablePair";
inline constexpr std::string_view out_of_support = "OutOfSupport";
inline constexpr std::string_view non_finite = "NonFinite";
inline constexpr std::string_view identity_violation = "IdentityViolation";
inline constexpr std::string_view out_of_range = "OutOfRange";
inline constexpr std::string_view zero_false_alarms = "ZeroFalseAlarms";
inline constexpr std::string_view degenerate_fit = "DegenerateFit";
inline constexpr std::string_view invalid_eps = "InvalidEps";
inline constexpr std::string_view parse_error = "ParseError";
inline constexpr std::string_view validation_error = "ValidationError";
inline constexpr std::string_view invalid_argument = "InvalidArgument";
inline constexpr std::string_view io_error = "IoError";
inline constexpr std::string_view internal = "Internal";
} // namespace errc

// Always-on invariant check (independent of NDEBUG).
#define GOSSIPCD_CHECK(cond, message)                                          \
    do {                                                                       \
        if (!(cond)) ::gossipcd::fail(::gossipcd::errc::internal, (message));  \
    } while (false)

} // namespace gossipcd
