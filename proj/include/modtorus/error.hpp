#pragma once

#include <stdexcept>
#include <string>

namespace modtorus {

enum class errc {
    invalid_argument,
    not_a_unit,
    unsupported_modulus,
    invalid_index,
    unsupported_radius,
    resource_limit,
};

inline const char* to_string(errc code) noexcept {
    switch (code) {
    case errc::invalid_argument: return "invalid-argument";
    case errc::not_a_unit: return "not-a-unit";
    case errc::unsupported_modulus: return "unsupported-modulus";
    case errc::invalid_index: return "invalid-index";
    case errc::unsupported_radius: return "unsupported-radius";
    case errc::resource_limit: return "resource-limit";
    }
    return "unknown";
}

// Every failure raised by the library carries one of the codes above so the
// CLI can map it onto an exit status.
class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool condition, errc code, const std::string& what) {
    if (!condition) fail(code, what);
}

} // namespace modtorus
