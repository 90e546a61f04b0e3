#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rgan {

// Error taxonomy used across the library. Contract violations are programmer
// errors (bad shapes, empty inputs); the others map to user-facing failures.
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};
struct IndexError : std::out_of_range {
    explicit IndexError(const std::string& msg) : std::out_of_range(msg) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};
struct GrammarError : std::runtime_error {
    explicit GrammarError(const std::string& msg) : std::runtime_error(msg) {}
};

#define RGAN_REQUIRE(cond, msg)                       \
    do {                                              \
        if (!(cond)) throw ::rgan::ContractError(msg); \
    } while (0)

#define RGAN_REQUIRE_INDEX(cond, msg)               \
    do {                                            \
        if (!(cond)) throw ::rgan::IndexError(msg); \
    } while (0)

#define RGAN_REQUIRE_CONFIG(cond, msg)               \
    do {                                             \
        if (!(cond)) throw ::rgan::ConfigError(msg); \
    } while (0)

}  // namespace rgan
