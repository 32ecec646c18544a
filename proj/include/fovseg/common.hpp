// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace fovseg {

inline constexpr const char* kVersion = "0.1.0";

// Violated operation precondition or shape contract.
struct ContractViolation : std::runtime_error {
    explicit ContractViolation(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or inconsistent configuration (wrong channel counts, missing baseline, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File I/O failure, always carries the offending path.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fovseg

#define FOV_REQUIRE(cond, msg)                                        \
    do {                                                              \
        if (!(cond)) throw ::fovseg::ContractViolation(               \
            std::string(msg) + " [" #cond "]");                      \
    } while (0)

#define FOV_CONFIG_REQUIRE(cond, msg)                                 \
    do {                                                              \
        if (!(cond)) throw ::fovseg::ConfigError(msg);                \
    } while (0)
