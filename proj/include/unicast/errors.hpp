#pragma once

#include <stdexcept>
#include <string>

namespace unicast {

// Error taxonomy. Each category maps to a distinct failure contract:
// dimension_error  - tensor/shape mismatches
// contract_error   - API preconditions violated (non-scalar loss, bad carried length, ...)
// config_error     - invalid or inconsistent run configuration
// input_error      - malformed external data (files, text, series)
// numeric_error    - non-finite values detected during computation
struct dimension_error : std::runtime_error {
    explicit dimension_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct contract_error : std::runtime_error {
    explicit contract_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct input_error : std::runtime_error {
    explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace unicast
