#pragma once

#include <stdexcept>
#include <string>

namespace jcdi {

// Error taxonomy mapped to CLI exit codes: usage -> 1, data/contract -> 2,
// numerical -> 3.
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid run configuration (bad grid, horizon overflow, unknown keys).
struct config_error : usage_error {
    using usage_error::usage_error;
};

}  // namespace jcdi
