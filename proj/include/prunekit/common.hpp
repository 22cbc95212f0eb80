#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace prunekit {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input, bad arguments, missing files. CLI exit code 2.
struct ValidationError : Error {
    using Error::Error;
};

// A FLOPs target that cannot be met by pruning. CLI exit code 3.
struct InfeasibleError : Error {
    using Error::Error;
};

// Numeric failure at runtime (divergence, non-finite values). CLI exit code 4.
struct NumericError : Error {
    using Error::Error;
};

// RFC 4648 base64, standard alphabet with padding.
std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string fnv1a64_hex(const std::string& text);

// Parallelism cap from PRUNEKIT_THREADS (>= 1). Defaults to the hardware
// concurrency when the variable is unset.
int thread_budget();

}  // namespace prunekit
