#pragma once

#include <cstdint>
#include <stdexcept>

namespace mvstream {

using PassageId = std::uint64_t;
using Ordinal = std::uint64_t;   // 1-based position in the ingest stream
using Timestamp = std::int64_t;  // seconds since epoch, UTC

// Internal consistency breach (e.g. a document covered by zero or two active
// shards). The CLI maps these to exit code 3.
struct invariant_violation : std::logic_error {
  using std::logic_error::logic_error;
};

// Malformed or incompatible data: bad magic, truncated file, fingerprint
// mismatch. CLI exit code 2.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments. CLI exit code 1.
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace mvstream
