#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace labloom {

/// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// First 8 bytes of SHA-256 as an integer; used for keyed RNG streams.
std::uint64_t sha256_u64(std::string_view bytes);

}  // namespace labloom
