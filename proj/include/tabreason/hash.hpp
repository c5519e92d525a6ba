#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace tabreason {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// First eight bytes of SHA-256, big-endian.
std::uint64_t sha256_u64(std::string_view bytes);

} // namespace tabreason
