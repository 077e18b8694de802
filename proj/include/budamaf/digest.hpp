#pragma once

#include <array>
#include <string>

#include "budamaf/bytes.hpp"

namespace budamaf {

using Digest256 = std::array<std::uint8_t, 32>;

Digest256 sha256(const Bytes& data);
Digest256 sha256(std::string_view data);

// Lowercase hex of the 256-bit content digest.
std::string sha256_hex(const Bytes& data);
std::string sha256_hex(std::string_view data);

// Keyed digest used by the reference authenticated transform.
Digest256 hmac_sha256(const Bytes& key, const Bytes& data);

}  // namespace budamaf
