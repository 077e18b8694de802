#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace budamaf {

using Bytes = std::vector<std::uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
    return std::string(b.begin(), b.end());
}

std::string base64_encode(const Bytes& data);
std::optional<Bytes> base64_decode(std::string_view text);

std::string hex_encode(const Bytes& data);
std::optional<Bytes> hex_decode(std::string_view text);

}  // namespace budamaf
