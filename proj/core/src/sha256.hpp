#pragma once

#include <string>
#include <string_view>

namespace turnwise::detail {

/// Hex-encoded SHA-256 digest (OpenSSL EVP).
std::string sha256_hex(std::string_view data);

}  // namespace turnwise::detail
