#pragma once

#include <string>

#include "turnwise/gateway.hpp"

namespace turnwise::detail {

/// Canonical serialization of every request field; the basis for cache keys
/// and mock seeds.
std::string canonical_request(const ChatRequest& request);

}  // namespace turnwise::detail
