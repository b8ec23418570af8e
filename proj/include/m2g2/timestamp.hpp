// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace m2g2 {

/// Seconds since 1970-01-01T00:00:00Z.
using UnixSeconds = std::int64_t;

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS]` (or a space separator) with
/// an optional trailing `Z`. Offsets other than UTC are rejected.
UnixSeconds parse_timestamp(std::string_view text);

/// `YYYY-MM-DDTHH:MM:SS`
std::string format_timestamp(UnixSeconds t);

}  // namespace m2g2
