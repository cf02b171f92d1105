// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace voxpipe {

/// Parses a byte count with an optional suffix: B, KB/MB/GB/TB (powers of
/// 1000), KiB/MiB/GiB/TiB (powers of 1024), bit/Kbit/Mbit/Gbit/Tbit (bits,
/// divided by 8). Throws InputError.
double parse_bytes(const std::string& text);

/// As parse_bytes, with an optional trailing "/s". Result is bytes/second
/// and must be positive.
double parse_bandwidth(const std::string& text);

}  // namespace voxpipe
