#pragma once

#include <string>

namespace onphase {

/// Shortest decimal form that round-trips the double exactly. Output is
/// locale-independent and stable, so rendered files are byte-reproducible.
std::string format_double(double v);

/// Current UTC time as ISO-8601 with second resolution.
std::string utc_timestamp();

}  // namespace onphase
