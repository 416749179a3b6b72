#pragma once

#include <string>

namespace miqp_mpc {

/// Shortest decimal string that round-trips to the same double; "nan",
/// "inf" and "-inf" for non-finite values.
std::string format_double(double value);

}  // namespace miqp_mpc
