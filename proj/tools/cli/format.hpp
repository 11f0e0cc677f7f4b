#pragma once

#include <string>

namespace siprop::cli {

/// Shortest representation that round-trips to the same double.
std::string fmt(double v);

}  // namespace siprop::cli
