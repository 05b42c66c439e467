#pragma once

#include <cstdint>

namespace offpath::net {

// Virtual time in whole milliseconds.
using SimTime = std::int64_t;

}  // namespace offpath::net
