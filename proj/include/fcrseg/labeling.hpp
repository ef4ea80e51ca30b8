#pragma once

#include <cstdint>
#include <optional>

#include "fcrseg/types.hpp"

namespace fcrseg {

enum class Connectivity { Four = 4, Eight = 8 };

struct Components {
  /// Component id per pixel, 1..count in scanline order of each component's
  /// first pixel; 0 where the pixel was ignored.
  Grid<std::int32_t> ids;
  int count = 0;
};

/// Labels maximal regions of equal value. Pixels equal to `ignore_value` are
/// left at 0 and never joined. Two-pass union-find with path compression.
Components connected_components(const Grid<std::int32_t>& values, Connectivity connectivity,
                                std::optional<std::int32_t> ignore_value = std::nullopt);

}  // namespace fcrseg
