#pragma once

#include <cstdint>

namespace vv {

using ClassId = std::uint8_t;

/// Ground-truth sentinel: excluded from every loss and metric.
inline constexpr ClassId kUnannotated = 255;

/// Prediction sentinel: voxel or pixel with no prediction.
inline constexpr ClassId kUnpredicted = 255;

inline constexpr bool is_annotated(ClassId c) { return c != kUnannotated; }

}  // namespace vv
