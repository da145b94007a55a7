#pragma once

#include <array>
#include <cstdint>

#include "curbsight/camera.hpp"

namespace curbsight {

/// One object sighting in one frame. The pose is joined via frame_id from
/// the track.
struct Observation {
    std::int64_t object_id = 0;
    std::int64_t frame_id = 0;
    PixelMeasurement pixel;
    std::array<double, 3> depth_samples{0.0, 0.0, 0.0};
};

}  // namespace curbsight
