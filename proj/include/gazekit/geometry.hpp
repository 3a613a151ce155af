#pragma once

#include "gazekit/errors.hpp"

namespace gazekit {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Stimulus raster and the pixel size of one degree of visual angle.
// Defaults match a 1024x1024 display where 1 degree subtends ~36 px.
struct StimulusGeometry {
    int width_px = 1024;
    int height_px = 1024;
    double pixels_per_degree = 36.0;

    void validate() const {
        if (width_px <= 0 || height_px <= 0)
            throw ValidationError("stimulus dimensions must be positive");
        if (pixels_per_degree <= 0.0)
            throw ValidationError("pixels_per_degree must be positive");
    }

    bool contains(double x, double y) const {
        return x >= 0.0 && x < static_cast<double>(width_px) &&
               y >= 0.0 && y < static_cast<double>(height_px);
    }
};

}  // namespace gazekit
