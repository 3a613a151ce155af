#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gazekit/dataset.hpp"

namespace gazekit {

enum class MapKind { raw, standardized, category, marginalized };

const char* to_string(MapKind k);

// Dense saliency grid at full stimulus resolution, row-major 64-bit reals.
struct FixationMap {
    int width = 0;
    int height = 0;
    MapKind kind = MapKind::raw;
    double sigma_px = 0.0;
    std::vector<double> values;
    std::vector<std::string> provenance;

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }

    // Nearest-cell lookup, clamped to the grid border.
    double sample(double x, double y) const;

    std::size_t cell_count() const { return values.size(); }
};

// Duration-weighted Gaussian splat map:
//   F'(x,y) = sum_f t_f * exp(-((x_f-x)^2 + (y_f-y)^2) / sigma^2) / sum_f t_f
// The exponent denominator is sigma^2 (not 2*sigma^2). Kernels are truncated
// at 4*sigma, where the tail is below e^-16. use_duration=false sets t_f = 1.
FixationMap raw_map(const std::vector<Fixation>& fixations, const StimulusGeometry& geometry,
                    double sigma_px, bool use_duration = true);

// Zero-mean unit-std map over every cell of the stimulus rectangle
// (population standard deviation). Errors on a zero-variance grid.
FixationMap standardize(const FixationMap& map);

// Cellwise mean of standardized per-sketch maps.
FixationMap category_map(const std::vector<FixationMap>& maps);

// M_c = U_c - mean over categories of U; needs at least two categories.
std::map<std::string, FixationMap> marginalize(const std::map<std::string, FixationMap>& category_maps);

enum class RenderStyle { gray, heat };

// Min-max scales to [0,255] (a constant map renders as 128) and writes a
// binary PGM (gray) or PPM (heat) plus the <image>.meta.json sidecar holding
// the original min/max for exact de-scaling.
void render_map(const FixationMap& map, const std::string& path, RenderStyle style);

// Quantized level of one cell value under min-max scaling; the render path
// and de-scaling oracles share this definition.
std::uint8_t quantize_level(double value, double min_value, double max_value);

// Fixed jet-like ramp used by the heat style.
std::array<std::uint8_t, 3> heat_rgb(std::uint8_t level);

}  // namespace gazekit
