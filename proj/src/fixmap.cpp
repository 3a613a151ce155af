#include "gazekit/fixmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gazekit/errors.hpp"
#include "gazekit/version.hpp"
#include <json.hpp>

namespace gazekit {

const char* to_string(MapKind k) {
    switch (k) {
        case MapKind::raw: return "raw";
        case MapKind::standardized: return "standardized";
        case MapKind::category: return "category";
        case MapKind::marginalized: return "marginalized";
    }
    return "unknown";
}

double FixationMap::sample(double x, double y) const {
    int cx = static_cast<int>(std::lround(x));
    int cy = static_cast<int>(std::lround(y));
    cx = std::clamp(cx, 0, width - 1);
    cy = std::clamp(cy, 0, height - 1);
    return at(cx, cy);
}

FixationMap raw_map(const std::vector<Fixation>& fixations, const StimulusGeometry& geometry,
                    double sigma_px, bool use_duration) {
    geometry.validate();
    if (!(sigma_px > 0.0) || !std::isfinite(sigma_px))
        throw InvalidArgument("sigma_px must be positive and finite");
    if (fixations.empty()) throw ValidationError("cannot build a map from zero fixations");

    FixationMap map;
    map.width = geometry.width_px;
    map.height = geometry.height_px;
    map.kind = MapKind::raw;
    map.sigma_px = sigma_px;
    map.values.assign(static_cast<std::size_t>(map.width) * map.height, 0.0);

    const double inv_s2 = 1.0 / (sigma_px * sigma_px);
    const double cutoff = 4.0 * sigma_px;

    double total_weight = 0.0;
    for (const Fixation& f : fixations) {
        const double w = use_duration ? f.duration_ms : 1.0;
        total_weight += w;
        const int x0 = std::max(0, static_cast<int>(std::ceil(f.x - cutoff)));
        const int x1 = std::min(map.width - 1, static_cast<int>(std::floor(f.x + cutoff)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(f.y - cutoff)));
        const int y1 = std::min(map.height - 1, static_cast<int>(std::floor(f.y + cutoff)));
        for (int y = y0; y <= y1; ++y) {
            const double dy = f.y - y;
            double* row = map.values.data() + static_cast<std::size_t>(y) * map.width;
            for (int x = x0; x <= x1; ++x) {
                const double dx = f.x - x;
                row[x] += w * std::exp(-(dx * dx + dy * dy) * inv_s2);
            }
        }
    }
    if (!(total_weight > 0.0)) throw ValidationError("total fixation weight is zero");
    const double inv_total = 1.0 / total_weight;
    for (double& v : map.values) v *= inv_total;
    return map;
}

FixationMap standardize(const FixationMap& map) {
    if (map.values.empty()) throw InvalidArgument("cannot standardize an empty map");
    const double n = static_cast<double>(map.cell_count());
    double mean = 0.0;
    for (double v : map.values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : map.values) {
        const double d = v - mean;
        var += d * d;
    }
    var /= n;
    if (var <= 1e-30) throw ValidationError("map has zero variance; cannot standardize");
    const double inv_std = 1.0 / std::sqrt(var);

    FixationMap out = map;
    out.kind = MapKind::standardized;
    for (double& v : out.values) v = (v - mean) * inv_std;
    return out;
}

FixationMap category_map(const std::vector<FixationMap>& maps) {
    if (maps.empty()) throw InvalidArgument("category map needs at least one input map");
    const FixationMap& first = maps.front();
    for (const FixationMap& m : maps) {
        if (m.width != first.width || m.height != first.height)
            throw ValidationError("category map inputs disagree on grid size");
    }
    FixationMap out = first;
    out.kind = MapKind::category;
    const double inv_n = 1.0 / static_cast<double>(maps.size());
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        double acc = 0.0;
        for (const FixationMap& m : maps) acc += m.values[i];
        out.values[i] = acc * inv_n;
    }
    return out;
}

std::map<std::string, FixationMap> marginalize(const std::map<std::string, FixationMap>& category_maps) {
    if (category_maps.size() < 2)
        throw InvalidArgument("marginalization needs at least two categories");
    const FixationMap& first = category_maps.begin()->second;
    for (const auto& [name, m] : category_maps) {
        if (m.width != first.width || m.height != first.height)
            throw ValidationError("category maps disagree on grid size");
    }
    std::vector<double> grand(first.cell_count(), 0.0);
    for (const auto& [name, m] : category_maps)
        for (std::size_t i = 0; i < grand.size(); ++i) grand[i] += m.values[i];
    const double inv_c = 1.0 / static_cast<double>(category_maps.size());
    for (double& v : grand) v *= inv_c;

    std::map<std::string, FixationMap> out;
    for (const auto& [name, m] : category_maps) {
        FixationMap margin = m;
        margin.kind = MapKind::marginalized;
        for (std::size_t i = 0; i < margin.values.size(); ++i) margin.values[i] -= grand[i];
        out.emplace(name, std::move(margin));
    }
    return out;
}

std::uint8_t quantize_level(double value, double min_value, double max_value) {
    const double span = max_value - min_value;
    if (!(span > 0.0)) return 128;
    double q = (value - min_value) / span * 255.0;
    long level = std::lround(q);
    level = std::clamp(level, 0L, 255L);
    return static_cast<std::uint8_t>(level);
}

std::array<std::uint8_t, 3> heat_rgb(std::uint8_t level) {
    // Piecewise-linear blue -> cyan -> yellow -> red ramp.
    const double t = level / 255.0;
    double r, g, b;
    if (t < 0.25) {
        r = 0.0;
        g = t / 0.25;
        b = 1.0;
    } else if (t < 0.5) {
        r = 0.0;
        g = 1.0;
        b = 1.0 - (t - 0.25) / 0.25;
    } else if (t < 0.75) {
        r = (t - 0.5) / 0.25;
        g = 1.0;
        b = 0.0;
    } else {
        r = 1.0;
        g = 1.0 - (t - 0.75) / 0.25;
        b = 0.0;
    }
    auto to_byte = [](double v) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
    };
    return {to_byte(r), to_byte(g), to_byte(b)};
}

void render_map(const FixationMap& map, const std::string& path, RenderStyle style) {
    if (map.values.empty()) throw InvalidArgument("cannot render an empty map");
    const auto [mn_it, mx_it] = std::minmax_element(map.values.begin(), map.values.end());
    const double mn = *mn_it;
    const double mx = *mx_it;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << (style == RenderStyle::gray ? "P5" : "P6") << "\n";
    out << "# gazekit " << GAZEKIT_VERSION << "\n";
    out << map.width << " " << map.height << "\n255\n";
    std::vector<std::uint8_t> row;
    row.reserve(static_cast<std::size_t>(map.width) * (style == RenderStyle::gray ? 1 : 3));
    for (int y = 0; y < map.height; ++y) {
        row.clear();
        for (int x = 0; x < map.width; ++x) {
            const std::uint8_t level = quantize_level(map.at(x, y), mn, mx);
            if (style == RenderStyle::gray) {
                row.push_back(level);
            } else {
                const auto rgb = heat_rgb(level);
                row.insert(row.end(), rgb.begin(), rgb.end());
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("failed while writing " + path);
    out.close();

    nlohmann::ordered_json meta;
    meta["min"] = mn;
    meta["max"] = mx;
    meta["kind"] = to_string(map.kind);
    std::ofstream side(path + ".meta.json");
    if (!side) throw IoError("cannot open " + path + ".meta.json for writing");
    side << meta.dump(2) << "\n";
}

}  // namespace gazekit
