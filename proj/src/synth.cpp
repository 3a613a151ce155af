#include "gazekit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace gazekit {

namespace {

using ordered_json = nlohmann::ordered_json;

void validate_spec(const SynthSpec& spec) {
    spec.geometry.validate();
    if (spec.subjects_per_sketch < 1) throw ValidationError("subjects_per_sketch must be >= 1");
    if (spec.categories.empty()) throw ValidationError("synth spec has no categories");
    if (spec.length.kind == LengthModel::Kind::fixed && spec.length.fixed_len < 1)
        throw ValidationError("fixed sequence length must be >= 1");
    if (spec.length.kind == LengthModel::Kind::uniform_int &&
        (spec.length.lo < 1 || spec.length.hi < spec.length.lo))
        throw ValidationError("uniform_int length range invalid");
    if (spec.duration.kind == DurationModel::Kind::fixed && spec.duration.value <= 0.0)
        throw ValidationError("fixed duration must be positive");
    if (spec.duration.kind == DurationModel::Kind::uniform &&
        (spec.duration.lo <= 0.0 || spec.duration.hi < spec.duration.lo))
        throw ValidationError("uniform duration range invalid");
    for (const auto& cat : spec.categories) {
        if (cat.sketches < 1) throw ValidationError("category '" + cat.name + "': sketches < 1");
        if (cat.parts.empty())
            throw ValidationError("category '" + cat.name + "': empty part chain");
        for (const auto& p : cat.parts)
            if (p.sigma_x <= 0.0 || p.sigma_y <= 0.0)
                throw ValidationError("category '" + cat.name + "', part '" + p.label +
                                      "': non-positive covariance");
        const std::size_t n = cat.parts.size();
        if (cat.initial.size() != n || cat.transition.size() != n)
            throw ValidationError("category '" + cat.name + "': chain dimensions mismatch");
        double isum = 0.0;
        for (double v : cat.initial) {
            if (v < 0.0) throw ValidationError("category '" + cat.name + "': negative probability");
            isum += v;
        }
        if (isum <= 0.0) throw ValidationError("category '" + cat.name + "': empty initial vector");
        for (const auto& row : cat.transition) {
            if (row.size() != n)
                throw ValidationError("category '" + cat.name + "': ragged transition matrix");
            double rsum = 0.0;
            for (double v : row) {
                if (v < 0.0)
                    throw ValidationError("category '" + cat.name + "': negative probability");
                rsum += v;
            }
            if (rsum <= 0.0)
                throw ValidationError("category '" + cat.name + "': zero transition row");
        }
    }
}

// Draws an index from unnormalized non-negative weights.
std::size_t sample_index(const std::vector<double>& weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double u = rng.next_double() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.size() - 1;
}

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

std::string zero_padded(int v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*d", width, v);
    return buf;
}

}  // namespace

SynthResult synthesize_dataset(const SynthSpec& spec, const Rng& rng) {
    validate_spec(spec);
    const auto& geom = spec.geometry;
    const double max_x = static_cast<double>(geom.width_px - 1);
    const double max_y = static_cast<double>(geom.height_px - 1);

    SynthResult result;
    std::vector<ViewingSession> sessions;
    for (const auto& cat : spec.categories) {
        // Part boxes are shared by every sketch of the category.
        PartAnnotation ann_template;
        for (const auto& p : cat.parts) {
            PartPiece piece;
            piece.label = p.label;
            const double x0 = clip(p.mean_x - 2.0 * p.sigma_x, 0.0, max_x);
            const double x1 = clip(p.mean_x + 2.0 * p.sigma_x, 0.0, max_x);
            const double y0 = clip(p.mean_y - 2.0 * p.sigma_y, 0.0, max_y);
            const double y1 = clip(p.mean_y + 2.0 * p.sigma_y, 0.0, max_y);
            piece.polygon = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
            ann_template.parts.push_back(std::move(piece));
        }

        for (int sk = 0; sk < cat.sketches; ++sk) {
            const std::string sketch_id = cat.name + "_" + zero_padded(sk + 1, 3);
            PartAnnotation ann = ann_template;
            ann.sketch_id = sketch_id;
            result.annotations.emplace(sketch_id, std::move(ann));

            for (int sj = 0; sj < spec.subjects_per_sketch; ++sj) {
                const std::string subject_id = "s" + zero_padded(sj + 1, 2);
                // Substream per session: output is independent of loop order.
                Rng stream = rng.derive("synth:" + sketch_id + ":" + subject_id);

                int len = spec.length.fixed_len;
                if (spec.length.kind == LengthModel::Kind::uniform_int)
                    len = spec.length.lo +
                          static_cast<int>(stream.next_below(
                              static_cast<std::uint64_t>(spec.length.hi - spec.length.lo + 1)));

                ViewingSession s;
                s.sketch_id = sketch_id;
                s.category = cat.name;
                s.subject_id = subject_id;
                s.regime = spec.regime;
                std::vector<std::string> labels;
                std::size_t state = sample_index(cat.initial, stream);
                for (int i = 0; i < len; ++i) {
                    if (i > 0) state = sample_index(cat.transition[state], stream);
                    const auto& part = cat.parts[state];
                    Fixation f;
                    f.x = clip(part.mean_x + part.sigma_x * stream.normal(), 0.0, max_x);
                    f.y = clip(part.mean_y + part.sigma_y * stream.normal(), 0.0, max_y);
                    f.duration_ms = spec.duration.kind == DurationModel::Kind::fixed
                                        ? spec.duration.value
                                        : stream.uniform(spec.duration.lo, spec.duration.hi);
                    s.fixations.push_back(f);
                    labels.push_back(part.label);
                }
                result.labels.emplace(std::make_pair(sketch_id, subject_id), std::move(labels));
                sessions.push_back(std::move(s));
            }
        }
    }
    result.dataset = Dataset::from_sessions(geom, std::move(sessions));
    return result;
}

SynthSpec desk_scale_spec(const StimulusGeometry& geometry, int n_categories, int sketches,
                          int subjects, int parts_per_category) {
    geometry.validate();
    if (n_categories < 1 || sketches < 1 || subjects < 1 || parts_per_category < 1)
        throw InvalidArgument("desk_scale_spec: all counts must be >= 1");

    SynthSpec spec;
    spec.geometry = geometry;
    spec.subjects_per_sketch = subjects;
    spec.length = {LengthModel::Kind::uniform_int, 9, 7, 12};
    spec.duration = {DurationModel::Kind::uniform, 250.0, 120.0, 480.0};

    const double w = static_cast<double>(geometry.width_px);
    const double h = static_cast<double>(geometry.height_px);
    // Category hotspot groups sit on a coarse grid so categories stay
    // spatially disjoint; parts cluster tightly around the group center.
    const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_categories))));
    const double sigma = w / 42.0;
    const double spread = w / (4.0 * static_cast<double>(grid));

    for (int c = 0; c < n_categories; ++c) {
        SynthCategory cat;
        cat.name = "cat" + zero_padded(c + 1, 2);
        cat.sketches = sketches;
        const double cx = w * (0.5 + static_cast<double>(c % grid)) / static_cast<double>(grid);
        const double cy = h * (0.5 + static_cast<double>(c / grid)) / static_cast<double>(grid);
        for (int p = 0; p < parts_per_category; ++p) {
            SynthPart part;
            part.label = std::string("part_") + static_cast<char>('a' + p);
            const double angle = 2.0 * 3.14159265358979323846 *
                                 (static_cast<double>(p) / static_cast<double>(parts_per_category));
            part.mean_x = cx + spread * std::cos(angle);
            part.mean_y = cy + spread * std::sin(angle);
            part.sigma_x = sigma;
            part.sigma_y = sigma;
            cat.parts.push_back(part);
        }
        // Forward-biased cyclic chain: an importance-ordered visitation path
        // with enough persistence to be learnable from short sequences.
        const std::size_t n = cat.parts.size();
        cat.initial.assign(n, 0.1 / static_cast<double>(n));
        cat.initial[0] += 0.9;
        cat.transition.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) cat.transition[i][j] = 0.15 / static_cast<double>(n);
            cat.transition[i][i] += 0.30;
            cat.transition[i][(i + 1) % n] += 0.55;
        }
        spec.categories.push_back(std::move(cat));
    }
    return spec;
}

SynthSpec synth_spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed synth spec JSON (") + e.what() + ")");
    }
    SynthSpec spec;
    try {
        if (j.contains("geometry")) {
            const auto& g = j["geometry"];
            spec.geometry.width_px = g.value("width_px", 1024);
            spec.geometry.height_px = g.value("height_px", 1024);
            spec.geometry.pixels_per_degree = g.value("pixels_per_degree", 36.0);
        }
        spec.regime = regime_from_string(j.value("regime", "primed"));
        spec.subjects_per_sketch = j.value("subjects_per_sketch", 4);
        if (j.contains("length")) {
            const auto& l = j["length"];
            if (l.contains("fixed")) {
                spec.length.kind = LengthModel::Kind::fixed;
                spec.length.fixed_len = l["fixed"].get<int>();
            } else if (l.contains("uniform_int")) {
                spec.length.kind = LengthModel::Kind::uniform_int;
                spec.length.lo = l["uniform_int"][0].get<int>();
                spec.length.hi = l["uniform_int"][1].get<int>();
            } else {
                throw ParseError("length model must be {'fixed': n} or {'uniform_int': [lo, hi]}");
            }
        }
        if (j.contains("duration_ms")) {
            const auto& d = j["duration_ms"];
            if (d.contains("fixed")) {
                spec.duration.kind = DurationModel::Kind::fixed;
                spec.duration.value = d["fixed"].get<double>();
            } else if (d.contains("uniform")) {
                spec.duration.kind = DurationModel::Kind::uniform;
                spec.duration.lo = d["uniform"][0].get<double>();
                spec.duration.hi = d["uniform"][1].get<double>();
            } else {
                throw ParseError("duration model must be {'fixed': v} or {'uniform': [lo, hi]}");
            }
        }
        for (const auto& c : j.at("categories")) {
            SynthCategory cat;
            cat.name = c.at("name").get<std::string>();
            cat.sketches = c.value("sketches", 1);
            for (const auto& p : c.at("parts")) {
                SynthPart part;
                part.label = p.at("label").get<std::string>();
                part.mean_x = p.at("mean")[0].get<double>();
                part.mean_y = p.at("mean")[1].get<double>();
                part.sigma_x = p.at("sigma")[0].get<double>();
                part.sigma_y = p.at("sigma")[1].get<double>();
                cat.parts.push_back(std::move(part));
            }
            cat.initial = c.at("initial").get<std::vector<double>>();
            cat.transition = c.at("transition").get<std::vector<std::vector<double>>>();
            spec.categories.push_back(std::move(cat));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("synth spec schema violation (") + e.what() + ")");
    }
    validate_spec(spec);
    return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
    ordered_json j;
    j["geometry"] = {{"width_px", spec.geometry.width_px},
                     {"height_px", spec.geometry.height_px},
                     {"pixels_per_degree", spec.geometry.pixels_per_degree}};
    j["regime"] = to_string(spec.regime);
    j["subjects_per_sketch"] = spec.subjects_per_sketch;
    if (spec.length.kind == LengthModel::Kind::fixed)
        j["length"] = {{"fixed", spec.length.fixed_len}};
    else
        j["length"] = {{"uniform_int", {spec.length.lo, spec.length.hi}}};
    if (spec.duration.kind == DurationModel::Kind::fixed)
        j["duration_ms"] = {{"fixed", spec.duration.value}};
    else
        j["duration_ms"] = {{"uniform", {spec.duration.lo, spec.duration.hi}}};
    ordered_json cats = ordered_json::array();
    for (const auto& c : spec.categories) {
        ordered_json cat;
        cat["name"] = c.name;
        cat["sketches"] = c.sketches;
        ordered_json parts = ordered_json::array();
        for (const auto& p : c.parts) {
            ordered_json part;
            part["label"] = p.label;
            part["mean"] = {p.mean_x, p.mean_y};
            part["sigma"] = {p.sigma_x, p.sigma_y};
            parts.push_back(std::move(part));
        }
        cat["parts"] = std::move(parts);
        cat["initial"] = c.initial;
        cat["transition"] = c.transition;
        cats.push_back(std::move(cat));
    }
    j["categories"] = std::move(cats);
    return j.dump(2) + "\n";
}

std::string labels_to_jsonl(const GroundTruthLabels& labels) {
    std::string out;
    for (const auto& [key, seq] : labels) {
        ordered_json j;
        j["sketch_id"] = key.first;
        j["subject_id"] = key.second;
        j["labels"] = seq;
        out += j.dump();
        out += '\n';
    }
    return out;
}

GroundTruthLabels labels_from_jsonl(const std::string& text) {
    GroundTruthLabels out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            auto key = std::make_pair(j.at("sketch_id").get<std::string>(),
                                      j.at("subject_id").get<std::string>());
            out[key] = j.at("labels").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": bad label record (" +
                             e.what() + ")");
        }
    }
    return out;
}

}  // namespace gazekit
