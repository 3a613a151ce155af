#include "gazekit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gazekit {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string line_prefix(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

}  // namespace

const char* to_string(Regime r) { return r == Regime::primed ? "primed" : "unprimed"; }

Regime regime_from_string(const std::string& s) {
    if (s == "primed") return Regime::primed;
    if (s == "unprimed") return Regime::unprimed;
    throw ParseError("unknown regime '" + s + "' (expected 'primed' or 'unprimed')");
}

const char* to_string(RegimeFilter f) {
    switch (f) {
        case RegimeFilter::primed: return "primed";
        case RegimeFilter::unprimed: return "unprimed";
        default: return "both";
    }
}

RegimeFilter regime_filter_from_string(const std::string& s) {
    if (s == "primed") return RegimeFilter::primed;
    if (s == "unprimed") return RegimeFilter::unprimed;
    if (s == "both") return RegimeFilter::both;
    throw ParseError("unknown regime filter '" + s + "' (expected primed|unprimed|both)");
}

Dataset Dataset::from_sessions(const StimulusGeometry& geometry,
                               std::vector<ViewingSession> sessions) {
    geometry.validate();
    std::set<std::pair<std::string, std::string>> keys;
    std::set<std::string> categories;
    int max_len = 0;
    std::size_t out_of_bounds = 0;
    for (const auto& s : sessions) {
        if (s.fixations.empty())
            throw ValidationError("session (" + s.sketch_id + ", " + s.subject_id +
                                  ") has an empty fixation list");
        if (!keys.insert({s.sketch_id, s.subject_id}).second)
            throw ValidationError("duplicate session key (" + s.sketch_id + ", " +
                                  s.subject_id + ")");
        for (const auto& f : s.fixations) {
            if (!std::isfinite(f.x) || !std::isfinite(f.y) || !std::isfinite(f.duration_ms))
                throw ValidationError("non-finite fixation in session (" + s.sketch_id + ", " +
                                      s.subject_id + ")");
            if (f.duration_ms <= 0.0)
                throw ValidationError("non-positive duration in session (" + s.sketch_id +
                                      ", " + s.subject_id + ")");
            if (!geometry.contains(f.x, f.y)) ++out_of_bounds;
        }
        max_len = std::max(max_len, static_cast<int>(s.fixations.size()));
        categories.insert(s.category);
    }
    if (out_of_bounds > 0)
        throw ValidationError(std::to_string(out_of_bounds) +
                              " fixation(s) outside the stimulus region");
    Dataset d;
    d.geometry_ = geometry;
    d.sessions_ = std::move(sessions);
    d.categories_.assign(categories.begin(), categories.end());
    d.max_sequence_length_ = max_len;
    return d;
}

std::vector<std::string> Dataset::subject_ids() const {
    std::set<std::string> ids;
    for (const auto& s : sessions_) ids.insert(s.subject_id);
    return {ids.begin(), ids.end()};
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure: " + path);
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failure: " + path);
}

Dataset dataset_from_jsonl(const std::string& text, const StimulusGeometry& geometry) {
    geometry.validate();
    std::vector<ViewingSession> sessions;
    std::set<std::pair<std::string, std::string>> keys;

    // Out-of-stimulus fixations are rejected, never clamped; the error carries
    // the offending count so calibration artifacts show up loudly.
    std::size_t out_of_bounds = 0;
    std::size_t first_oob_line = 0;

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_prefix(line_no) + "malformed JSON (" + e.what() + ")");
        }
        if (!j.is_object()) throw ParseError(line_prefix(line_no) + "expected a JSON object");

        ViewingSession s;
        try {
            s.sketch_id = j.at("sketch_id").get<std::string>();
            s.category = j.at("category").get<std::string>();
            s.subject_id = j.at("subject_id").get<std::string>();
            s.regime = regime_from_string(j.at("regime").get<std::string>());
            const auto& fx = j.at("fixations");
            if (!fx.is_array()) throw ParseError("'fixations' must be an array");
            for (const auto& e : fx) {
                Fixation f;
                f.x = e.at("x").get<double>();
                f.y = e.at("y").get<double>();
                f.duration_ms = e.at("t").get<double>();
                s.fixations.push_back(f);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_prefix(line_no) + "schema violation (" + e.what() + ")");
        } catch (const ParseError& e) {
            throw ParseError(line_prefix(line_no) + e.what());
        }

        if (s.fixations.empty())
            throw ValidationError(line_prefix(line_no) + "empty fixation list");
        for (const auto& f : s.fixations) {
            if (!std::isfinite(f.x) || !std::isfinite(f.y) || !std::isfinite(f.duration_ms))
                throw ValidationError(line_prefix(line_no) + "non-finite fixation value");
            if (f.duration_ms <= 0.0)
                throw ValidationError(line_prefix(line_no) + "duration_ms must be positive, got " +
                                      std::to_string(f.duration_ms));
            if (!geometry.contains(f.x, f.y)) {
                ++out_of_bounds;
                if (first_oob_line == 0) first_oob_line = line_no;
            }
        }
        if (!keys.insert({s.sketch_id, s.subject_id}).second)
            throw ValidationError(line_prefix(line_no) + "duplicate (sketch_id, subject_id) = (" +
                                  s.sketch_id + ", " + s.subject_id + ")");
        sessions.push_back(std::move(s));
    }
    if (out_of_bounds > 0)
        throw ValidationError(std::to_string(out_of_bounds) +
                              " fixation(s) outside the stimulus region (first at line " +
                              std::to_string(first_oob_line) + ")");
    return Dataset::from_sessions(geometry, std::move(sessions));
}

Dataset load_dataset(const std::string& path, const StimulusGeometry& geometry) {
    return dataset_from_jsonl(read_text_file(path), geometry);
}

std::string dataset_to_jsonl(const Dataset& dataset) {
    std::string out;
    for (const auto& s : dataset.sessions()) {
        ordered_json j;
        j["sketch_id"] = s.sketch_id;
        j["category"] = s.category;
        j["subject_id"] = s.subject_id;
        j["regime"] = to_string(s.regime);
        ordered_json fx = ordered_json::array();
        for (const auto& f : s.fixations) {
            ordered_json e;
            e["x"] = f.x;  // stored as double so formatting is canonical
            e["y"] = f.y;
            e["t"] = f.duration_ms;
            fx.push_back(std::move(e));
        }
        j["fixations"] = std::move(fx);
        out += j.dump();
        out += '\n';
    }
    return out;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
    write_text_file(path, dataset_to_jsonl(dataset));
}

std::string dataset_summary_json(const Dataset& dataset) {
    nlohmann::json j;
    j["sessions"] = dataset.sessions().size();
    j["categories"] = dataset.categories();
    j["max_sequence_length"] = dataset.max_sequence_length();
    j["subjects"] = dataset.subject_ids();
    std::size_t fixations = 0, primed = 0, unprimed = 0;
    std::set<std::string> sketches;
    for (const auto& s : dataset.sessions()) {
        fixations += s.fixations.size();
        sketches.insert(s.sketch_id);
        (s.regime == Regime::primed ? primed : unprimed) += 1;
    }
    j["fixations"] = fixations;
    j["sketches"] = sketches.size();
    j["sessions_primed"] = primed;
    j["sessions_unprimed"] = unprimed;
    j["geometry"] = {{"width_px", dataset.geometry().width_px},
                     {"height_px", dataset.geometry().height_px},
                     {"pixels_per_degree", dataset.geometry().pixels_per_degree}};
    return j.dump(2) + "\n";
}

namespace {

PartAnnotation parse_annotation(const nlohmann::json& entry) {
    PartAnnotation ann;
    ann.sketch_id = entry.at("sketch_id").get<std::string>();
    for (const auto& p : entry.at("parts")) {
        PartPiece piece;
        piece.label = p.at("label").get<std::string>();
        for (const auto& v : p.at("polygon")) {
            if (!v.is_array() || v.size() != 2)
                throw ParseError("polygon vertex must be a [x, y] pair");
            Vec2 pt{v[0].get<double>(), v[1].get<double>()};
            if (!std::isfinite(pt.x) || !std::isfinite(pt.y))
                throw ValidationError("non-finite polygon vertex in sketch " + ann.sketch_id);
            piece.polygon.push_back(pt);
        }
        if (piece.polygon.size() < 3)
            throw ValidationError("degenerate polygon (<3 vertices) for part '" + piece.label +
                                  "' in sketch " + ann.sketch_id);
        ann.parts.push_back(std::move(piece));
    }
    return ann;
}

}  // namespace

AnnotationMap annotations_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed annotation JSON (") + e.what() + ")");
    }
    AnnotationMap out;
    try {
        for (const auto& entry : doc.at("sketches")) {
            PartAnnotation ann = parse_annotation(entry);
            const std::string id = ann.sketch_id;
            if (!out.emplace(id, std::move(ann)).second)
                throw ValidationError("duplicate annotation entry for sketch " + id);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("annotation schema violation (") + e.what() + ")");
    }
    return out;
}

AnnotationMap load_annotations(const std::string& path) {
    return annotations_from_json(read_text_file(path));
}

std::string annotations_to_json(const AnnotationMap& annotations) {
    ordered_json doc;
    ordered_json sketches = ordered_json::array();
    for (const auto& [id, ann] : annotations) {
        ordered_json entry;
        entry["sketch_id"] = id;
        ordered_json parts = ordered_json::array();
        for (const auto& piece : ann.parts) {
            ordered_json p;
            p["label"] = piece.label;
            ordered_json poly = ordered_json::array();
            for (const auto& v : piece.polygon) poly.push_back({v.x, v.y});
            p["polygon"] = std::move(poly);
            parts.push_back(std::move(p));
        }
        entry["parts"] = std::move(parts);
        sketches.push_back(std::move(entry));
    }
    doc["sketches"] = std::move(sketches);
    return doc.dump(2) + "\n";
}

void write_annotations(const AnnotationMap& annotations, const std::string& path) {
    write_text_file(path, annotations_to_json(annotations));
}

}  // namespace gazekit
