#pragma once

#include <map>
#include <string>
#include <vector>

#include "gazekit/errors.hpp"
#include "gazekit/geometry.hpp"

namespace gazekit {

enum class Regime { primed, unprimed };
enum class RegimeFilter { primed, unprimed, both };

const char* to_string(Regime r);
Regime regime_from_string(const std::string& s);
const char* to_string(RegimeFilter f);
RegimeFilter regime_filter_from_string(const std::string& s);

inline bool regime_matches(Regime r, RegimeFilter f) {
    return f == RegimeFilter::both ||
           (f == RegimeFilter::primed && r == Regime::primed) ||
           (f == RegimeFilter::unprimed && r == Regime::unprimed);
}

// One stable gaze event. Coordinates are pixels in the stimulus frame;
// consumers that need normalized coordinates divide by the geometry
// themselves, so pixels stay the single source of truth.
struct Fixation {
    double x = 0.0;
    double y = 0.0;
    double duration_ms = 0.0;
};

// One subject's fixation sequence on one sketch.
struct ViewingSession {
    std::string sketch_id;
    std::string category;
    std::string subject_id;
    Regime regime = Regime::primed;
    std::vector<Fixation> fixations;
};

// Immutable, validated collection of sessions plus derived metadata.
class Dataset {
public:
    Dataset() = default;

    // Validates every invariant (bounds, positive durations, non-empty
    // sequences, unique (sketch_id, subject_id)) and computes derived fields.
    static Dataset from_sessions(const StimulusGeometry& geometry,
                                 std::vector<ViewingSession> sessions);

    const StimulusGeometry& geometry() const { return geometry_; }
    const std::vector<ViewingSession>& sessions() const { return sessions_; }
    const std::vector<std::string>& categories() const { return categories_; }
    std::vector<std::string> subject_ids() const;

    // Maximum fixation count over all sessions (0 for an empty dataset).
    int max_sequence_length() const { return max_sequence_length_; }
    bool empty() const { return sessions_.empty(); }

private:
    StimulusGeometry geometry_;
    std::vector<ViewingSession> sessions_;
    std::vector<std::string> categories_;
    int max_sequence_length_ = 0;
};

// Closed polygon pieces delimiting the semantic parts of one sketch. A label
// may own several pieces; the label set is the category's part vocabulary.
struct PartPiece {
    std::string label;
    std::vector<Vec2> polygon;
};

struct PartAnnotation {
    std::string sketch_id;
    std::vector<PartPiece> parts;
};

using AnnotationMap = std::map<std::string, PartAnnotation>;

// JSON Lines ingest: one session object per line,
// {"sketch_id","category","subject_id","regime","fixations":[{"x","y","t"},...]}.
// Parse errors and invariant violations name the offending line.
Dataset load_dataset(const std::string& path, const StimulusGeometry& geometry);
Dataset dataset_from_jsonl(const std::string& text, const StimulusGeometry& geometry);

// Canonical serialization: fixed key order, shortest round-trip float form.
// write(load(f)) re-serializes byte-identically.
std::string dataset_to_jsonl(const Dataset& dataset);
void write_dataset(const Dataset& dataset, const std::string& path);

std::string dataset_summary_json(const Dataset& dataset);

// Annotation document: {"sketches":[{"sketch_id","parts":[{"label","polygon":[[x,y],...]}]}]}
AnnotationMap load_annotations(const std::string& path);
AnnotationMap annotations_from_json(const std::string& text);
std::string annotations_to_json(const AnnotationMap& annotations);
void write_annotations(const AnnotationMap& annotations, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace gazekit
