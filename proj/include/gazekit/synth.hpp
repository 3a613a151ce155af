#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gazekit/dataset.hpp"
#include "gazekit/rng.hpp"

namespace gazekit {

// One Gaussian fixation cluster; its part polygon is the axis-aligned box at
// +/-2 sigma around the mean, so ground-truth containment stays analytic.
struct SynthPart {
    std::string label;
    double mean_x = 0.0;
    double mean_y = 0.0;
    double sigma_x = 1.0;
    double sigma_y = 1.0;
};

struct SynthCategory {
    std::string name;
    int sketches = 1;
    std::vector<SynthPart> parts;
    std::vector<double> initial;                   // over parts
    std::vector<std::vector<double>> transition;   // rows over parts
};

struct LengthModel {
    enum class Kind { fixed, uniform_int } kind = Kind::fixed;
    int fixed_len = 9;
    int lo = 6;
    int hi = 12;
};

struct DurationModel {
    enum class Kind { fixed, uniform } kind = Kind::uniform;
    double value = 250.0;
    double lo = 120.0;
    double hi = 480.0;
};

struct SynthSpec {
    StimulusGeometry geometry;
    Regime regime = Regime::primed;
    int subjects_per_sketch = 4;
    LengthModel length;
    DurationModel duration;
    std::vector<SynthCategory> categories;
};

// Per-session ground-truth part labels, keyed by (sketch_id, subject_id).
using GroundTruthLabels = std::map<std::pair<std::string, std::string>, std::vector<std::string>>;

struct SynthResult {
    Dataset dataset;
    AnnotationMap annotations;
    GroundTruthLabels labels;
};

// Samples a part path from the category's Markov chain, then a location from
// that part's cluster (clipped to the stimulus). The label of each fixation
// is the part that generated it. Identical (spec, seed) gives byte-identical
// output.
SynthResult synthesize_dataset(const SynthSpec& spec, const Rng& rng);

// Desk-scale stand-in for the primed-regime study: n_categories categories
// with spatially disjoint hotspot groups, `sketches` sketches each, viewed by
// `subjects` subjects. Cluster spread scales with the geometry.
SynthSpec desk_scale_spec(const StimulusGeometry& geometry, int n_categories = 13,
                          int sketches = 24, int subjects = 4, int parts_per_category = 4);

SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);

std::string labels_to_jsonl(const GroundTruthLabels& labels);
GroundTruthLabels labels_from_jsonl(const std::string& text);

}  // namespace gazekit
