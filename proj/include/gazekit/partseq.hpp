#pragma once

#include <map>
#include <string>
#include <vector>

#include "gazekit/dataset.hpp"
#include "gazekit/rng.hpp"

namespace gazekit {

inline const std::string kUnassigned = "UNASSIGNED";

// Even-odd rule; points exactly on an edge or vertex count as inside.
bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& polygon);

// Signed shoelace area made absolute.
double polygon_area(const std::vector<Vec2>& polygon);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

// Maps each fixation to a part label:
//   1. inside the polygons of exactly one label -> that label;
//   2. inside several -> the smallest-area containing polygon's label
//      (area ties break lexicographically);
//   3. outside all -> nearest polygon boundary if within max_snap_px,
//      otherwise UNASSIGNED.
std::vector<std::string> assign_parts(const std::vector<Fixation>& fixations,
                                      const PartAnnotation& annotation, double max_snap_px);

// Length-normalized longest-common-subsequence score: global alignment with
// match 1, mismatch 0, gap 0, divided by the longer sequence length. Errors
// on an empty sequence.
double nw_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct SimilarityZScore {
    double similarity = 0.0;
    double z = 0.0;
    double random_mean = 0.0;
    double random_std = 0.0;
};

// z-score of nw_similarity(a, b) against similarities of `a` to n_random
// uniformly random label sequences of b's length drawn from `alphabet`.
// Uses the sample standard deviation; a degenerate null (zero std) errors.
SimilarityZScore similarity_zscore(const std::vector<std::string>& a,
                                   const std::vector<std::string>& b,
                                   const std::vector<std::string>& alphabet, int n_random, Rng& rng);

struct SimilarityPairResult {
    std::string category;
    std::string sketch_a;
    std::string subject_a;
    std::string sketch_b;
    std::string subject_b;
    SimilarityZScore score;
};

struct SimilarityReportOptions {
    double max_snap_px = 0.0;  // <= 0 means one degree (pixels_per_degree)
    int n_random = 100;
    RegimeFilter regime = RegimeFilter::both;
    bool drop_unassigned = false;  // drop UNASSIGNED entries instead of keeping them as a label
    int threads = 1;
};

struct SimilarityReport {
    std::vector<SimilarityPairResult> pairs;
    std::map<std::string, double> median_similarity_by_category;
    std::map<std::string, double> median_z_by_category;
    double median_similarity = 0.0;
    double median_z = 0.0;
    std::vector<std::string> warnings;
};

// Scores every unordered pair of part-label sequences within a category
// (sessions whose sketch has an annotation) and reports per-category medians.
SimilarityReport similarity_report(const Dataset& data, const AnnotationMap& annotations,
                                   const SimilarityReportOptions& options, const Rng& rng);

std::string similarity_report_to_json(const SimilarityReport& report);

}  // namespace gazekit
