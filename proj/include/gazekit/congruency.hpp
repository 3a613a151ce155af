#pragma once

#include <map>
#include <string>
#include <vector>

#include "gazekit/dataset.hpp"
#include "gazekit/fixmap.hpp"
#include "gazekit/rng.hpp"

namespace gazekit {

// Shuffled-AUC between two sampled score sets. Thresholds sweep the union of
// the observed values; ties at a threshold earn half credit, which makes the
// result exactly the tie-aware Mann-Whitney pair count over P*N pairs. A
// constant map (all scores equal) comes out at exactly 0.5.
double sauc_from_samples(const std::vector<double>& positives, const std::vector<double>& negatives);

// Samples the map at positive/negative fixation locations (nearest cell) and
// scores separability of the two sets.
double sauc(const FixationMap& map, const std::vector<Fixation>& positives,
            const std::vector<Fixation>& negatives);

struct IocOptions {
    double sigma_px = 0.0;          // <= 0 means one degree (pixels_per_degree)
    bool use_duration = true;
    int n_random = 100;
    RegimeFilter regime = RegimeFilter::both;
    int threads = 1;
};

struct IocSketchResult {
    std::string sketch_id;
    std::string category;
    int n_subjects = 0;
    double ioc = 0.0;           // mean leave-one-out sAUC over subjects
    double random_baseline = 0.0;  // same protocol with uniform random scanpaths
};

struct IocReport {
    std::vector<IocSketchResult> sketches;
    std::map<std::string, double> median_ioc_by_category;
    std::map<std::string, double> median_random_by_category;
    double median_ioc = 0.0;
    double median_random = 0.0;
};

// Leave-one-subject-out congruency for one sketch. The held-out subject's
// fixations are the positives; every fixation recorded on *other* sketches is
// the negative pool. The baseline replaces each held-out scanpath with
// n_random uniform scanpaths of the same length (averaged).
IocSketchResult ioc_sketch(const Dataset& data, const std::string& sketch_id,
                           const IocOptions& options, const Rng& rng);

IocReport ioc_report(const Dataset& data, const IocOptions& options, const Rng& rng);

std::string ioc_report_to_json(const IocReport& report);

}  // namespace gazekit
