#pragma once

#include <map>
#include <string>
#include <vector>

#include "gazekit/dataset.hpp"
#include "gazekit/fixmap.hpp"

namespace gazekit {

// Duration-weighted mean of one marginalized category map along a scanpath:
//   G_c = sum_f t_f * M_c(x_f, y_f) / sum_f t_f   (nearest-cell lookup)
double prediction_score(const FixationMap& margin_map, const std::vector<Fixation>& fixations,
                        bool use_duration = true);

struct CategoryPrediction {
    std::string predicted;
    bool tie = false;  // more than one category reached the best score
    std::map<std::string, double> scores;
};

// Argmax of prediction_score over categories; exact ties resolve to the
// lexicographically first name and are flagged.
CategoryPrediction predict_category(const std::map<std::string, FixationMap>& margin_maps,
                                    const std::vector<Fixation>& fixations,
                                    bool use_duration = true);

struct LosoOptions {
    double sigma_px = 0.0;  // <= 0 means one degree (pixels_per_degree)
    bool use_duration = true;
    RegimeFilter train_regime = RegimeFilter::both;
    RegimeFilter test_regime = RegimeFilter::both;
    int threads = 1;
};

struct LosoCategoryResult {
    std::string category;
    int n_subjects = 0;
    int n_correct_total = 0;
    int n_sessions_total = 0;
    double accuracy = 0.0;  // mean per-subject accuracy
};

struct LosoReport {
    std::vector<LosoCategoryResult> categories;
    double median_accuracy = 0.0;
    double chance = 0.0;  // uniform guess over the evaluated categories
    int n_ties = 0;
    std::vector<std::string> warnings;
};

// Leave-one-subject-out category prediction. Each fold rebuilds the
// standardized, averaged, marginalized maps from the remaining subjects'
// sessions and scores the held-out subject's sessions.
LosoReport loso_evaluate(const Dataset& data, const LosoOptions& options);

std::string loso_report_to_json(const LosoReport& report);

struct DurationCountCorrelation {
    double r = 0.0;
    int n_categories = 0;
    std::map<std::string, double> mean_duration_ms;
    std::map<std::string, double> mean_count;
};

// Pearson correlation, across categories, between within-category mean
// fixation duration and within-category mean fixation count per session.
DurationCountCorrelation duration_count_correlation(const Dataset& data,
                                                    RegimeFilter regime = RegimeFilter::both);

std::string correlation_to_json(const DurationCountCorrelation& c);

}  // namespace gazekit
