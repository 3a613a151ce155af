#pragma once

// Reference results measured on the full SketchFix-160 eye-tracking corpus.
// These contextualize reports produced on other data; they are not targets
// the synthetic pipelines are expected to reproduce.
namespace gazekit::reference {

inline constexpr int kPrimedCategories = 13;
inline constexpr double kChancePrimed = 1.0 / 13.0;

// Median leave-one-subject-out category prediction accuracy, primed regime.
inline constexpr double kMedianCategoryPredictionWithDuration = 0.372;
inline constexpr double kMedianCategoryPredictionNoDuration = 0.32;

// Median pairwise part-sequence similarity band across categories.
inline constexpr double kMedianPartSimilarityLow = 0.57;
inline constexpr double kMedianPartSimilarityHigh = 0.73;

// Part sequences separate from random ones by at least this many standard
// deviations.
inline constexpr double kPartSimilarityZSeparation = 2.0;

// Median fraction of part labels correctly predicted by the PMAP decoder.
inline constexpr double kMedianPmapAccuracy = 0.61;

// Correlation between mean fixation duration and fixation count per sketch,
// across categories.
inline constexpr double kDurationCountCorrelationPrimed = -0.81;
inline constexpr double kDurationCountCorrelationUnprimed = -0.62;

}  // namespace gazekit::reference
