#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gazekit/dataset.hpp"
#include "gazekit/rng.hpp"
#include "gazekit/synth.hpp"

namespace gazekit {

// (ordinal factor, normalized x, normalized y); r = (n_f - j + 1)/n_f for
// 1-based position j, so the first fixation always has r = 1.
struct FixationFeature {
    double r = 1.0;
    double x = 0.0;
    double y = 0.0;
};

// n_f is the dataset-wide maximum sequence length, shared between training
// and prediction; it must be >= the sequence length.
std::vector<FixationFeature> featurize(const std::vector<Fixation>& fixations, int n_f,
                                       const StimulusGeometry& geometry);

// Gaussian product-kernel density with one scalar bandwidth shared across the
// three feature dimensions. No sample points means the uniform fallback used
// for states never observed in training: density 1 everywhere.
struct Kde {
    std::vector<std::array<double, 3>> points;
    double bandwidth = 1e-2;
    bool fallback = false;

    double density(const FixationFeature& q) const;
};

// Bandwidth maximizes the leave-one-out log-likelihood via golden-section
// search over log h in [log 1e-3, log 1]. A single point or all-identical
// points make the LOO objective degenerate: bandwidth falls back to 1e-2,
// flagged. Above kLooSubsampleCap points the LOO objective is evaluated on an
// evenly strided subsample (the returned density still uses every point).
inline constexpr std::size_t kLooSubsampleCap = 512;
Kde fit_kde(const std::vector<std::array<double, 3>>& points);

struct TrainingSequence {
    std::vector<FixationFeature> features;
    std::vector<std::string> labels;
};

struct PartHmm {
    std::vector<std::string> states;
    std::vector<double> pi;
    std::vector<std::vector<double>> transition;
    std::vector<Kde> observation;  // aligned with states
    StimulusGeometry geometry;
    int n_f = 1;

    int state_index(const std::string& label) const;  // -1 when unknown
};

// Supervised estimation: pi and transition rows from add-one-style smoothed
// counts over the vocabulary (smoothing weight configurable; a zero-count row
// with smoothing 0 becomes uniform), per-state KDE over the features carrying
// that label. Unobserved states get the uniform-fallback density.
PartHmm train_hmm(const std::vector<TrainingSequence>& sequences,
                  const std::vector<std::string>& vocabulary, const StimulusGeometry& geometry,
                  int n_f, double smoothing = 1.0);

std::string model_to_json(const PartHmm& hmm);
PartHmm model_from_json(const std::string& text);
void save_model(const PartHmm& hmm, const std::string& path);
PartHmm load_model(const std::string& path);

// Per-step observation densities, floored at 1e-300.
std::vector<std::vector<double>> likelihood_matrix(const PartHmm& hmm,
                                                   const std::vector<FixationFeature>& features);

struct PosteriorTable {
    std::vector<std::vector<double>> gamma;  // T x S, rows sum to 1
    double log_forward = 0.0;
    double log_backward = 0.0;  // independent recursion; equals log_forward
};

// Scaled linear-domain forward-backward over an explicit likelihood matrix
// (exposed so tests can drive arbitrary instances).
PosteriorTable posteriors_from(const std::vector<double>& pi,
                               const std::vector<std::vector<double>>& transition,
                               const std::vector<std::vector<double>>& likelihoods);
PosteriorTable posteriors(const PartHmm& hmm, const std::vector<FixationFeature>& features);

// Log-domain max-product path; ties keep the lowest state index.
std::vector<int> viterbi_from(const std::vector<double>& pi,
                              const std::vector<std::vector<double>>& transition,
                              const std::vector<std::vector<double>>& likelihoods);

// Per-position argmax of the posterior table; ties keep the lowest state index.
std::vector<std::string> decode_pmap(const PartHmm& hmm, const std::vector<FixationFeature>& features);
std::vector<std::string> decode_viterbi(const PartHmm& hmm,
                                        const std::vector<FixationFeature>& features);

struct DtwAlignment {
    double distance = 0.0;
    std::vector<std::pair<int, int>> path;  // (index in a, index in b), monotone
};

// Classic dynamic time warping with steps {(1,0),(0,1),(1,1)} and Euclidean
// base distance; backtracking prefers diagonal, then advancing `a`, then `b`.
DtwAlignment dtw_align(const std::vector<Vec2>& a, const std::vector<Vec2>& b);

// Nearest training sequence by DTW distance on normalized (x, y) (ties keep
// the first), then per test index: of all its matched training indices, a
// later match replaces an earlier one only when strictly Euclidean-closer;
// the test fixation takes its final match's label.
std::vector<std::string> decode_dtw(const std::vector<FixationFeature>& test,
                                    const std::vector<TrainingSequence>& training);

// k jittered copies: each fixation displaced uniformly in the disk of radius
// max_dev_deg * pixels_per_degree (pixel space), clipped to the stimulus,
// re-normalized. Labels and ordinal factors are untouched.
std::vector<TrainingSequence> augment(const TrainingSequence& sequence,
                                      const StimulusGeometry& geometry, int k, double max_dev_deg,
                                      Rng& rng);

enum class Decoder { pmap, viterbi, dtw, random };
const char* to_string(Decoder d);
Decoder decoder_from_string(const std::string& name);

struct PartEvalOptions {
    double train_frac = 0.6;
    int trials = 10;
    int k_augment = 50;
    double max_dev_deg = 1.0;
    double smoothing = 1.0;
    double max_snap_px = 0.0;  // annotation route; <= 0 means one degree
    bool drop_unassigned = false;
    RegimeFilter regime = RegimeFilter::both;
    std::vector<Decoder> decoders = {Decoder::pmap, Decoder::viterbi, Decoder::dtw,
                                     Decoder::random};
    int threads = 1;
};

struct LabeledSequence {
    std::string sketch_id;
    std::string subject_id;
    std::string category;
    std::vector<Fixation> fixations;
    std::vector<std::string> labels;
};

struct PartEvalCategory {
    std::string category;
    int n_sequences = 0;
    int vocabulary_size = 0;
    double chance = 0.0;
    // mean over trials of the median per-sequence accuracy
    std::map<Decoder, double> accuracy;
};

struct PartEvalReport {
    std::vector<PartEvalCategory> categories;
    std::map<Decoder, double> overall_mean;  // pooled per-sequence accuracies
    int n_test_sequences = 0;                // pooled across categories and trials
    std::vector<std::string> warnings;
};

// Per category and trial: shuffle, split train_frac/rest, augment the
// training split, train, decode every test sequence; per-sequence accuracy
// is the fraction of correctly labeled fixations. Categories with fewer than
// two sequences are skipped with a warning.
PartEvalReport evaluate_sequences(const std::vector<LabeledSequence>& sequences,
                                  const StimulusGeometry& geometry, int n_f,
                                  const PartEvalOptions& options, const Rng& rng);

// Labels derived from polygon annotations (assign_parts).
PartEvalReport evaluate_part_prediction(const Dataset& data, const AnnotationMap& annotations,
                                        const PartEvalOptions& options, const Rng& rng);

// Labels supplied directly, e.g. synthetic ground truth.
PartEvalReport evaluate_with_labels(const Dataset& data, const GroundTruthLabels& labels,
                                    const PartEvalOptions& options, const Rng& rng);

std::string part_eval_report_to_json(const PartEvalReport& report);

}  // namespace gazekit
