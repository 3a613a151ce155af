#include "gazekit/partmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "gazekit/errors.hpp"
#include "gazekit/parallel.hpp"
#include "gazekit/partseq.hpp"
#include "gazekit/stats.hpp"
#include "gazekit/version.hpp"
#include <json.hpp>

namespace gazekit {

std::vector<FixationFeature> featurize(const std::vector<Fixation>& fixations, int n_f,
                                       const StimulusGeometry& geometry) {
    geometry.validate();
    if (fixations.empty()) throw InvalidArgument("cannot featurize an empty sequence");
    if (n_f < static_cast<int>(fixations.size()))
        throw ValidationError("sequence length " + std::to_string(fixations.size()) +
                              " exceeds n_f " + std::to_string(n_f));
    std::vector<FixationFeature> out;
    out.reserve(fixations.size());
    for (std::size_t j = 1; j <= fixations.size(); ++j) {
        const Fixation& f = fixations[j - 1];
        FixationFeature feat;
        feat.r = static_cast<double>(n_f - static_cast<int>(j) + 1) / static_cast<double>(n_f);
        feat.x = f.x / geometry.width_px;
        feat.y = f.y / geometry.height_px;
        out.push_back(feat);
    }
    return out;
}

double Kde::density(const FixationFeature& q) const {
    if (points.empty()) return 1.0;  // uniform fallback for unobserved states
    const double h = bandwidth;
    const double inv_2h2 = 1.0 / (2.0 * h * h);
    double acc = 0.0;
    for (const auto& p : points) {
        const double dr = q.r - p[0];
        const double dx = q.x - p[1];
        const double dy = q.y - p[2];
        acc += std::exp(-(dr * dr + dx * dx + dy * dy) * inv_2h2);
    }
    const double norm = std::pow(2.0 * M_PI, -1.5) / (h * h * h);
    return acc * norm / static_cast<double>(points.size());
}

namespace {

// Leave-one-out log-likelihood on a cached distance matrix, stable via
// per-point log-sum-exp anchored at the nearest neighbour.
struct LooObjective {
    std::size_t n = 0;
    std::vector<double> d2;      // n*n squared distances
    std::vector<double> min_d2;  // per point, min over the others

    explicit LooObjective(const std::vector<std::array<double, 3>>& pts) {
        n = pts.size();
        d2.assign(n * n, 0.0);
        min_d2.assign(n, std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dr = pts[i][0] - pts[j][0];
                const double dx = pts[i][1] - pts[j][1];
                const double dy = pts[i][2] - pts[j][2];
                const double d = dr * dr + dx * dx + dy * dy;
                d2[i * n + j] = d;
                d2[j * n + i] = d;
                min_d2[i] = std::min(min_d2[i], d);
                min_d2[j] = std::min(min_d2[j], d);
            }
        }
    }

    bool degenerate() const {
        for (double m : min_d2)
            if (m > 0.0) return false;
        return true;  // every point coincides with another: no LOO signal
    }

    double operator()(double log_h) const {
        const double h = std::exp(log_h);
        const double s = 1.0 / (2.0 * h * h);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                acc += std::exp(s * (min_d2[i] - d2[i * n + j]));
            }
            total += -min_d2[i] * s + std::log(acc);
        }
        total -= static_cast<double>(n) *
                 (std::log(static_cast<double>(n - 1)) + 1.5 * std::log(2.0 * M_PI) + 3.0 * log_h);
        return total;
    }
};

template <typename F>
double golden_section_max(F f, double a, double b, int iterations) {
    constexpr double invphi = 0.6180339887498949;
    constexpr double invphi2 = 1.0 - invphi;
    double span = b - a;
    double c = a + invphi2 * span;
    double d = a + invphi * span;
    double yc = f(c);
    double yd = f(d);
    for (int it = 0; it < iterations; ++it) {
        span *= invphi;
        if (yc > yd) {
            b = d;
            d = c;
            yd = yc;
            c = a + invphi2 * span;
            yc = f(c);
        } else {
            a = c;
            c = d;
            yc = yd;
            d = a + invphi * span;
            yd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

Kde fit_kde(const std::vector<std::array<double, 3>>& points) {
    if (points.empty()) throw InvalidArgument("cannot fit a density to zero points");

    Kde kde;
    kde.points = points;
    if (points.size() == 1) {
        kde.bandwidth = 1e-2;
        kde.fallback = true;
        return kde;
    }

    // Bandwidth selection runs on an evenly strided subsample when the state
    // has more points than the LOO cap; the density keeps all points.
    std::vector<std::array<double, 3>> loo_points;
    const std::vector<std::array<double, 3>>* selector = &points;
    if (points.size() > kLooSubsampleCap) {
        loo_points.reserve(kLooSubsampleCap);
        for (std::size_t i = 0; i < kLooSubsampleCap; ++i)
            loo_points.push_back(points[i * points.size() / kLooSubsampleCap]);
        selector = &loo_points;
    }

    const LooObjective objective(*selector);
    if (objective.degenerate()) {
        kde.bandwidth = 1e-2;
        kde.fallback = true;
        return kde;
    }
    const double log_h = golden_section_max(objective, std::log(1e-3), std::log(1.0), 48);
    kde.bandwidth = std::exp(log_h);
    return kde;
}

int PartHmm::state_index(const std::string& label) const {
    auto it = std::find(states.begin(), states.end(), label);
    return it == states.end() ? -1 : static_cast<int>(it - states.begin());
}

PartHmm train_hmm(const std::vector<TrainingSequence>& sequences,
                  const std::vector<std::string>& vocabulary, const StimulusGeometry& geometry,
                  int n_f, double smoothing) {
    if (sequences.empty()) throw InvalidArgument("empty training set");
    if (vocabulary.empty()) throw InvalidArgument("empty part vocabulary");
    if (smoothing < 0.0) throw InvalidArgument("smoothing must be non-negative");
    if (n_f < 1) throw InvalidArgument("n_f must be positive");
    geometry.validate();

    PartHmm hmm;
    hmm.geometry = geometry;
    hmm.n_f = n_f;
    hmm.states = vocabulary;
    std::sort(hmm.states.begin(), hmm.states.end());
    hmm.states.erase(std::unique(hmm.states.begin(), hmm.states.end()), hmm.states.end());
    const std::size_t S = hmm.states.size();

    std::map<std::string, int> index;
    for (std::size_t s = 0; s < S; ++s) index[hmm.states[s]] = static_cast<int>(s);

    std::vector<double> pi_counts(S, 0.0);
    std::vector<std::vector<double>> trans_counts(S, std::vector<double>(S, 0.0));
    std::vector<std::vector<std::array<double, 3>>> pools(S);

    for (const TrainingSequence& seq : sequences) {
        if (seq.features.empty()) throw ValidationError("empty training sequence");
        if (seq.features.size() != seq.labels.size())
            throw ValidationError("feature/label length mismatch in training sequence");
        int prev = -1;
        for (std::size_t j = 0; j < seq.labels.size(); ++j) {
            auto it = index.find(seq.labels[j]);
            if (it == index.end())
                throw ValidationError("label outside vocabulary: " + seq.labels[j]);
            const int s = it->second;
            if (j == 0)
                pi_counts[static_cast<std::size_t>(s)] += 1.0;
            else
                trans_counts[static_cast<std::size_t>(prev)][static_cast<std::size_t>(s)] += 1.0;
            pools[static_cast<std::size_t>(s)].push_back(
                {seq.features[j].r, seq.features[j].x, seq.features[j].y});
            prev = s;
        }
    }

    const double pi_total = static_cast<double>(sequences.size()) + smoothing * static_cast<double>(S);
    hmm.pi.resize(S);
    for (std::size_t s = 0; s < S; ++s) hmm.pi[s] = (pi_counts[s] + smoothing) / pi_total;

    hmm.transition.assign(S, std::vector<double>(S, 0.0));
    for (std::size_t s = 0; s < S; ++s) {
        double row_total = 0.0;
        for (std::size_t t = 0; t < S; ++t) row_total += trans_counts[s][t];
        const double denom = row_total + smoothing * static_cast<double>(S);
        for (std::size_t t = 0; t < S; ++t) {
            hmm.transition[s][t] =
                denom > 0.0 ? (trans_counts[s][t] + smoothing) / denom : 1.0 / static_cast<double>(S);
        }
    }

    hmm.observation.resize(S);
    for (std::size_t s = 0; s < S; ++s) {
        if (pools[s].empty()) {
            hmm.observation[s].fallback = true;  // uniform density for unobserved states
        } else {
            hmm.observation[s] = fit_kde(pools[s]);
        }
    }
    return hmm;
}

std::vector<std::vector<double>> likelihood_matrix(const PartHmm& hmm,
                                                   const std::vector<FixationFeature>& features) {
    if (features.empty()) throw InvalidArgument("empty feature sequence");
    std::vector<std::vector<double>> L(features.size(), std::vector<double>(hmm.states.size()));
    for (std::size_t t = 0; t < features.size(); ++t)
        for (std::size_t s = 0; s < hmm.states.size(); ++s)
            L[t][s] = std::max(hmm.observation[s].density(features[t]), 1e-300);
    return L;
}

PosteriorTable posteriors_from(const std::vector<double>& pi,
                               const std::vector<std::vector<double>>& transition,
                               const std::vector<std::vector<double>>& likelihoods) {
    const std::size_t S = pi.size();
    const std::size_t T = likelihoods.size();
    if (S == 0) throw InvalidArgument("empty state set");
    if (T == 0) throw InvalidArgument("empty observation sequence");
    if (transition.size() != S) throw InvalidArgument("transition matrix size mismatch");
    for (const auto& row : transition)
        if (row.size() != S) throw InvalidArgument("transition matrix size mismatch");
    for (const auto& row : likelihoods)
        if (row.size() != S) throw InvalidArgument("likelihood row size mismatch");

    // Scaled forward pass.
    std::vector<std::vector<double>> alpha(T, std::vector<double>(S, 0.0));
    std::vector<double> scale(T, 0.0);
    double log_forward = 0.0;
    for (std::size_t s = 0; s < S; ++s) alpha[0][s] = pi[s] * likelihoods[0][s];
    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) {
            for (std::size_t s = 0; s < S; ++s) {
                double acc = 0.0;
                for (std::size_t p = 0; p < S; ++p) acc += alpha[t - 1][p] * transition[p][s];
                alpha[t][s] = acc * likelihoods[t][s];
            }
        }
        double c = 0.0;
        for (std::size_t s = 0; s < S; ++s) c += alpha[t][s];
        if (!(c > 0.0))
            throw ValidationError("zero forward mass at step " + std::to_string(t));
        const double inv_c = 1.0 / c;
        for (std::size_t s = 0; s < S; ++s) alpha[t][s] *= inv_c;
        scale[t] = c;
        log_forward += std::log(c);
    }

    // Backward pass sharing the forward scale factors.
    std::vector<std::vector<double>> beta(T, std::vector<double>(S, 1.0));
    for (std::size_t t = T - 1; t-- > 0;) {
        for (std::size_t s = 0; s < S; ++s) {
            double acc = 0.0;
            for (std::size_t nx = 0; nx < S; ++nx)
                acc += transition[s][nx] * likelihoods[t + 1][nx] * beta[t + 1][nx];
            beta[t][s] = acc / scale[t + 1];
        }
    }

    PosteriorTable table;
    table.log_forward = log_forward;
    table.gamma.assign(T, std::vector<double>(S, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        double row = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            table.gamma[t][s] = alpha[t][s] * beta[t][s];
            row += table.gamma[t][s];
        }
        if (!(row > 0.0))
            throw ValidationError("zero posterior mass at step " + std::to_string(t));
        for (std::size_t s = 0; s < S; ++s) table.gamma[t][s] /= row;
    }

    // Independent backward recursion with its own scaling, as a cross-check.
    std::vector<double> b(S, 1.0);
    double log_backward = 0.0;
    for (std::size_t t = T - 1; t-- > 0;) {
        std::vector<double> nb(S, 0.0);
        double c = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            double acc = 0.0;
            for (std::size_t nx = 0; nx < S; ++nx)
                acc += transition[s][nx] * likelihoods[t + 1][nx] * b[nx];
            nb[s] = acc;
            c = std::max(c, acc);
        }
        if (!(c > 0.0)) throw ValidationError("zero backward mass at step " + std::to_string(t));
        for (std::size_t s = 0; s < S; ++s) nb[s] /= c;
        log_backward += std::log(c);
        b = std::move(nb);
    }
    double closing = 0.0;
    for (std::size_t s = 0; s < S; ++s) closing += pi[s] * likelihoods[0][s] * b[s];
    if (!(closing > 0.0)) throw ValidationError("zero backward mass at step 0");
    table.log_backward = log_backward + std::log(closing);
    return table;
}

PosteriorTable posteriors(const PartHmm& hmm, const std::vector<FixationFeature>& features) {
    return posteriors_from(hmm.pi, hmm.transition, likelihood_matrix(hmm, features));
}

std::vector<int> viterbi_from(const std::vector<double>& pi,
                              const std::vector<std::vector<double>>& transition,
                              const std::vector<std::vector<double>>& likelihoods) {
    const std::size_t S = pi.size();
    const std::size_t T = likelihoods.size();
    if (S == 0) throw InvalidArgument("empty state set");
    if (T == 0) throw InvalidArgument("empty observation sequence");

    std::vector<std::vector<double>> v(T, std::vector<double>(S, 0.0));
    std::vector<std::vector<int>> back(T, std::vector<int>(S, 0));
    for (std::size_t s = 0; s < S; ++s) v[0][s] = std::log(pi[s]) + std::log(likelihoods[0][s]);
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            int best_p = 0;
            for (std::size_t p = 0; p < S; ++p) {
                const double cand = v[t - 1][p] + std::log(transition[p][s]);
                if (cand > best) {  // strict: ties keep the lowest state index
                    best = cand;
                    best_p = static_cast<int>(p);
                }
            }
            v[t][s] = best + std::log(likelihoods[t][s]);
            back[t][s] = best_p;
        }
    }
    std::size_t tail = 0;
    for (std::size_t s = 1; s < S; ++s)
        if (v[T - 1][s] > v[T - 1][tail]) tail = s;

    std::vector<int> path(T);
    path[T - 1] = static_cast<int>(tail);
    for (std::size_t t = T - 1; t > 0; --t)
        path[t - 1] = back[t][static_cast<std::size_t>(path[t])];
    return path;
}

std::vector<std::string> decode_pmap(const PartHmm& hmm, const std::vector<FixationFeature>& features) {
    const PosteriorTable table = posteriors(hmm, features);
    std::vector<std::string> labels;
    labels.reserve(features.size());
    for (const std::vector<double>& row : table.gamma) {
        std::size_t best = 0;
        for (std::size_t s = 1; s < row.size(); ++s)
            if (row[s] > row[best]) best = s;
        labels.push_back(hmm.states[best]);
    }
    return labels;
}

std::vector<std::string> decode_viterbi(const PartHmm& hmm,
                                        const std::vector<FixationFeature>& features) {
    const std::vector<int> path =
        viterbi_from(hmm.pi, hmm.transition, likelihood_matrix(hmm, features));
    std::vector<std::string> labels;
    labels.reserve(path.size());
    for (int s : path) labels.push_back(hmm.states[static_cast<std::size_t>(s)]);
    return labels;
}

namespace {

double euclid(const Vec2& a, const Vec2& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

DtwAlignment dtw_align(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    if (a.empty() || b.empty()) throw InvalidArgument("cannot align an empty sequence");
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<double> D(n * m, 0.0);
    auto at = [&](std::size_t i, std::size_t j) -> double& { return D[i * m + j]; };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double cost = euclid(a[i], b[j]);
            double prev;
            if (i == 0 && j == 0)
                prev = 0.0;
            else if (i == 0)
                prev = at(0, j - 1);
            else if (j == 0)
                prev = at(i - 1, 0);
            else
                prev = std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});
            at(i, j) = cost + prev;
        }
    }

    DtwAlignment result;
    result.distance = at(n - 1, m - 1);
    std::size_t i = n - 1, j = m - 1;
    result.path.emplace_back(static_cast<int>(i), static_cast<int>(j));
    while (i > 0 || j > 0) {
        if (i == 0) {
            --j;
        } else if (j == 0) {
            --i;
        } else {
            const double diag = at(i - 1, j - 1);
            const double up = at(i - 1, j);
            const double left = at(i, j - 1);
            const double best = std::min({diag, up, left});
            if (diag == best) {
                --i;
                --j;
            } else if (up == best) {
                --i;
            } else {
                --j;
            }
        }
        result.path.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
    std::reverse(result.path.begin(), result.path.end());
    return result;
}

std::vector<std::string> decode_dtw(const std::vector<FixationFeature>& test,
                                    const std::vector<TrainingSequence>& training) {
    if (training.empty()) throw InvalidArgument("empty training set");
    if (test.empty()) throw InvalidArgument("empty test sequence");

    auto to_xy = [](const std::vector<FixationFeature>& f) {
        std::vector<Vec2> xy;
        xy.reserve(f.size());
        for (const FixationFeature& p : f) xy.push_back({p.x, p.y});
        return xy;
    };
    const std::vector<Vec2> test_xy = to_xy(test);

    DtwAlignment best;
    std::size_t best_idx = 0;
    bool first = true;
    for (std::size_t k = 0; k < training.size(); ++k) {
        if (training[k].features.empty()) throw ValidationError("empty training sequence");
        DtwAlignment cand = dtw_align(test_xy, to_xy(training[k].features));
        if (first || cand.distance < best.distance) {  // ties keep the first sequence
            best = std::move(cand);
            best_idx = k;
            first = false;
        }
    }

    // Provisional-match refinement: a later match on the warping path replaces
    // an earlier one only when its fixation is strictly closer.
    const TrainingSequence& chosen = training[best_idx];
    const std::vector<Vec2> train_xy = to_xy(chosen.features);
    std::vector<int> match(test.size(), -1);
    for (const auto& [ti, tj] : best.path) {
        const std::size_t i = static_cast<std::size_t>(ti);
        if (match[i] < 0) {
            match[i] = tj;
        } else if (euclid(test_xy[i], train_xy[static_cast<std::size_t>(tj)]) <
                   euclid(test_xy[i], train_xy[static_cast<std::size_t>(match[i])])) {
            match[i] = tj;
        }
    }

    std::vector<std::string> labels;
    labels.reserve(test.size());
    for (int j : match) labels.push_back(chosen.labels[static_cast<std::size_t>(j)]);
    return labels;
}

std::vector<TrainingSequence> augment(const TrainingSequence& sequence,
                                      const StimulusGeometry& geometry, int k, double max_dev_deg,
                                      Rng& rng) {
    if (k < 1) throw InvalidArgument("k must be at least 1");
    if (max_dev_deg < 0.0) throw InvalidArgument("max_dev_deg must be non-negative");
    if (sequence.features.size() != sequence.labels.size())
        throw ValidationError("feature/label length mismatch");
    geometry.validate();

    const double radius = max_dev_deg * geometry.pixels_per_degree;
    std::vector<TrainingSequence> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
        TrainingSequence copy = sequence;
        for (FixationFeature& f : copy.features) {
            const double theta = 2.0 * M_PI * rng.next_double();
            const double rad = radius * std::sqrt(rng.next_double());
            double px = f.x * geometry.width_px + rad * std::cos(theta);
            double py = f.y * geometry.height_px + rad * std::sin(theta);
            px = std::clamp(px, 0.0, static_cast<double>(geometry.width_px - 1));
            py = std::clamp(py, 0.0, static_cast<double>(geometry.height_px - 1));
            f.x = px / geometry.width_px;
            f.y = py / geometry.height_px;
        }
        out.push_back(std::move(copy));
    }
    return out;
}

const char* to_string(Decoder d) {
    switch (d) {
        case Decoder::pmap: return "pmap";
        case Decoder::viterbi: return "viterbi";
        case Decoder::dtw: return "dtw";
        case Decoder::random: return "random";
    }
    return "unknown";
}

Decoder decoder_from_string(const std::string& name) {
    if (name == "pmap") return Decoder::pmap;
    if (name == "viterbi") return Decoder::viterbi;
    if (name == "dtw") return Decoder::dtw;
    if (name == "random") return Decoder::random;
    throw InvalidArgument("unknown decoder: " + name);
}

std::string model_to_json(const PartHmm& hmm) {
    nlohmann::ordered_json j;
    j["states"] = hmm.states;
    j["pi"] = hmm.pi;
    j["A"] = hmm.transition;
    j["kde"] = nlohmann::ordered_json::object();
    for (std::size_t s = 0; s < hmm.states.size(); ++s) {
        const Kde& kde = hmm.observation[s];
        nlohmann::ordered_json entry;
        entry["points"] = nlohmann::ordered_json::array();
        for (const auto& p : kde.points) entry["points"].push_back({p[0], p[1], p[2]});
        entry["bandwidth"] = kde.bandwidth;
        entry["fallback"] = kde.fallback;
        j["kde"][hmm.states[s]] = std::move(entry);
    }
    j["N_F"] = hmm.n_f;
    j["geometry"] = {{"width_px", hmm.geometry.width_px},
                     {"height_px", hmm.geometry.height_px},
                     {"pixels_per_degree", hmm.geometry.pixels_per_degree}};
    j["version"] = GAZEKIT_VERSION;
    return j.dump(2);
}

PartHmm model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
    try {
        PartHmm hmm;
        hmm.states = j.at("states").get<std::vector<std::string>>();
        hmm.pi = j.at("pi").get<std::vector<double>>();
        hmm.transition = j.at("A").get<std::vector<std::vector<double>>>();
        hmm.n_f = j.at("N_F").get<int>();
        const auto& g = j.at("geometry");
        hmm.geometry.width_px = g.at("width_px").get<int>();
        hmm.geometry.height_px = g.at("height_px").get<int>();
        hmm.geometry.pixels_per_degree = g.at("pixels_per_degree").get<double>();
        hmm.geometry.validate();

        const std::size_t S = hmm.states.size();
        if (S == 0 || hmm.pi.size() != S || hmm.transition.size() != S)
            throw ValidationError("model dimensions are inconsistent");
        for (const auto& row : hmm.transition)
            if (row.size() != S) throw ValidationError("model dimensions are inconsistent");
        if (hmm.n_f < 1) throw ValidationError("model n_f must be positive");

        hmm.observation.resize(S);
        const auto& kdes = j.at("kde");
        for (std::size_t s = 0; s < S; ++s) {
            const auto& entry = kdes.at(hmm.states[s]);
            Kde kde;
            for (const auto& p : entry.at("points")) {
                if (p.size() != 3) throw ValidationError("KDE point must have 3 coordinates");
                kde.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
            }
            kde.bandwidth = entry.at("bandwidth").get<double>();
            if (!(kde.bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
            kde.fallback = entry.value("fallback", false);
            hmm.observation[s] = std::move(kde);
        }
        return hmm;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
}

void save_model(const PartHmm& hmm, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << model_to_json(hmm) << "\n";
    if (!out) throw IoError("failed while writing " + path);
}

PartHmm load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

namespace {

struct TrialOutcome {
    std::map<Decoder, double> trial_median;          // median over this trial's test sequences
    std::map<Decoder, std::vector<double>> per_seq;  // pooled for the overall mean
    int n_test = 0;
};

double sequence_accuracy(const std::vector<std::string>& predicted,
                         const std::vector<std::string>& truth) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (predicted[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace

PartEvalReport evaluate_sequences(const std::vector<LabeledSequence>& sequences,
                                  const StimulusGeometry& geometry, int n_f,
                                  const PartEvalOptions& options, const Rng& rng) {
    if (!(options.train_frac > 0.0 && options.train_frac < 1.0))
        throw InvalidArgument("train_frac must be in (0, 1)");
    if (options.trials < 1) throw InvalidArgument("trials must be at least 1");
    if (options.k_augment < 0) throw InvalidArgument("k_augment must be non-negative");
    if (options.decoders.empty()) throw InvalidArgument("no decoders requested");
    geometry.validate();

    PartEvalReport report;
    std::map<std::string, std::vector<const LabeledSequence*>> by_category;
    for (const LabeledSequence& seq : sequences) {
        if (seq.fixations.empty() || seq.fixations.size() != seq.labels.size())
            throw ValidationError("labeled sequence is empty or misaligned");
        by_category[seq.category].push_back(&seq);
    }

    struct CategoryData {
        std::string name;
        std::vector<const LabeledSequence*> seqs;
        std::vector<std::vector<FixationFeature>> features;
        std::vector<std::string> vocabulary;
    };
    std::vector<CategoryData> cats;
    for (auto& [name, seqs] : by_category) {
        if (seqs.size() < 2) {
            report.warnings.push_back("category " + name + " has fewer than two sequences; skipped");
            continue;
        }
        CategoryData cd;
        cd.name = name;
        cd.seqs = seqs;
        std::set<std::string> vocab;
        for (const LabeledSequence* s : seqs) {
            cd.features.push_back(featurize(s->fixations, n_f, geometry));
            vocab.insert(s->labels.begin(), s->labels.end());
        }
        cd.vocabulary.assign(vocab.begin(), vocab.end());
        cats.push_back(std::move(cd));
    }
    if (cats.empty()) throw ValidationError("no category has two or more labeled sequences");

    const int n_tasks = static_cast<int>(cats.size()) * options.trials;
    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(n_tasks));

    parallel_for(n_tasks, options.threads, [&](int task) {
        const CategoryData& cd = cats[static_cast<std::size_t>(task / options.trials)];
        const int trial = task % options.trials;
        TrialOutcome& out = outcomes[static_cast<std::size_t>(task)];
        Rng t = rng.derive("eval:" + cd.name + ":" + std::to_string(trial));

        const int n = static_cast<int>(cd.seqs.size());
        std::vector<int> order(cd.seqs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        t.shuffle(order);
        const int train_n =
            std::clamp(static_cast<int>(std::lround(options.train_frac * n)), 1, n - 1);

        std::vector<TrainingSequence> training;
        training.reserve(static_cast<std::size_t>(train_n) *
                         static_cast<std::size_t>(1 + options.k_augment));
        for (int i = 0; i < train_n; ++i) {
            const std::size_t idx = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
            TrainingSequence seq{cd.features[idx], cd.seqs[idx]->labels};
            training.push_back(seq);
            if (options.k_augment > 0) {
                auto copies = augment(seq, geometry, options.k_augment, options.max_dev_deg, t);
                for (TrainingSequence& c : copies) training.push_back(std::move(c));
            }
        }

        const PartHmm hmm = train_hmm(training, cd.vocabulary, geometry, n_f, options.smoothing);

        std::map<Decoder, std::vector<double>> accs;
        for (int i = train_n; i < n; ++i) {
            const std::size_t idx = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
            const std::vector<FixationFeature>& feats = cd.features[idx];
            const std::vector<std::string>& truth = cd.seqs[idx]->labels;
            for (Decoder d : options.decoders) {
                std::vector<std::string> predicted;
                switch (d) {
                    case Decoder::pmap: predicted = decode_pmap(hmm, feats); break;
                    case Decoder::viterbi: predicted = decode_viterbi(hmm, feats); break;
                    case Decoder::dtw: predicted = decode_dtw(feats, training); break;
                    case Decoder::random: {
                        predicted.reserve(truth.size());
                        for (std::size_t p = 0; p < truth.size(); ++p)
                            predicted.push_back(
                                cd.vocabulary[static_cast<std::size_t>(t.next_below(cd.vocabulary.size()))]);
                        break;
                    }
                }
                accs[d].push_back(sequence_accuracy(predicted, truth));
            }
            ++out.n_test;
        }
        for (auto& [d, vals] : accs) {
            out.trial_median[d] = median(vals);
            out.per_seq[d] = vals;
        }
    });

    std::map<Decoder, std::vector<double>> pooled;
    for (std::size_t c = 0; c < cats.size(); ++c) {
        PartEvalCategory cat;
        cat.category = cats[c].name;
        cat.n_sequences = static_cast<int>(cats[c].seqs.size());
        cat.vocabulary_size = static_cast<int>(cats[c].vocabulary.size());
        cat.chance = 1.0 / static_cast<double>(cats[c].vocabulary.size());
        std::map<Decoder, std::vector<double>> medians;
        for (int trial = 0; trial < options.trials; ++trial) {
            const TrialOutcome& out =
                outcomes[static_cast<std::size_t>(c) * static_cast<std::size_t>(options.trials) +
                         static_cast<std::size_t>(trial)];
            for (const auto& [d, m] : out.trial_median) medians[d].push_back(m);
            for (const auto& [d, vals] : out.per_seq)
                pooled[d].insert(pooled[d].end(), vals.begin(), vals.end());
        }
        for (const auto& [d, vals] : medians) cat.accuracy[d] = mean(vals);
        report.categories.push_back(std::move(cat));
    }
    for (const TrialOutcome& out : outcomes) report.n_test_sequences += out.n_test;
    for (const auto& [d, vals] : pooled) report.overall_mean[d] = mean(vals);
    return report;
}

PartEvalReport evaluate_part_prediction(const Dataset& data, const AnnotationMap& annotations,
                                        const PartEvalOptions& options, const Rng& rng) {
    const StimulusGeometry& geom = data.geometry();
    const double snap = options.max_snap_px > 0.0 ? options.max_snap_px : geom.pixels_per_degree;

    std::vector<std::string> route_warnings;
    std::vector<LabeledSequence> sequences;
    for (const ViewingSession& s : data.sessions()) {
        if (!regime_matches(s.regime, options.regime)) continue;
        auto ann = annotations.find(s.sketch_id);
        if (ann == annotations.end()) {
            route_warnings.push_back("sketch " + s.sketch_id + " has no part annotation; skipped");
            continue;
        }
        std::vector<std::string> labels = assign_parts(s.fixations, ann->second, snap);
        LabeledSequence seq;
        seq.sketch_id = s.sketch_id;
        seq.subject_id = s.subject_id;
        seq.category = s.category;
        if (options.drop_unassigned) {
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == kUnassigned) continue;
                seq.fixations.push_back(s.fixations[i]);
                seq.labels.push_back(labels[i]);
            }
            if (seq.labels.empty()) {
                route_warnings.push_back("session " + s.sketch_id + "/" + s.subject_id +
                                         ": empty sequence after dropping unassigned");
                continue;
            }
        } else {
            seq.fixations = s.fixations;
            seq.labels = std::move(labels);
        }
        sequences.push_back(std::move(seq));
    }

    PartEvalReport report =
        evaluate_sequences(sequences, geom, data.max_sequence_length(), options, rng);
    report.warnings.insert(report.warnings.begin(), route_warnings.begin(), route_warnings.end());
    return report;
}

PartEvalReport evaluate_with_labels(const Dataset& data, const GroundTruthLabels& labels,
                                    const PartEvalOptions& options, const Rng& rng) {
    std::vector<std::string> route_warnings;
    std::vector<LabeledSequence> sequences;
    for (const ViewingSession& s : data.sessions()) {
        if (!regime_matches(s.regime, options.regime)) continue;
        auto it = labels.find({s.sketch_id, s.subject_id});
        if (it == labels.end()) {
            route_warnings.push_back("session " + s.sketch_id + "/" + s.subject_id +
                                     " has no labels; skipped");
            continue;
        }
        if (it->second.size() != s.fixations.size())
            throw ValidationError("label sequence length mismatch for " + s.sketch_id + "/" +
                                  s.subject_id);
        sequences.push_back({s.sketch_id, s.subject_id, s.category, s.fixations, it->second});
    }

    PartEvalReport report =
        evaluate_sequences(sequences, data.geometry(), data.max_sequence_length(), options, rng);
    report.warnings.insert(report.warnings.begin(), route_warnings.begin(), route_warnings.end());
    return report;
}

std::string part_eval_report_to_json(const PartEvalReport& report) {
    nlohmann::ordered_json j;
    j["per_category"] = nlohmann::ordered_json::object();
    for (const PartEvalCategory& cat : report.categories) {
        nlohmann::ordered_json entry;
        entry["n_sequences"] = cat.n_sequences;
        entry["vocabulary_size"] = cat.vocabulary_size;
        entry["chance"] = cat.chance;
        for (const auto& [d, acc] : cat.accuracy) entry[to_string(d)] = acc;
        j["per_category"][cat.category] = std::move(entry);
    }
    j["overall_mean"] = nlohmann::ordered_json::object();
    for (const auto& [d, acc] : report.overall_mean) j["overall_mean"][to_string(d)] = acc;
    j["n_test_sequences"] = report.n_test_sequences;
    j["warnings"] = report.warnings;
    return j.dump(2);
}

}  // namespace gazekit
