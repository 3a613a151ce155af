#include "gazekit/partseq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "gazekit/errors.hpp"
#include "gazekit/parallel.hpp"
#include "gazekit/stats.hpp"
#include <json.hpp>

namespace gazekit {

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& polygon) {
    const std::size_t n = polygon.size();
    if (n < 3) throw InvalidArgument("polygon needs at least three vertices");

    // Boundary points count as inside regardless of the crossing parity.
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = polygon[i];
        const Vec2& b = polygon[(i + 1) % n];
        if (point_segment_distance(p, a, b) <= 1e-12) return true;
    }

    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& vi = polygon[i];
        const Vec2& vj = polygon[j];
        const bool crosses = (vi.y > p.y) != (vj.y > p.y);
        if (crosses) {
            const double x_at = vj.x + (p.y - vj.y) / (vi.y - vj.y) * (vi.x - vj.x);
            if (p.x < x_at) inside = !inside;
        }
    }
    return inside;
}

double polygon_area(const std::vector<Vec2>& polygon) {
    const std::size_t n = polygon.size();
    if (n < 3) throw InvalidArgument("polygon needs at least three vertices");
    double twice = 0.0;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++)
        twice += polygon[j].x * polygon[i].y - polygon[i].x * polygon[j].y;
    return std::abs(twice) * 0.5;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const double abx = b.x - a.x;
    const double aby = b.y - a.y;
    const double len2 = abx * abx + aby * aby;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((p.x - a.x) * abx + (p.y - a.y) * aby) / len2, 0.0, 1.0);
    const double dx = p.x - (a.x + t * abx);
    const double dy = p.y - (a.y + t * aby);
    return std::sqrt(dx * dx + dy * dy);
}

std::vector<std::string> assign_parts(const std::vector<Fixation>& fixations,
                                      const PartAnnotation& annotation, double max_snap_px) {
    if (annotation.parts.empty()) throw InvalidArgument("annotation has no parts");
    if (!(max_snap_px >= 0.0)) throw InvalidArgument("max_snap_px must be non-negative");

    std::vector<std::string> labels;
    labels.reserve(fixations.size());
    for (const Fixation& f : fixations) {
        const Vec2 p{f.x, f.y};

        // Containing pieces, smallest area first, then label order.
        const PartPiece* best = nullptr;
        double best_area = 0.0;
        for (const PartPiece& piece : annotation.parts) {
            if (!point_in_polygon(p, piece.polygon)) continue;
            const double area = polygon_area(piece.polygon);
            if (!best || area < best_area || (area == best_area && piece.label < best->label)) {
                best = &piece;
                best_area = area;
            }
        }
        if (best) {
            labels.push_back(best->label);
            continue;
        }

        // Snap to the nearest boundary within range.
        double nearest = std::numeric_limits<double>::infinity();
        const PartPiece* nearest_piece = nullptr;
        for (const PartPiece& piece : annotation.parts) {
            const std::size_t n = piece.polygon.size();
            for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
                const double d = point_segment_distance(p, piece.polygon[j], piece.polygon[i]);
                if (d < nearest || (d == nearest && nearest_piece && piece.label < nearest_piece->label)) {
                    nearest = d;
                    nearest_piece = &piece;
                }
            }
        }
        if (nearest_piece && nearest <= max_snap_px)
            labels.push_back(nearest_piece->label);
        else
            labels.push_back(kUnassigned);
    }
    return labels;
}

double nw_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) throw InvalidArgument("cannot align an empty sequence");

    // Match 1, mismatch 0, gap 0 global alignment == LCS length; two rolling
    // rows keep it O(min * max) time and O(min) space.
    const std::vector<std::string>& shorter = a.size() <= b.size() ? a : b;
    const std::vector<std::string>& longer = a.size() <= b.size() ? b : a;
    std::vector<int> prev(shorter.size() + 1, 0), curr(shorter.size() + 1, 0);
    for (std::size_t i = 1; i <= longer.size(); ++i) {
        for (std::size_t j = 1; j <= shorter.size(); ++j) {
            if (longer[i - 1] == shorter[j - 1])
                curr[j] = prev[j - 1] + 1;
            else
                curr[j] = std::max(prev[j], curr[j - 1]);
        }
        std::swap(prev, curr);
    }
    return static_cast<double>(prev[shorter.size()]) / static_cast<double>(longer.size());
}

SimilarityZScore similarity_zscore(const std::vector<std::string>& a,
                                   const std::vector<std::string>& b,
                                   const std::vector<std::string>& alphabet, int n_random, Rng& rng) {
    if (alphabet.empty()) throw InvalidArgument("alphabet must not be empty");
    if (n_random < 2) throw InvalidArgument("n_random must be at least 2");

    SimilarityZScore out;
    out.similarity = nw_similarity(a, b);

    std::vector<double> null_scores;
    null_scores.reserve(static_cast<std::size_t>(n_random));
    std::vector<std::string> random_seq(b.size());
    for (int r = 0; r < n_random; ++r) {
        for (std::string& s : random_seq)
            s = alphabet[static_cast<std::size_t>(rng.next_below(alphabet.size()))];
        null_scores.push_back(nw_similarity(a, random_seq));
    }
    out.random_mean = mean(null_scores);
    out.random_std = sample_std(null_scores);
    if (out.random_std <= 0.0)
        throw ValidationError("degenerate null distribution (zero standard deviation)");
    out.z = (out.similarity - out.random_mean) / out.random_std;
    return out;
}

namespace {

std::vector<std::string> strip_unassigned(const std::vector<std::string>& labels) {
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (const std::string& l : labels)
        if (l != kUnassigned) out.push_back(l);
    return out;
}

}  // namespace

SimilarityReport similarity_report(const Dataset& data, const AnnotationMap& annotations,
                                   const SimilarityReportOptions& options, const Rng& rng) {
    const StimulusGeometry& geom = data.geometry();
    const double snap = options.max_snap_px > 0.0 ? options.max_snap_px : geom.pixels_per_degree;

    // One part-label sequence per session; pairs form within a category
    // (labels are the category's shared part vocabulary).
    struct LabeledSession {
        const ViewingSession* session = nullptr;
        std::vector<std::string> labels;
    };
    SimilarityReport report;
    std::map<std::string, std::vector<LabeledSession>> by_category;
    std::map<std::string, std::set<std::string>> vocab_by_category;
    for (const ViewingSession& s : data.sessions()) {
        if (!regime_matches(s.regime, options.regime)) continue;
        auto ann = annotations.find(s.sketch_id);
        if (ann == annotations.end()) {
            report.warnings.push_back("sketch " + s.sketch_id + " has no part annotation; skipped");
            continue;
        }
        std::vector<std::string> labels = assign_parts(s.fixations, ann->second, snap);
        if (options.drop_unassigned) labels = strip_unassigned(labels);
        if (labels.empty()) {
            report.warnings.push_back("session " + s.sketch_id + "/" + s.subject_id +
                                      ": empty sequence after dropping unassigned");
            continue;
        }
        by_category[s.category].push_back({&s, std::move(labels)});
        auto& vocab = vocab_by_category[s.category];
        for (const PartPiece& piece : ann->second.parts) vocab.insert(piece.label);
        if (!options.drop_unassigned) vocab.insert(kUnassigned);
    }

    struct PairTask {
        const LabeledSession* a = nullptr;
        const LabeledSession* b = nullptr;
        std::string category;
        const std::vector<std::string>* alphabet = nullptr;
    };
    std::map<std::string, std::vector<std::string>> alphabets;
    for (const auto& [cat, vocab] : vocab_by_category)
        alphabets[cat] = std::vector<std::string>(vocab.begin(), vocab.end());

    std::vector<PairTask> tasks;
    for (const auto& [cat, seqs] : by_category) {
        if (seqs.size() < 2) {
            report.warnings.push_back("category " + cat + " has fewer than two sequences; skipped");
            continue;
        }
        for (std::size_t i = 0; i < seqs.size(); ++i)
            for (std::size_t j = i + 1; j < seqs.size(); ++j)
                tasks.push_back({&seqs[i], &seqs[j], cat, &alphabets.at(cat)});
    }
    if (tasks.empty()) throw ValidationError("no category has two or more annotated sequences");

    struct PairOutcome {
        SimilarityPairResult result;
        std::string warning;
        bool ok = false;
    };
    std::vector<PairOutcome> outcomes(tasks.size());

    parallel_for(static_cast<int>(tasks.size()), options.threads, [&](int ti) {
        const PairTask& task = tasks[static_cast<std::size_t>(ti)];
        PairOutcome& out = outcomes[static_cast<std::size_t>(ti)];
        const ViewingSession* sa = task.a->session;
        const ViewingSession* sb = task.b->session;
        const std::string pair_name = sa->sketch_id + "/" + sa->subject_id + " vs " +
                                      sb->sketch_id + "/" + sb->subject_id;

        Rng sub = rng.derive("zs:" + task.category + ":" + sa->sketch_id + ":" + sa->subject_id +
                             ":" + sb->sketch_id + ":" + sb->subject_id);
        try {
            out.result.score =
                similarity_zscore(task.a->labels, task.b->labels, *task.alphabet, options.n_random, sub);
        } catch (const ValidationError& e) {
            out.warning = "pair " + pair_name + ": " + e.what();
            return;
        }
        out.result.category = task.category;
        out.result.sketch_a = sa->sketch_id;
        out.result.subject_a = sa->subject_id;
        out.result.sketch_b = sb->sketch_id;
        out.result.subject_b = sb->subject_id;
        out.ok = true;
    });

    std::map<std::string, std::vector<double>> sim_by_cat, z_by_cat;
    std::vector<double> all_sim, all_z;
    for (PairOutcome& out : outcomes) {
        if (!out.warning.empty()) report.warnings.push_back(out.warning);
        if (!out.ok) continue;
        sim_by_cat[out.result.category].push_back(out.result.score.similarity);
        z_by_cat[out.result.category].push_back(out.result.score.z);
        all_sim.push_back(out.result.score.similarity);
        all_z.push_back(out.result.score.z);
        report.pairs.push_back(std::move(out.result));
    }
    if (report.pairs.empty()) throw ValidationError("no subject pair produced a similarity score");

    for (auto& [cat, vals] : sim_by_cat) report.median_similarity_by_category[cat] = median(vals);
    for (auto& [cat, vals] : z_by_cat) report.median_z_by_category[cat] = median(vals);
    report.median_similarity = median(all_sim);
    report.median_z = median(all_z);
    return report;
}

std::string similarity_report_to_json(const SimilarityReport& report) {
    nlohmann::ordered_json j;
    j["median_similarity"] = report.median_similarity;
    j["median_z"] = report.median_z;
    j["by_category"] = nlohmann::ordered_json::object();
    for (const auto& [cat, v] : report.median_similarity_by_category) {
        j["by_category"][cat] = {{"median_similarity", v},
                                 {"median_z", report.median_z_by_category.at(cat)}};
    }
    j["pairs"] = nlohmann::ordered_json::array();
    for (const SimilarityPairResult& p : report.pairs) {
        j["pairs"].push_back({{"category", p.category},
                              {"sketch_a", p.sketch_a},
                              {"subject_a", p.subject_a},
                              {"sketch_b", p.sketch_b},
                              {"subject_b", p.subject_b},
                              {"similarity", p.score.similarity},
                              {"z", p.score.z},
                              {"random_mean", p.score.random_mean},
                              {"random_std", p.score.random_std}});
    }
    j["warnings"] = report.warnings;
    return j.dump(2);
}

}  // namespace gazekit
