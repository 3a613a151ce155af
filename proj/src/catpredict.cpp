#include "gazekit/catpredict.hpp"

#include <algorithm>
#include <set>

#include "gazekit/errors.hpp"
#include "gazekit/parallel.hpp"
#include "gazekit/stats.hpp"
#include <json.hpp>

namespace gazekit {

double prediction_score(const FixationMap& margin_map, const std::vector<Fixation>& fixations,
                        bool use_duration) {
    if (fixations.empty()) throw InvalidArgument("cannot score an empty scanpath");
    double num = 0.0, den = 0.0;
    for (const Fixation& f : fixations) {
        const double w = use_duration ? f.duration_ms : 1.0;
        num += w * margin_map.sample(f.x, f.y);
        den += w;
    }
    if (!(den > 0.0)) throw ValidationError("total fixation weight is zero");
    return num / den;
}

CategoryPrediction predict_category(const std::map<std::string, FixationMap>& margin_maps,
                                    const std::vector<Fixation>& fixations, bool use_duration) {
    if (margin_maps.empty()) throw InvalidArgument("no category maps to score against");
    CategoryPrediction pred;
    bool first = true;
    double best = 0.0;
    for (const auto& [name, map] : margin_maps) {
        const double score = prediction_score(map, fixations, use_duration);
        pred.scores[name] = score;
        if (first || score > best) {
            best = score;
            pred.predicted = name;  // map iterates in name order, so ties keep the first
            pred.tie = false;
            first = false;
        } else if (score == best) {
            pred.tie = true;
        }
    }
    return pred;
}

namespace {

struct Fold {
    // category -> standardized per-sketch maps built from training subjects
    std::map<std::string, std::vector<FixationMap>> per_sketch;
};

double resolve_sigma(double sigma_px, const StimulusGeometry& geometry) {
    return sigma_px > 0.0 ? sigma_px : geometry.pixels_per_degree;
}

}  // namespace

LosoReport loso_evaluate(const Dataset& data, const LosoOptions& options) {
    const StimulusGeometry& geom = data.geometry();
    const double sigma = resolve_sigma(options.sigma_px, geom);

    std::set<std::string> subject_set;
    for (const ViewingSession& s : data.sessions()) {
        if (regime_matches(s.regime, options.train_regime) ||
            regime_matches(s.regime, options.test_regime))
            subject_set.insert(s.subject_id);
    }
    std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
    if (subjects.size() < 2) throw ValidationError("leave-one-subject-out needs at least two subjects");

    std::set<std::string> category_set;
    for (const ViewingSession& s : data.sessions())
        if (regime_matches(s.regime, options.train_regime)) category_set.insert(s.category);
    if (category_set.size() < 2)
        throw ValidationError("category prediction needs at least two categories");

    struct SubjectOutcome {
        std::map<std::string, int> correct;  // per category
        std::map<std::string, int> total;
        int ties = 0;
        std::vector<std::string> warnings;
        bool scored = false;
    };
    std::vector<SubjectOutcome> outcomes(subjects.size());

    parallel_for(static_cast<int>(subjects.size()), options.threads, [&](int si) {
        const std::string& held = subjects[static_cast<std::size_t>(si)];
        SubjectOutcome& out = outcomes[static_cast<std::size_t>(si)];

        // Training maps: per sketch over remaining subjects, then per category.
        std::map<std::string, std::vector<const ViewingSession*>> train_by_sketch;
        std::map<std::string, std::string> sketch_category;
        for (const ViewingSession& s : data.sessions()) {
            if (s.subject_id == held) continue;
            if (!regime_matches(s.regime, options.train_regime)) continue;
            train_by_sketch[s.sketch_id].push_back(&s);
            sketch_category[s.sketch_id] = s.category;
        }

        // Accumulate per-category sums of standardized per-sketch maps so only
        // one per-sketch map is alive at a time.
        std::map<std::string, FixationMap> category_sum;
        std::map<std::string, int> category_n;
        for (const auto& [sketch_id, sessions] : train_by_sketch) {
            std::vector<Fixation> pooled;
            for (const ViewingSession* s : sessions)
                pooled.insert(pooled.end(), s->fixations.begin(), s->fixations.end());
            FixationMap m = standardize(raw_map(pooled, geom, sigma, options.use_duration));
            const std::string& cat = sketch_category[sketch_id];
            auto it = category_sum.find(cat);
            if (it == category_sum.end()) {
                category_sum.emplace(cat, std::move(m));
            } else {
                for (std::size_t i = 0; i < m.values.size(); ++i)
                    it->second.values[i] += m.values[i];
            }
            ++category_n[cat];
        }

        // A category with no training sketches in this fold drops out of the
        // fold's map set and its sessions go unscored for this fold.
        std::map<std::string, FixationMap> category_maps;
        for (const std::string& cat : category_set) {
            auto it = category_sum.find(cat);
            if (it == category_sum.end()) {
                out.warnings.push_back("fold " + held + ": category " + cat +
                                       " has no training sketches; skipped in this fold");
                continue;
            }
            FixationMap mean_map = std::move(it->second);
            const double inv_n = 1.0 / static_cast<double>(category_n[cat]);
            for (double& v : mean_map.values) v *= inv_n;
            mean_map.kind = MapKind::category;
            category_maps.emplace(cat, std::move(mean_map));
        }
        if (category_maps.size() < 2) {
            out.warnings.push_back("fold " + held +
                                   ": fewer than two categories trainable; fold skipped");
            return;
        }
        const auto margins = marginalize(category_maps);

        for (const ViewingSession& s : data.sessions()) {
            if (s.subject_id != held) continue;
            if (!regime_matches(s.regime, options.test_regime)) continue;
            if (!margins.count(s.category)) continue;
            const CategoryPrediction pred = predict_category(margins, s.fixations, options.use_duration);
            if (pred.tie) ++out.ties;
            ++out.total[s.category];
            if (pred.predicted == s.category) ++out.correct[s.category];
        }
        out.scored = true;
    });

    LosoReport report;
    report.chance = 1.0 / static_cast<double>(category_set.size());

    // Per-category accuracy: mean over subjects of that subject's accuracy on
    // the category's sessions.
    std::map<std::string, std::vector<double>> per_subject_acc;
    std::map<std::string, int> correct_total, sessions_total;
    for (const SubjectOutcome& out : outcomes) {
        for (const std::string& w : out.warnings) report.warnings.push_back(w);
        if (!out.scored) continue;
        report.n_ties += out.ties;
        for (const auto& [cat, total] : out.total) {
            if (total == 0) continue;
            const int correct = out.correct.count(cat) ? out.correct.at(cat) : 0;
            per_subject_acc[cat].push_back(static_cast<double>(correct) / total);
            correct_total[cat] += correct;
            sessions_total[cat] += total;
        }
    }
    if (per_subject_acc.empty())
        throw ValidationError("no fold produced category predictions");

    std::vector<double> accuracies;
    for (const auto& [cat, accs] : per_subject_acc) {
        LosoCategoryResult r;
        r.category = cat;
        r.n_subjects = static_cast<int>(accs.size());
        r.n_correct_total = correct_total[cat];
        r.n_sessions_total = sessions_total[cat];
        r.accuracy = mean(accs);
        accuracies.push_back(r.accuracy);
        report.categories.push_back(std::move(r));
    }
    report.median_accuracy = median(accuracies);
    return report;
}

std::string loso_report_to_json(const LosoReport& report) {
    nlohmann::ordered_json j;
    j["median_accuracy"] = report.median_accuracy;
    j["chance"] = report.chance;
    j["n_ties"] = report.n_ties;
    j["categories"] = nlohmann::ordered_json::array();
    for (const LosoCategoryResult& r : report.categories) {
        j["categories"].push_back({{"category", r.category},
                                   {"n_subjects", r.n_subjects},
                                   {"n_correct_total", r.n_correct_total},
                                   {"n_sessions_total", r.n_sessions_total},
                                   {"accuracy", r.accuracy}});
    }
    j["warnings"] = report.warnings;
    return j.dump(2);
}

DurationCountCorrelation duration_count_correlation(const Dataset& data, RegimeFilter regime) {
    // Per-sketch statistics pool every subject's fixations on that sketch:
    // mean duration over the pooled fixations, and the pooled fixation count.
    struct SketchStat {
        std::string category;
        double total_duration = 0.0;
        double count = 0.0;
    };
    std::map<std::string, SketchStat> by_sketch;
    for (const ViewingSession& s : data.sessions()) {
        if (!regime_matches(s.regime, regime)) continue;
        SketchStat& stat = by_sketch[s.sketch_id];
        stat.category = s.category;
        for (const Fixation& f : s.fixations) stat.total_duration += f.duration_ms;
        stat.count += static_cast<double>(s.fixations.size());
    }

    std::map<std::string, std::vector<double>> durations, counts;
    for (const auto& [sketch_id, stat] : by_sketch) {
        durations[stat.category].push_back(stat.total_duration / stat.count);
        counts[stat.category].push_back(stat.count);
    }
    if (durations.size() < 3)
        throw ValidationError("duration-count correlation needs at least three categories");

    DurationCountCorrelation result;
    std::vector<double> xs, ys;
    for (const auto& [cat, vals] : durations) {
        const double mean_dur = mean(vals);
        const double mean_cnt = mean(counts.at(cat));
        result.mean_duration_ms[cat] = mean_dur;
        result.mean_count[cat] = mean_cnt;
        xs.push_back(mean_dur);
        ys.push_back(mean_cnt);
    }
    result.n_categories = static_cast<int>(xs.size());
    result.r = pearson_correlation(xs, ys);
    return result;
}

std::string correlation_to_json(const DurationCountCorrelation& c) {
    nlohmann::ordered_json j;
    j["r"] = c.r;
    j["n_categories"] = c.n_categories;
    j["by_category"] = nlohmann::ordered_json::object();
    for (const auto& [cat, dur] : c.mean_duration_ms) {
        j["by_category"][cat] = {{"mean_duration_ms", dur}, {"mean_count", c.mean_count.at(cat)}};
    }
    return j.dump(2);
}

}  // namespace gazekit
