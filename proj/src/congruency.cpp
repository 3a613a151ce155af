#include "gazekit/congruency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>

#include "gazekit/errors.hpp"
#include "gazekit/parallel.hpp"
#include "gazekit/stats.hpp"
#include <json.hpp>

namespace gazekit {

double sauc_from_samples(const std::vector<double>& positives, const std::vector<double>& negatives) {
    if (positives.empty() || negatives.empty())
        throw InvalidArgument("sAUC needs at least one positive and one negative sample");
    for (double v : positives)
        if (!std::isfinite(v)) throw ValidationError("non-finite positive sample");
    for (double v : negatives)
        if (!std::isfinite(v)) throw ValidationError("non-finite negative sample");

    // Sweep thresholds over the union of observed values, descending. With
    // integer counts the trapezoid accumulation stays exact:
    //   num += (fp - fp_prev) * (tp + tp_prev),  auc = num / (2*P*N).
    std::vector<double> thresholds;
    thresholds.reserve(positives.size() + negatives.size());
    thresholds.insert(thresholds.end(), positives.begin(), positives.end());
    thresholds.insert(thresholds.end(), negatives.begin(), negatives.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::vector<double> pos_sorted(positives);
    std::vector<double> neg_sorted(negatives);
    std::sort(pos_sorted.begin(), pos_sorted.end(), std::greater<double>());
    std::sort(neg_sorted.begin(), neg_sorted.end(), std::greater<double>());

    const std::uint64_t p_total = pos_sorted.size();
    const std::uint64_t n_total = neg_sorted.size();
    std::uint64_t num = 0;
    std::uint64_t tp_prev = 0, fp_prev = 0;
    std::size_t pi = 0, ni = 0;
    for (double thr : thresholds) {
        while (pi < pos_sorted.size() && pos_sorted[pi] >= thr) ++pi;
        while (ni < neg_sorted.size() && neg_sorted[ni] >= thr) ++ni;
        const std::uint64_t tp = pi;
        const std::uint64_t fp = ni;
        num += (fp - fp_prev) * (tp + tp_prev);
        tp_prev = tp;
        fp_prev = fp;
    }
    num += (n_total - fp_prev) * (p_total + tp_prev);  // close the curve at (1,1)
    return static_cast<double>(num) / (2.0 * static_cast<double>(p_total) * static_cast<double>(n_total));
}

double sauc(const FixationMap& map, const std::vector<Fixation>& positives,
            const std::vector<Fixation>& negatives) {
    std::vector<double> pos, neg;
    pos.reserve(positives.size());
    neg.reserve(negatives.size());
    for (const Fixation& f : positives) pos.push_back(map.sample(f.x, f.y));
    for (const Fixation& f : negatives) neg.push_back(map.sample(f.x, f.y));
    return sauc_from_samples(pos, neg);
}

namespace {

struct SketchSessions {
    std::vector<const ViewingSession*> sessions;
    std::string category;
};

double resolve_sigma(const IocOptions& options, const StimulusGeometry& geometry) {
    return options.sigma_px > 0.0 ? options.sigma_px : geometry.pixels_per_degree;
}

IocSketchResult ioc_sketch_impl(const Dataset& data, const std::string& sketch_id,
                                const std::vector<const ViewingSession*>& here,
                                const std::vector<Fixation>& negatives, const IocOptions& options,
                                const Rng& rng) {
    const StimulusGeometry& geom = data.geometry();
    const double sigma = resolve_sigma(options, geom);

    IocSketchResult result;
    result.sketch_id = sketch_id;
    result.category = here.front()->category;
    result.n_subjects = static_cast<int>(here.size());

    double ioc_sum = 0.0;
    double random_sum = 0.0;
    for (std::size_t held = 0; held < here.size(); ++held) {
        std::vector<Fixation> pooled;
        for (std::size_t j = 0; j < here.size(); ++j) {
            if (j == held) continue;
            pooled.insert(pooled.end(), here[j]->fixations.begin(), here[j]->fixations.end());
        }
        const FixationMap others = standardize(raw_map(pooled, geom, sigma, options.use_duration));
        ioc_sum += sauc(others, here[held]->fixations, negatives);

        Rng sub = rng.derive("ioc:" + sketch_id + ":" + here[held]->subject_id);
        const std::size_t len = here[held]->fixations.size();
        double rand_acc = 0.0;
        for (int r = 0; r < options.n_random; ++r) {
            std::vector<Fixation> random_path(len);
            for (Fixation& f : random_path) {
                f.x = sub.uniform(0.0, geom.width_px - 1.0);
                f.y = sub.uniform(0.0, geom.height_px - 1.0);
                f.duration_ms = 1.0;
            }
            rand_acc += sauc(others, random_path, negatives);
        }
        random_sum += rand_acc / options.n_random;
    }
    result.ioc = ioc_sum / static_cast<double>(here.size());
    result.random_baseline = random_sum / static_cast<double>(here.size());
    return result;
}

std::map<std::string, SketchSessions> group_by_sketch(const Dataset& data, RegimeFilter filter) {
    std::map<std::string, SketchSessions> by_sketch;
    for (const ViewingSession& s : data.sessions()) {
        if (!regime_matches(s.regime, filter)) continue;
        auto& slot = by_sketch[s.sketch_id];
        slot.sessions.push_back(&s);
        slot.category = s.category;
    }
    return by_sketch;
}

}  // namespace

IocSketchResult ioc_sketch(const Dataset& data, const std::string& sketch_id,
                           const IocOptions& options, const Rng& rng) {
    if (options.n_random < 1) throw InvalidArgument("n_random must be at least 1");
    auto by_sketch = group_by_sketch(data, options.regime);
    auto it = by_sketch.find(sketch_id);
    if (it == by_sketch.end()) throw InvalidArgument("unknown sketch id: " + sketch_id);
    if (it->second.sessions.size() < 2)
        throw ValidationError("sketch " + sketch_id + " has fewer than two subjects");

    std::vector<Fixation> negatives;
    for (const auto& [id, slot] : by_sketch) {
        if (id == sketch_id) continue;
        for (const ViewingSession* s : slot.sessions)
            negatives.insert(negatives.end(), s->fixations.begin(), s->fixations.end());
    }
    if (negatives.empty())
        throw ValidationError("no fixations on other sketches to use as negatives");
    return ioc_sketch_impl(data, sketch_id, it->second.sessions, negatives, options, rng);
}

IocReport ioc_report(const Dataset& data, const IocOptions& options, const Rng& rng) {
    if (options.n_random < 1) throw InvalidArgument("n_random must be at least 1");
    auto by_sketch = group_by_sketch(data, options.regime);

    std::vector<std::string> ids;
    for (const auto& [id, slot] : by_sketch)
        if (slot.sessions.size() >= 2) ids.push_back(id);
    if (ids.empty()) throw ValidationError("no sketch has two or more subjects");

    IocReport report;
    report.sketches.resize(ids.size());
    parallel_for(static_cast<int>(ids.size()), options.threads, [&](int i) {
        const std::string& id = ids[static_cast<std::size_t>(i)];
        std::vector<Fixation> negatives;
        for (const auto& [other_id, slot] : by_sketch) {
            if (other_id == id) continue;
            for (const ViewingSession* s : slot.sessions)
                negatives.insert(negatives.end(), s->fixations.begin(), s->fixations.end());
        }
        if (negatives.empty())
            throw ValidationError("no fixations on other sketches to use as negatives");
        report.sketches[static_cast<std::size_t>(i)] =
            ioc_sketch_impl(data, id, by_sketch.at(id).sessions, negatives, options, rng);
    });

    std::map<std::string, std::vector<double>> ioc_by_cat, random_by_cat;
    std::vector<double> all_ioc, all_random;
    for (const IocSketchResult& r : report.sketches) {
        ioc_by_cat[r.category].push_back(r.ioc);
        random_by_cat[r.category].push_back(r.random_baseline);
        all_ioc.push_back(r.ioc);
        all_random.push_back(r.random_baseline);
    }
    for (auto& [cat, vals] : ioc_by_cat) report.median_ioc_by_category[cat] = median(vals);
    for (auto& [cat, vals] : random_by_cat) report.median_random_by_category[cat] = median(vals);
    report.median_ioc = median(all_ioc);
    report.median_random = median(all_random);
    return report;
}

std::string ioc_report_to_json(const IocReport& report) {
    nlohmann::ordered_json j;
    j["median_ioc"] = report.median_ioc;
    j["median_random"] = report.median_random;
    j["by_category"] = nlohmann::ordered_json::object();
    for (const auto& [cat, v] : report.median_ioc_by_category) {
        j["by_category"][cat] = {{"median_ioc", v},
                                 {"median_random", report.median_random_by_category.at(cat)}};
    }
    j["sketches"] = nlohmann::ordered_json::array();
    for (const IocSketchResult& r : report.sketches) {
        j["sketches"].push_back({{"sketch_id", r.sketch_id},
                                 {"category", r.category},
                                 {"n_subjects", r.n_subjects},
                                 {"ioc", r.ioc},
                                 {"random_baseline", r.random_baseline}});
    }
    return j.dump(2);
}

}  // namespace gazekit
