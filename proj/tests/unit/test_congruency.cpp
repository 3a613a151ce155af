#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gazekit/congruency.hpp"
#include "gazekit/errors.hpp"
#include "gazekit/rng.hpp"

using namespace gazekit;

namespace {

// Tie-aware Mann-Whitney pair count: full credit when the positive outranks
// the negative, half credit on an exact tie.
double mw_oracle(const std::vector<double>& pos, const std::vector<double>& neg) {
    long twice = 0;
    for (double p : pos)
        for (double n : neg) {
            if (p > n)
                twice += 2;
            else if (p == n)
                twice += 1;
        }
    return static_cast<double>(twice) /
           (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

StimulusGeometry geom(int w, int h, double ppd) {
    StimulusGeometry g;
    g.width_px = w;
    g.height_px = h;
    g.pixels_per_degree = ppd;
    return g;
}

ViewingSession session(std::string sketch, std::string cat, std::string subj,
                       std::vector<Fixation> fx) {
    ViewingSession s;
    s.sketch_id = std::move(sketch);
    s.category = std::move(cat);
    s.subject_id = std::move(subj);
    s.regime = Regime::primed;
    s.fixations = std::move(fx);
    return s;
}

// Two sketches in different screen corners; each subject's scanpath is a
// tight cloud around its sketch's hotspot.
Dataset hotspot_dataset(int n_subjects, int n_fix, double spread, Rng& rng) {
    const auto g = geom(128, 128, 16.0);
    std::vector<ViewingSession> sessions;
    const std::vector<std::pair<double, double>> centers{{32.0, 32.0}, {96.0, 96.0}};
    for (int sk = 0; sk < 2; ++sk) {
        for (int su = 0; su < n_subjects; ++su) {
            std::vector<Fixation> fx;
            for (int i = 0; i < n_fix; ++i) {
                const double x = std::clamp(centers[sk].first + rng.normal() * spread, 0.0, 127.0);
                const double y = std::clamp(centers[sk].second + rng.normal() * spread, 0.0, 127.0);
                fx.push_back({x, y, rng.uniform(100.0, 400.0)});
            }
            sessions.push_back(session("sk" + std::to_string(sk), "cat", "s" + std::to_string(su),
                                       std::move(fx)));
        }
    }
    return Dataset::from_sessions(g, std::move(sessions));
}

Dataset uniform_dataset(int n_sketches, int n_subjects, int n_fix, Rng& rng) {
    const auto g = geom(128, 128, 16.0);
    std::vector<ViewingSession> sessions;
    for (int sk = 0; sk < n_sketches; ++sk)
        for (int su = 0; su < n_subjects; ++su) {
            std::vector<Fixation> fx;
            for (int i = 0; i < n_fix; ++i)
                fx.push_back({rng.uniform(0.0, 127.0), rng.uniform(0.0, 127.0),
                              rng.uniform(100.0, 400.0)});
            sessions.push_back(session("sk" + std::to_string(sk), "cat", "s" + std::to_string(su),
                                       std::move(fx)));
        }
    return Dataset::from_sessions(g, std::move(sessions));
}

}  // namespace

TEST_CASE("worked separability example") {
    CHECK(sauc_from_samples({0.9, 0.5, 0.3}, {0.8, 0.2, 0.1}) ==
          doctest::Approx(7.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("threshold sweep equals the tie-aware pair count on random inputs") {
    Rng rng(99);
    const std::vector<double> levels{0.0, 0.25, 0.5, 0.75, 1.0};
    for (int trial = 0; trial < 300; ++trial) {
        const int np = 1 + static_cast<int>(rng.next_below(6));
        const int nn = 1 + static_cast<int>(rng.next_below(6));
        std::vector<double> pos, neg;
        for (int i = 0; i < np; ++i) pos.push_back(levels[rng.next_below(levels.size())]);
        for (int i = 0; i < nn; ++i) neg.push_back(levels[rng.next_below(levels.size())]);
        CHECK(sauc_from_samples(pos, neg) == mw_oracle(pos, neg));

        // continuous values too (ties now essentially impossible)
        for (auto& v : pos) v = rng.next_double();
        for (auto& v : neg) v = rng.next_double();
        CHECK(sauc_from_samples(pos, neg) == mw_oracle(pos, neg));
    }
}

TEST_CASE("degenerate and extreme score sets") {
    CHECK(sauc_from_samples({0.4, 0.4, 0.4}, {0.4, 0.4}) == 0.5);
    CHECK(sauc_from_samples({1.0, 0.9}, {0.1, 0.2, 0.0}) == 1.0);
    CHECK(sauc_from_samples({0.1, 0.2}, {0.9, 1.0}) == 0.0);
    CHECK_THROWS_AS(sauc_from_samples({}, {0.1}), InvalidArgument);
    CHECK_THROWS_AS(sauc_from_samples({0.1}, {}), InvalidArgument);
    CHECK_THROWS_AS(sauc_from_samples({std::nan("")}, {0.1}), ValidationError);
}

TEST_CASE("invariance under strictly increasing transforms") {
    Rng rng(123);
    std::vector<double> pos, neg;
    for (int i = 0; i < 8; ++i) pos.push_back(rng.next_double());
    for (int i = 0; i < 9; ++i) neg.push_back(rng.next_double());
    const double base = sauc_from_samples(pos, neg);

    auto mapped = [&](auto f) {
        std::vector<double> p = pos, n = neg;
        for (auto& v : p) v = f(v);
        for (auto& v : n) v = f(v);
        return sauc_from_samples(p, n);
    };
    CHECK(mapped([](double v) { return 2.0 * v + 7.0; }) ==
          doctest::Approx(base).epsilon(1e-12));
    CHECK(mapped([](double v) { return v * v * v; }) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("swapping the two sample sets reflects the score") {
    Rng rng(321);
    std::vector<double> pos, neg;
    for (int i = 0; i < 7; ++i) pos.push_back(rng.next_double());
    for (int i = 0; i < 5; ++i) neg.push_back(rng.next_double());
    const double fwd = sauc_from_samples(pos, neg);
    const double rev = sauc_from_samples(neg, pos);
    CHECK(fwd + rev == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("map variant samples the nearest cell") {
    FixationMap m;
    m.width = 4;
    m.height = 3;
    m.values = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1};
    // positive lands on cell (2,1)=0.6 via rounding, negative on (0,0)=0.0
    const double s = sauc(m, {{1.6, 1.4, 10.0}}, {{0.2, 0.3, 10.0}});
    CHECK(s == 1.0);
    const double s2 = sauc(m, {{0.2, 0.3, 10.0}}, {{1.6, 1.4, 10.0}});
    CHECK(s2 == 0.0);
}

TEST_CASE("consistent hotspots score near one, far above their random baseline") {
    Rng data_rng(2024);
    const Dataset data = hotspot_dataset(4, 30, 3.0, data_rng);
    IocOptions opt;
    opt.sigma_px = 16.0;
    opt.n_random = 20;
    const Rng rng(55);
    const IocSketchResult r = ioc_sketch(data, "sk0", opt, rng);
    CHECK(r.n_subjects == 4);
    CHECK(r.category == "cat");
    CHECK(r.ioc > 0.9);
    CHECK(r.random_baseline < r.ioc - 0.2);
}

TEST_CASE("uniform gaze has no inter-observer structure") {
    Rng data_rng(77);
    const Dataset data = uniform_dataset(3, 3, 80, data_rng);
    IocOptions opt;
    opt.sigma_px = 16.0;
    opt.n_random = 10;
    const Rng rng(56);
    const IocSketchResult r = ioc_sketch(data, "sk1", opt, rng);
    CHECK(std::abs(r.ioc - 0.5) < 0.1);
    CHECK(std::abs(r.random_baseline - 0.5) < 0.1);
}

TEST_CASE("per-sketch scoring does not depend on session order") {
    Rng data_rng(31);
    const auto g = geom(128, 128, 16.0);
    Rng mk(5);
    std::vector<ViewingSession> sessions;
    for (int sk = 0; sk < 2; ++sk)
        for (int su = 0; su < 3; ++su) {
            std::vector<Fixation> fx;
            for (int i = 0; i < 12; ++i)
                fx.push_back({mk.uniform(0.0, 127.0), mk.uniform(0.0, 127.0), 100.0});
            sessions.push_back(session("sk" + std::to_string(sk), "cat",
                                       "s" + std::to_string(su), std::move(fx)));
        }
    auto reversed = sessions;
    std::reverse(reversed.begin(), reversed.end());

    IocOptions opt;
    opt.sigma_px = 16.0;
    opt.n_random = 5;
    const Rng rng(9);
    const auto a = ioc_sketch(Dataset::from_sessions(g, sessions), "sk0", opt, rng);
    const auto b = ioc_sketch(Dataset::from_sessions(g, reversed), "sk0", opt, rng);
    CHECK(a.ioc == doctest::Approx(b.ioc).epsilon(1e-9));
    CHECK(a.random_baseline == doctest::Approx(b.random_baseline).epsilon(1e-9));
}

TEST_CASE("sketch-level input validation") {
    Rng data_rng(41);
    const Dataset data = uniform_dataset(2, 3, 10, data_rng);
    IocOptions opt;
    const Rng rng(1);
    CHECK_THROWS_AS(ioc_sketch(data, "nope", opt, rng), InvalidArgument);

    // a sketch with one lone subject cannot be scored
    const auto g = geom(64, 64, 8.0);
    std::vector<ViewingSession> sessions{
        session("a", "c", "s0", {{10.0, 10.0, 100.0}}),
        session("b", "c", "s0", {{20.0, 20.0, 100.0}}),
        session("b", "c", "s1", {{30.0, 30.0, 100.0}}),
    };
    const Dataset lonely = Dataset::from_sessions(g, std::move(sessions));
    CHECK_THROWS_AS(ioc_sketch(lonely, "a", opt, rng), ValidationError);

    IocOptions bad;
    bad.n_random = 0;
    CHECK_THROWS_AS(ioc_sketch(data, "sk0", bad, rng), InvalidArgument);
}

TEST_CASE("report aggregates per-category and overall medians") {
    Rng data_rng(2025);
    const Dataset data = hotspot_dataset(3, 20, 3.0, data_rng);
    IocOptions opt;
    opt.sigma_px = 16.0;
    opt.n_random = 5;
    const Rng rng(7);
    const IocReport rep = ioc_report(data, opt, rng);
    REQUIRE(rep.sketches.size() == 2);
    REQUIRE(rep.median_ioc_by_category.count("cat") == 1);

    std::vector<double> iocs{rep.sketches[0].ioc, rep.sketches[1].ioc};
    CHECK(rep.median_ioc_by_category.at("cat") ==
          doctest::Approx((iocs[0] + iocs[1]) / 2.0).epsilon(1e-12));
    CHECK(rep.median_ioc == doctest::Approx((iocs[0] + iocs[1]) / 2.0).epsilon(1e-12));

    // every sketch result matches a direct per-sketch call
    for (const auto& r : rep.sketches) {
        const auto direct = ioc_sketch(data, r.sketch_id, opt, rng);
        CHECK(r.ioc == direct.ioc);
        CHECK(r.random_baseline == direct.random_baseline);
    }

    const std::string json = ioc_report_to_json(rep);
    CHECK(json.find("\"median_ioc\"") != std::string::npos);
    CHECK(json.find("\"by_category\"") != std::string::npos);
}

TEST_CASE("threaded report equals the serial one") {
    Rng data_rng(404);
    const Dataset data = uniform_dataset(4, 3, 15, data_rng);
    IocOptions serial;
    serial.sigma_px = 16.0;
    serial.n_random = 4;
    IocOptions threaded = serial;
    threaded.threads = 4;
    const Rng rng(11);
    const IocReport a = ioc_report(data, serial, rng);
    const IocReport b = ioc_report(data, threaded, rng);
    REQUIRE(a.sketches.size() == b.sketches.size());
    for (std::size_t i = 0; i < a.sketches.size(); ++i) {
        CHECK(a.sketches[i].sketch_id == b.sketches[i].sketch_id);
        CHECK(a.sketches[i].ioc == b.sketches[i].ioc);
        CHECK(a.sketches[i].random_baseline == b.sketches[i].random_baseline);
    }
    CHECK(a.median_ioc == b.median_ioc);
}
