#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gazekit/errors.hpp"
#include "gazekit/partseq.hpp"
#include "gazekit/rng.hpp"

using namespace gazekit;

namespace {

std::vector<Vec2> square(double x0, double y0, double side) {
    return {{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}};
}

// Plain recursive LCS with memoization; the reference the dynamic-programming
// alignment must reproduce.
int lcs_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<int>> memo(a.size() + 1, std::vector<int>(b.size() + 1, -1));
    auto rec = [&](auto&& self, std::size_t i, std::size_t j) -> int {
        if (i == 0 || j == 0) return 0;
        int& m = memo[i][j];
        if (m >= 0) return m;
        if (a[i - 1] == b[j - 1])
            m = self(self, i - 1, j - 1) + 1;
        else
            m = std::max(self(self, i - 1, j), self(self, i, j - 1));
        return m;
    };
    return rec(rec, a.size(), b.size());
}

std::vector<std::string> random_seq(Rng& rng, std::size_t max_len,
                                    const std::vector<std::string>& alphabet) {
    std::vector<std::string> out(1 + rng.next_below(max_len));
    for (auto& s : out) s = alphabet[rng.next_below(alphabet.size())];
    return out;
}

ViewingSession session(std::string sketch, std::string cat, std::string subj,
                       std::vector<Fixation> fx) {
    ViewingSession s;
    s.sketch_id = std::move(sketch);
    s.category = std::move(cat);
    s.subject_id = std::move(subj);
    s.fixations = std::move(fx);
    return s;
}

}  // namespace

TEST_CASE("point-in-polygon with the even-odd rule, boundary inclusive") {
    const auto sq = square(0.0, 0.0, 10.0);
    CHECK(point_in_polygon({5.0, 5.0}, sq));
    CHECK_FALSE(point_in_polygon({15.0, 5.0}, sq));
    CHECK_FALSE(point_in_polygon({-0.001, 5.0}, sq));
    // edges and vertices count as inside
    CHECK(point_in_polygon({10.0, 5.0}, sq));
    CHECK(point_in_polygon({0.0, 0.0}, sq));
    CHECK(point_in_polygon({5.0, 10.0}, sq));

    // concave L shape: the notch is outside
    const std::vector<Vec2> ell{{0, 0}, {10, 0}, {10, 4}, {4, 4}, {4, 10}, {0, 10}};
    CHECK(point_in_polygon({2.0, 8.0}, ell));
    CHECK(point_in_polygon({8.0, 2.0}, ell));
    CHECK_FALSE(point_in_polygon({8.0, 8.0}, ell));

    CHECK_THROWS_AS(point_in_polygon({0.0, 0.0}, {{0, 0}, {1, 1}}), InvalidArgument);
}

TEST_CASE("polygon area by shoelace, orientation independent") {
    CHECK(polygon_area(square(3.0, 4.0, 10.0)) == 100.0);
    CHECK(polygon_area({{0, 0}, {4, 0}, {0, 3}}) == 6.0);
    CHECK(polygon_area({{0, 3}, {4, 0}, {0, 0}}) == 6.0);  // reversed winding
    CHECK_THROWS_AS(polygon_area({{0, 0}, {1, 1}}), InvalidArgument);
}

TEST_CASE("point-segment distance clamps to the endpoints") {
    CHECK(point_segment_distance({5.0, 3.0}, {0.0, 0.0}, {10.0, 0.0}) == 3.0);
    CHECK(point_segment_distance({-4.0, 3.0}, {0.0, 0.0}, {10.0, 0.0}) == 5.0);
    CHECK(point_segment_distance({13.0, 4.0}, {0.0, 0.0}, {10.0, 0.0}) == 5.0);
    // degenerate segment is a point
    CHECK(point_segment_distance({3.0, 4.0}, {0.0, 0.0}, {0.0, 0.0}) == 5.0);
}

TEST_CASE("fixations inside a single part take its label") {
    PartAnnotation ann;
    ann.sketch_id = "sk";
    ann.parts.push_back({"wing", square(0.0, 0.0, 20.0)});
    ann.parts.push_back({"tail", square(40.0, 40.0, 20.0)});
    const auto labels =
        assign_parts({{10.0, 10.0, 100.0}, {50.0, 50.0, 100.0}}, ann, 5.0);
    REQUIRE(labels.size() == 2);
    CHECK(labels[0] == "wing");
    CHECK(labels[1] == "tail");
}

TEST_CASE("nested parts resolve to the smallest containing polygon") {
    PartAnnotation ann;
    ann.sketch_id = "sk";
    ann.parts.push_back({"body", square(0.0, 0.0, 100.0)});   // area 10000
    ann.parts.push_back({"eye", square(40.0, 40.0, 10.0)});   // area 100
    const auto labels = assign_parts({{45.0, 45.0, 100.0}, {5.0, 5.0, 100.0}}, ann, 5.0);
    CHECK(labels[0] == "eye");
    CHECK(labels[1] == "body");
}

TEST_CASE("equal-area overlap breaks ties lexicographically") {
    PartAnnotation ann;
    ann.sketch_id = "sk";
    ann.parts.push_back({"zeta", square(0.0, 0.0, 10.0)});
    ann.parts.push_back({"alpha", square(5.0, 0.0, 10.0)});  // same area, overlapping
    const auto labels = assign_parts({{7.0, 5.0, 100.0}}, ann, 5.0);
    CHECK(labels[0] == "alpha");
}

TEST_CASE("outside fixations snap to the nearest boundary within range") {
    PartAnnotation ann;
    ann.sketch_id = "sk";
    ann.parts.push_back({"left", square(0.0, 0.0, 10.0)});
    ann.parts.push_back({"right", square(30.0, 0.0, 10.0)});
    // 12 -> 2 px from "left", 18 px from "right"
    CHECK(assign_parts({{12.0, 5.0, 100.0}}, ann, 36.0)[0] == "left");
    // 27 -> closer to "right"
    CHECK(assign_parts({{27.0, 5.0, 100.0}}, ann, 36.0)[0] == "right");
    // midpoint 20 -> equidistant; snapping is stable but bounded by range
    CHECK(assign_parts({{20.0, 5.0, 100.0}}, ann, 36.0)[0] != kUnassigned);
    // beyond the snap range
    CHECK(assign_parts({{12.0, 5.0, 100.0}}, ann, 1.0)[0] == kUnassigned);
    CHECK(assign_parts({{500.0, 500.0, 100.0}}, ann, 36.0)[0] == kUnassigned);
}

TEST_CASE("boundary fixations are containment, not snapping") {
    PartAnnotation ann;
    ann.sketch_id = "sk";
    ann.parts.push_back({"rim", square(0.0, 0.0, 10.0)});
    // even with snap range zero, a point exactly on the edge belongs to the part
    CHECK(assign_parts({{10.0, 4.0, 100.0}}, ann, 0.0)[0] == "rim");
}

TEST_CASE("assignment ignores the order annotation pieces are listed in") {
    PartAnnotation fwd;
    fwd.sketch_id = "sk";
    fwd.parts.push_back({"body", square(0.0, 0.0, 100.0)});
    fwd.parts.push_back({"eye", square(40.0, 40.0, 10.0)});
    fwd.parts.push_back({"fin", square(200.0, 200.0, 30.0)});
    PartAnnotation rev = fwd;
    std::reverse(rev.parts.begin(), rev.parts.end());

    Rng rng(17);
    std::vector<Fixation> fx;
    for (int i = 0; i < 50; ++i)
        fx.push_back({rng.uniform(0.0, 250.0), rng.uniform(0.0, 250.0), 100.0});
    CHECK(assign_parts(fx, fwd, 20.0) == assign_parts(fx, rev, 20.0));
}

TEST_CASE("one label may own several polygon pieces") {
    PartAnnotation ann;
    ann.sketch_id = "sk";
    ann.parts.push_back({"wheel", square(0.0, 0.0, 10.0)});
    ann.parts.push_back({"wheel", square(50.0, 0.0, 10.0)});
    const auto labels = assign_parts({{5.0, 5.0, 1.0}, {55.0, 5.0, 1.0}}, ann, 5.0);
    CHECK(labels == std::vector<std::string>{"wheel", "wheel"});
}

TEST_CASE("assignment argument validation") {
    PartAnnotation empty;
    empty.sketch_id = "sk";
    CHECK_THROWS_AS(assign_parts({{1.0, 1.0, 1.0}}, empty, 5.0), InvalidArgument);
    PartAnnotation ann;
    ann.sketch_id = "sk";
    ann.parts.push_back({"p", square(0.0, 0.0, 10.0)});
    CHECK_THROWS_AS(assign_parts({{1.0, 1.0, 1.0}}, ann, -1.0), InvalidArgument);
}

TEST_CASE("alignment similarity basics") {
    using V = std::vector<std::string>;
    CHECK(nw_similarity(V{"a", "b", "c"}, V{"a", "b", "c"}) == 1.0);
    CHECK(nw_similarity(V{"a", "a"}, V{"b", "b", "b"}) == 0.0);
    CHECK(nw_similarity(V{"A", "B", "C", "B"}, V{"B", "C"}) == 0.5);
    CHECK(nw_similarity(V{"x"}, V{"x"}) == 1.0);
    CHECK_THROWS_AS(nw_similarity(V{}, V{"a"}), InvalidArgument);
    CHECK_THROWS_AS(nw_similarity(V{"a"}, V{}), InvalidArgument);
}

TEST_CASE("alignment equals the exhaustive subsequence oracle") {
    Rng rng(808);
    const std::vector<std::string> alphabet{"A", "B", "C"};
    for (int trial = 0; trial < 400; ++trial) {
        const auto a = random_seq(rng, 6, alphabet);
        const auto b = random_seq(rng, 6, alphabet);
        const double want =
            static_cast<double>(lcs_oracle(a, b)) / static_cast<double>(std::max(a.size(), b.size()));
        CHECK(nw_similarity(a, b) == want);
        CHECK(nw_similarity(b, a) == nw_similarity(a, b));
    }
}

TEST_CASE("padding the longer sequence with a foreign symbol dilutes the score") {
    using V = std::vector<std::string>;
    const V a{"A", "B", "A"};
    V b{"A", "B", "A", "C"};
    const double before = nw_similarity(a, b);
    b.push_back("C");
    CHECK(nw_similarity(a, b) < before);
}

TEST_CASE("z-score against random sequences flags real structure") {
    Rng rng(99);
    const std::vector<std::string> alphabet{"p1", "p2", "p3", "p4"};
    std::vector<std::string> path;
    for (int i = 0; i < 20; ++i) path.push_back(alphabet[i % 4]);

    const SimilarityZScore z = similarity_zscore(path, path, alphabet, 60, rng);
    CHECK(z.similarity == 1.0);
    CHECK(z.z > 2.0);
    CHECK(z.random_std > 0.0);
    CHECK(z.z == doctest::Approx((z.similarity - z.random_mean) / z.random_std));

    // deterministic given the generator seed
    Rng r1(5), r2(5);
    const auto za = similarity_zscore(path, path, alphabet, 10, r1);
    const auto zb = similarity_zscore(path, path, alphabet, 10, r2);
    CHECK(za.z == zb.z);
    CHECK(za.random_mean == zb.random_mean);
}

TEST_CASE("degenerate nulls are rejected") {
    Rng rng(1);
    const std::vector<std::string> one{"only"};
    // every random sequence over a one-symbol alphabet is identical
    CHECK_THROWS_AS(similarity_zscore(one, one, one, 10, rng), ValidationError);
    CHECK_THROWS_AS(similarity_zscore(one, one, {}, 10, rng), InvalidArgument);
    CHECK_THROWS_AS(similarity_zscore(one, one, {"a", "b"}, 1, rng), InvalidArgument);
}

TEST_CASE("report scores all within-category pairs and takes medians") {
    StimulusGeometry g;
    g.width_px = 200;
    g.height_px = 200;
    g.pixels_per_degree = 10.0;

    AnnotationMap anns;
    PartAnnotation ann;
    ann.sketch_id = "sk0";
    ann.parts.push_back({"head", square(0.0, 0.0, 40.0)});
    ann.parts.push_back({"body", square(60.0, 0.0, 40.0)});
    ann.parts.push_back({"legs", square(120.0, 0.0, 40.0)});
    anns["sk0"] = ann;

    // three subjects walking the same head -> body -> legs path
    std::vector<Fixation> walk{{20.0, 20.0, 100.0}, {80.0, 20.0, 100.0}, {140.0, 20.0, 100.0}};
    std::vector<ViewingSession> sessions;
    for (int su = 0; su < 3; ++su)
        sessions.push_back(session("sk0", "robot", "s" + std::to_string(su), walk));
    const Dataset data = Dataset::from_sessions(g, std::move(sessions));

    SimilarityReportOptions opt;
    opt.n_random = 40;
    const Rng rng(31);
    const SimilarityReport rep = similarity_report(data, anns, opt, rng);
    CHECK(rep.pairs.size() == 3);  // 3 choose 2
    CHECK(rep.median_similarity == 1.0);
    CHECK(rep.median_similarity_by_category.at("robot") == 1.0);
    CHECK(rep.median_z_by_category.at("robot") > 0.0);
    CHECK(rep.warnings.empty());

    const std::string json = similarity_report_to_json(rep);
    CHECK(json.find("\"median_similarity\"") != std::string::npos);
    CHECK(json.find("\"pairs\"") != std::string::npos);
}

TEST_CASE("lonely categories and unannotated sketches are skipped with warnings") {
    StimulusGeometry g;
    g.width_px = 100;
    g.height_px = 100;
    g.pixels_per_degree = 10.0;

    AnnotationMap anns;
    PartAnnotation ann;
    ann.sketch_id = "sk0";
    ann.parts.push_back({"a", square(0.0, 0.0, 30.0)});
    ann.parts.push_back({"b", square(50.0, 50.0, 30.0)});
    anns["sk0"] = ann;
    anns["sk2"] = ann;
    anns["sk2"].sketch_id = "sk2";

    std::vector<ViewingSession> sessions{
        session("sk0", "cat1", "s0", {{10.0, 10.0, 100.0}, {60.0, 60.0, 100.0}}),
        session("sk0", "cat1", "s1", {{12.0, 12.0, 100.0}, {62.0, 62.0, 100.0}}),
        // cat2 exists but only one scoreable sequence
        session("sk2", "cat2", "s2", {{10.0, 10.0, 100.0}}),
        // unannotated sketch
        session("mystery", "cat1", "s0", {{10.0, 10.0, 100.0}}),
    };
    const Dataset data = Dataset::from_sessions(g, std::move(sessions));

    SimilarityReportOptions opt;
    opt.n_random = 30;
    const Rng rng(8);
    const SimilarityReport rep = similarity_report(data, anns, opt, rng);
    CHECK(rep.pairs.size() == 1);
    REQUIRE(rep.warnings.size() == 2);
    bool lonely = false, unannotated = false;
    for (const auto& w : rep.warnings) {
        lonely |= w.find("fewer than two") != std::string::npos;
        unannotated |= w.find("mystery") != std::string::npos;
    }
    CHECK(lonely);
    CHECK(unannotated);
}

TEST_CASE("dropping unassigned labels can empty a sequence") {
    StimulusGeometry g;
    g.width_px = 400;
    g.height_px = 400;
    g.pixels_per_degree = 4.0;

    AnnotationMap anns;
    PartAnnotation ann;
    ann.sketch_id = "sk0";
    ann.parts.push_back({"a", square(0.0, 0.0, 30.0)});
    ann.parts.push_back({"b", square(50.0, 50.0, 30.0)});
    anns["sk0"] = ann;

    std::vector<ViewingSession> sessions{
        session("sk0", "c", "s0", {{10.0, 10.0, 100.0}, {60.0, 60.0, 100.0}}),
        session("sk0", "c", "s1", {{12.0, 12.0, 100.0}, {62.0, 62.0, 100.0}}),
        // every fixation far from any part
        session("sk0", "c", "s2", {{390.0, 390.0, 100.0}, {380.0, 390.0, 100.0}}),
    };
    const Dataset data = Dataset::from_sessions(g, std::move(sessions));

    SimilarityReportOptions keep;
    keep.n_random = 30;
    const Rng rng(12);
    const SimilarityReport with_unassigned = similarity_report(data, anns, keep, rng);
    CHECK(with_unassigned.pairs.size() == 3);

    SimilarityReportOptions drop = keep;
    drop.drop_unassigned = true;
    const SimilarityReport without = similarity_report(data, anns, drop, rng);
    CHECK(without.pairs.size() == 1);  // s2 dropped entirely
    bool emptied = false;
    for (const auto& w : without.warnings)
        emptied |= w.find("empty sequence") != std::string::npos;
    CHECK(emptied);
}

TEST_CASE("threaded report equals the serial one") {
    StimulusGeometry g;
    g.width_px = 100;
    g.height_px = 100;
    g.pixels_per_degree = 10.0;

    AnnotationMap anns;
    PartAnnotation ann;
    ann.sketch_id = "sk0";
    ann.parts.push_back({"a", square(0.0, 0.0, 30.0)});
    ann.parts.push_back({"b", square(50.0, 0.0, 30.0)});
    ann.parts.push_back({"c", square(0.0, 50.0, 30.0)});
    anns["sk0"] = ann;
    anns["sk1"] = ann;
    anns["sk1"].sketch_id = "sk1";

    Rng mk(71);
    std::vector<ViewingSession> sessions;
    for (int sk = 0; sk < 2; ++sk)
        for (int su = 0; su < 4; ++su) {
            std::vector<Fixation> fx;
            for (int i = 0; i < 6; ++i)
                fx.push_back({mk.uniform(0.0, 99.0), mk.uniform(0.0, 99.0), 100.0});
            sessions.push_back(
                session("sk" + std::to_string(sk), "c", "s" + std::to_string(su), std::move(fx)));
        }
    const Dataset data = Dataset::from_sessions(g, std::move(sessions));

    SimilarityReportOptions serial;
    serial.n_random = 10;
    SimilarityReportOptions threaded = serial;
    threaded.threads = 4;
    const Rng rng(2);
    const SimilarityReport a = similarity_report(data, anns, serial, rng);
    const SimilarityReport b = similarity_report(data, anns, threaded, rng);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
        CHECK(a.pairs[i].score.similarity == b.pairs[i].score.similarity);
        CHECK(a.pairs[i].score.z == b.pairs[i].score.z);
    }
    CHECK(a.median_z == b.median_z);
}
