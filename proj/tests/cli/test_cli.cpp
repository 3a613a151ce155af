#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch_root() {
    static const fs::path root = [] {
        const fs::path p = fs::temp_directory_path() / "gazekit_cli_tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "cannot read " << path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path out = scratch_root() / ("stdout_" + std::to_string(counter) + ".txt");
    const fs::path err = scratch_root() / ("stderr_" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd = std::string("\"") + GAZEKIT_CLI_PATH + "\" " + args + " > \"" +
                            out.string() + "\" 2> \"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out);
    r.err = read_file(err);
    return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// A small synthetic corpus on disk, generated once through the CLI itself.
struct Corpus {
    fs::path dir;
    fs::path dataset;
    fs::path annotations;
    fs::path labels;
    std::string sketch;
    std::string subject;
    std::string geometry_flags;
};

const Corpus& corpus() {
    static const Corpus c = [] {
        Corpus out;
        out.dir = scratch_root() / "corpus";
        out.geometry_flags = " --width 200 --height 200 --px-per-deg 8 ";
        const RunResult r = run_cli(
            "synth --out " + q(out.dir) +
            " --seed 7 --categories 3 --sketches 2 --subjects 2 --parts 2" +
            out.geometry_flags);
        REQUIRE(r.code == 0);
        out.dataset = out.dir / "dataset.jsonl";
        out.annotations = out.dir / "annotations.json";
        out.labels = out.dir / "labels.jsonl";
        const std::string text = read_file(out.dataset);
        const json first = json::parse(text.substr(0, text.find('\n')));
        out.sketch = first.at("sketch_id").get<std::string>();
        out.subject = first.at("subject_id").get<std::string>();
        return out;
    }();
    return c;
}

int count_lines(const std::string& text) {
    int n = 0;
    for (const char ch : text)
        if (ch == '\n') ++n;
    return n;
}

const std::vector<std::string> kSubcommands = {
    "ingest-check",   "synth",        "fixmap",          "catmap",
    "ioc",            "predict-category", "part-assign", "part-similarity",
    "train-hmm",      "predict-parts", "evaluate-parts", "correlate-duration"};

}  // namespace

TEST_CASE("help output matches the golden snapshots") {
    const fs::path golden(GAZEKIT_GOLDEN_DIR);
    {
        const RunResult r = run_cli("--help");
        CHECK(r.code == 0);
        CHECK(r.out == read_file(golden / "help_app.txt"));
    }
    for (const std::string& sub : kSubcommands) {
        CAPTURE(sub);
        const RunResult r = run_cli(sub + " --help");
        CHECK(r.code == 0);
        CHECK(r.out == read_file(golden / ("help_" + sub + ".txt")));
    }
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli("").code == 2);                        // a subcommand is required
    CHECK(run_cli("frobnicate").code == 2);              // unknown subcommand
    CHECK(run_cli("fixmap").code == 2);                  // missing required options
    CHECK(run_cli("ioc --input x --seed 1 --regime upside-down").code == 2);
    const RunResult r = run_cli("catmap --input x --out y --style watercolor");
    CHECK(r.code == 2);
    CHECK(r.err.find("--style") != std::string::npos);
}

TEST_CASE("synthesis is reproducible and writes a manifest") {
    const Corpus& c = corpus();
    for (const char* name : {"spec.json", "dataset.jsonl", "annotations.json", "labels.jsonl",
                             "manifest.json"})
        CHECK(fs::exists(c.dir / name));

    const json manifest = json::parse(read_file(c.dir / "manifest.json"));
    CHECK(manifest.at("seed").get<std::uint64_t>() == 7);
    CHECK(manifest.at("config").at("categories").get<int>() == 3);
    CHECK(manifest.at("report").at("files").at("dataset").get<std::string>() ==
          "dataset.jsonl");
    CHECK(manifest.contains("version"));

    // same seed, fresh directory: byte-identical artifacts
    const fs::path again = scratch_root() / "corpus_again";
    REQUIRE(run_cli("synth --out " + q(again) +
                    " --seed 7 --categories 3 --sketches 2 --subjects 2 --parts 2" +
                    c.geometry_flags)
                .code == 0);
    for (const char* name : {"dataset.jsonl", "annotations.json", "labels.jsonl"})
        CHECK(read_file(again / name) == read_file(c.dir / name));

    // a different seed changes the data
    const fs::path other = scratch_root() / "corpus_other";
    REQUIRE(run_cli("synth --out " + q(other) +
                    " --seed 8 --categories 3 --sketches 2 --subjects 2 --parts 2" +
                    c.geometry_flags)
                .code == 0);
    CHECK(read_file(other / "dataset.jsonl") != read_file(c.dataset));
}

TEST_CASE("ingest-check validates and summarizes") {
    const Corpus& c = corpus();
    const RunResult r = run_cli("ingest-check --input " + q(c.dataset) + " --annotations " +
                                q(c.annotations) + c.geometry_flags);
    REQUIRE(r.code == 0);
    const json env = json::parse(r.out);
    CHECK(env.at("seed").is_null());
    CHECK(env.at("report").at("sessions").get<int>() == 12);
    CHECK(env.at("report").at("categories").size() == 3);
    CHECK(env.at("report").at("annotations_ok").get<bool>() == true);

    CHECK(run_cli("ingest-check --input /nonexistent.jsonl" + c.geometry_flags).code == 1);

    const fs::path bad = scratch_root() / "bad.jsonl";
    std::ofstream(bad) << "{\"sketch_id\": 12}\n";
    const RunResult rb = run_cli("ingest-check --input " + q(bad) + c.geometry_flags);
    CHECK(rb.code == 1);
    CHECK(rb.err.find("error:") != std::string::npos);
}

TEST_CASE("fixmap renders deterministic images") {
    const Corpus& c = corpus();
    const fs::path img = scratch_root() / "map.pgm";
    const std::string base = "fixmap --input " + q(c.dataset) + " --sketch " + c.sketch +
                             " --sigma 6 --standardize --render " + q(img) + c.geometry_flags;
    const RunResult r = run_cli(base);
    REQUIRE(r.code == 0);
    const json env = json::parse(r.out);
    CHECK(env.at("report").at("kind").get<std::string>() == "standardized");
    CHECK(env.at("report").at("n_sessions").get<int>() == 2);
    CHECK(env.at("config").at("sketch").get<std::string>() == c.sketch);

    const std::string image = read_file(img);
    CHECK(image.substr(0, 2) == "P5");
    CHECK(fs::exists(img.string() + ".meta.json"));

    // rerunning produces the same bytes on disk and on stdout
    const RunResult r2 = run_cli(base);
    REQUIRE(r2.code == 0);
    CHECK(r2.out == r.out);
    CHECK(read_file(img) == image);

    // one-subject map in heat style
    const fs::path heat = scratch_root() / "map.ppm";
    const RunResult rh = run_cli("fixmap --input " + q(c.dataset) + " --sketch " + c.sketch +
                                 " --subject " + c.subject + " --style heat --render " +
                                 q(heat) + c.geometry_flags);
    REQUIRE(rh.code == 0);
    CHECK(read_file(heat).substr(0, 2) == "P6");
    CHECK(json::parse(rh.out).at("report").at("n_sessions").get<int>() == 1);

    // alternative report formats
    const RunResult rc = run_cli(base + " --format csv");
    REQUIRE(rc.code == 0);
    CHECK(rc.out.rfind("key,value\n", 0) == 0);
    CHECK(rc.out.find("report.kind,standardized") != std::string::npos);
    const RunResult rt = run_cli(base + " --format text");
    REQUIRE(rt.code == 0);
    CHECK(rt.out.find("report.kind") != std::string::npos);

    // an unknown sketch id is an argument error
    CHECK(run_cli("fixmap --input " + q(c.dataset) + " --sketch nope --render " + q(img) +
                  c.geometry_flags)
              .code == 2);
}

TEST_CASE("catmap writes one image per category plus a report") {
    const Corpus& c = corpus();
    const fs::path out = scratch_root() / "catmaps";
    const RunResult r = run_cli("catmap --input " + q(c.dataset) + " --out " + q(out) +
                                " --sigma 6" + c.geometry_flags);
    REQUIRE(r.code == 0);
    const json env = json::parse(read_file(out / "catmap_report.json"));
    CHECK(env.at("report").at("kind").get<std::string>() == "marginalized");
    CHECK(env.at("report").at("n_categories").get<int>() == 3);
    for (const auto& [category, entry] : env.at("report").at("categories").items()) {
        CAPTURE(category);
        CHECK(fs::exists(out / entry.at("file").get<std::string>()));
    }
}

TEST_CASE("ioc reports are seed deterministic") {
    const Corpus& c = corpus();
    const std::string base = "ioc --input " + q(c.dataset) + " --sigma 6 --n-random 3" +
                             c.geometry_flags;
    const RunResult a = run_cli(base + " --seed 5");
    REQUIRE(a.code == 0);
    const RunResult b = run_cli(base + " --seed 5");
    const RunResult d = run_cli(base + " --seed 6");
    CHECK(a.out == b.out);
    CHECK(a.out != d.out);
    const json env = json::parse(a.out);
    CHECK(env.at("seed").get<int>() == 5);
    CHECK(env.at("report").at("median_ioc").is_number());
    CHECK(env.at("report").at("by_category").size() == 3);
}

TEST_CASE("predict-category reports leave-one-subject-out accuracy") {
    const Corpus& c = corpus();
    const RunResult r =
        run_cli("predict-category --train " + q(c.dataset) + " --sigma 6" + c.geometry_flags);
    REQUIRE(r.code == 0);
    const json env = json::parse(r.out);
    CHECK(env.at("report").at("chance").get<double>() == doctest::Approx(1.0 / 3.0));
    const double acc = env.at("report").at("median_accuracy").get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
}

TEST_CASE("part-assign emits JSON lines to stdout or a file") {
    const Corpus& c = corpus();
    const std::string base = "part-assign --input " + q(c.dataset) + " --annotations " +
                             q(c.annotations) + c.geometry_flags;
    const RunResult r = run_cli(base);
    REQUIRE(r.code == 0);
    CHECK(count_lines(r.out) == 12);
    const json first = json::parse(r.out.substr(0, r.out.find('\n')));
    CHECK(first.at("labels").is_array());

    const fs::path out = scratch_root() / "assigned.jsonl";
    REQUIRE(run_cli(base + " --out " + q(out)).code == 0);
    CHECK(read_file(out) == r.out);
}

TEST_CASE("part-similarity reports per-category alignment scores") {
    const Corpus& c = corpus();
    const RunResult r = run_cli("part-similarity --input " + q(c.dataset) + " --annotations " +
                                q(c.annotations) + " --seed 2 --n-random 4" + c.geometry_flags);
    REQUIRE(r.code == 0);
    const json env = json::parse(r.out);
    CHECK(env.at("report").at("median_similarity").is_number());
    CHECK(env.at("report").at("by_category").size() == 3);
    // 2 sketches x 2 subjects per category: C(4,2) pairs each, except pairs
    // whose tiny random null degenerates (those are skipped with a warning)
    std::size_t degenerate = 0;
    for (const auto& w : env.at("report").at("warnings"))
        if (w.get<std::string>().rfind("pair ", 0) == 0) ++degenerate;
    CHECK(env.at("report").at("pairs").size() + degenerate == 18);
}

TEST_CASE("the model pipeline trains, predicts, and evaluates") {
    const Corpus& c = corpus();
    const fs::path model = scratch_root() / "model.json";
    REQUIRE(run_cli("train-hmm --input " + q(c.dataset) + " --annotations " + q(c.annotations) +
                    " --out " + q(model) + c.geometry_flags)
                .code == 0);
    const json m = json::parse(read_file(model));
    CHECK(m.at("states").is_array());
    CHECK(m.at("pi").size() == m.at("states").size());

    const std::string predict_base = "predict-parts --input " + q(c.dataset) +
                                     " --model " + q(model) + c.geometry_flags;
    const RunResult p = run_cli(predict_base);
    REQUIRE(p.code == 0);
    const json env = json::parse(p.out);
    CHECK(env.at("report").at("decoder").get<std::string>() == "pmap");
    CHECK(env.at("report").at("results").size() == 12);
    CHECK(run_cli(predict_base).out == p.out);

    // the random decoder needs an explicit seed
    const RunResult no_seed = run_cli(predict_base + " --decoder random");
    CHECK(no_seed.code == 2);
    CHECK(no_seed.err.find("--seed") != std::string::npos);
    const RunResult ra = run_cli(predict_base + " --decoder random --seed 9");
    const RunResult rb = run_cli(predict_base + " --decoder random --seed 9");
    REQUIRE(ra.code == 0);
    CHECK(ra.out == rb.out);

    // dtw decodes against a training dataset instead of a model
    const RunResult dtw = run_cli("predict-parts --input " + q(c.dataset) + " --decoder dtw" +
                                  " --train " + q(c.dataset) + " --annotations " +
                                  q(c.annotations) + c.geometry_flags);
    REQUIRE(dtw.code == 0);
    CHECK(json::parse(dtw.out).at("report").at("decoder").get<std::string>() == "dtw");

    // labeled-sequence evaluation over ground-truth labels
    const RunResult ev = run_cli("evaluate-parts --input " + q(c.dataset) + " --labels " +
                                 q(c.labels) +
                                 " --seed 4 --trials 2 --k-augment 0 --decoders pmap,random" +
                                 c.geometry_flags);
    REQUIRE(ev.code == 0);
    const json evj = json::parse(ev.out);
    CHECK(evj.at("report").at("per_category").size() == 3);
    CHECK(evj.at("report").at("overall_mean").contains("pmap"));
    CHECK(evj.at("report").at("n_test_sequences").get<int>() > 0);

    // exactly one label source
    CHECK(run_cli("evaluate-parts --input " + q(c.dataset) + " --seed 1" + c.geometry_flags)
              .code == 2);
    CHECK(run_cli("evaluate-parts --input " + q(c.dataset) + " --labels " + q(c.labels) +
                  " --annotations " + q(c.annotations) + " --seed 1" + c.geometry_flags)
              .code == 2);
}

TEST_CASE("correlate-duration reports a category-level coefficient") {
    const Corpus& c = corpus();
    const RunResult r =
        run_cli("correlate-duration --input " + q(c.dataset) + c.geometry_flags);
    REQUIRE(r.code == 0);
    const json env = json::parse(r.out);
    CHECK(env.at("report").at("r").is_number());
    CHECK(env.at("report").at("n_categories").get<int>() == 3);
    CHECK(env.at("report").at("by_category").size() == 3);

    const RunResult csv = run_cli("correlate-duration --input " + q(c.dataset) +
                                  c.geometry_flags + " --format csv");
    REQUIRE(csv.code == 0);
    CHECK(csv.out.rfind("key,value\n", 0) == 0);
    CHECK(csv.out.find("report.r,") != std::string::npos);
}
