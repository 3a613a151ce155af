// gazekit command-line entry point. Talks to the library exclusively through
// the C interface; every analysis result is a JSON document that the CLI
// wraps in a {version, seed, config, report} envelope and renders as JSON,
// CSV, or an aligned text table.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gazekit.h"

using nlohmann::ordered_json;

namespace {

struct GkStr {
    char* p = nullptr;
    ~GkStr() { gk_string_free(p); }
    std::string str() const { return p == nullptr ? std::string() : std::string(p); }
};

struct DatasetHandle {
    gk_dataset* h = nullptr;
    ~DatasetHandle() { gk_dataset_free(h); }
};

struct AnnotationsHandle {
    gk_annotations* h = nullptr;
    ~AnnotationsHandle() { gk_annotations_free(h); }
};

struct ModelHandle {
    gk_model* h = nullptr;
    ~ModelHandle() { gk_model_free(h); }
};

int fail(gk_status status) {
    std::cerr << "error: " << gk_last_error() << "\n";
    return status == GK_ERR_INVALID_ARGUMENT ? 2 : 1;
}

int fail_io(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return 1;
}

bool read_file(const std::string& path, std::string& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    out = ss.str();
    return true;
}

bool write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return false;
    out << content;
    return bool(out);
}

// Scalar rows ("a.b[2].c", value) for the CSV and text renderings.
void flatten(const ordered_json& j, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& rows) {
    if (j.is_object()) {
        if (j.empty()) rows.emplace_back(prefix, "{}");
        for (const auto& [key, value] : j.items())
            flatten(value, prefix.empty() ? key : prefix + "." + key, rows);
    } else if (j.is_array()) {
        if (j.empty()) rows.emplace_back(prefix, "[]");
        for (std::size_t i = 0; i < j.size(); ++i)
            flatten(j[i], prefix + "[" + std::to_string(i) + "]", rows);
    } else if (j.is_string()) {
        rows.emplace_back(prefix, j.get<std::string>());
    } else {
        rows.emplace_back(prefix, j.dump());
    }
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string render_envelope(const ordered_json& envelope, const std::string& format) {
    if (format == "json") return envelope.dump(2) + "\n";
    std::vector<std::pair<std::string, std::string>> rows;
    flatten(envelope, "", rows);
    std::string out;
    if (format == "csv") {
        out = "key,value\n";
        for (const auto& [key, value] : rows)
            out += csv_escape(key) + "," + csv_escape(value) + "\n";
        return out;
    }
    std::size_t width = 0;
    for (const auto& [key, value] : rows) width = std::max(width, key.size());
    for (const auto& [key, value] : rows)
        out += key + std::string(width - key.size(), ' ') + "  " + value + "\n";
    return out;
}

ordered_json make_envelope(const ordered_json& config, const std::uint64_t* seed,
                           ordered_json report) {
    ordered_json env;
    env["version"] = gk_version();
    env["seed"] = seed == nullptr ? ordered_json() : ordered_json(*seed);
    env["config"] = config;
    env["report"] = std::move(report);
    return env;
}

int emit(const std::string& out_path, const std::string& format, const ordered_json& envelope) {
    const std::string content = render_envelope(envelope, format);
    if (out_path.empty()) {
        std::cout << content;
        return 0;
    }
    if (!write_file(out_path, content)) return fail_io("cannot write " + out_path);
    return 0;
}

struct Geometry {
    int width = 1024;
    int height = 1024;
    double ppd = 36.0;
};

void add_geometry_flags(CLI::App* sub, Geometry& g) {
    sub->add_option("--width", g.width, "stimulus width in pixels")->capture_default_str();
    sub->add_option("--height", g.height, "stimulus height in pixels")->capture_default_str();
    sub->add_option("--px-per-deg", g.ppd, "pixels per degree of visual angle")
        ->capture_default_str();
}

void put_geometry(ordered_json& config, const Geometry& g) {
    config["width"] = g.width;
    config["height"] = g.height;
    config["px_per_deg"] = g.ppd;
}

int load_dataset(const std::string& path, const Geometry& g, DatasetHandle& ds) {
    const gk_status st = gk_dataset_load(path.c_str(), g.width, g.height, g.ppd, &ds.h);
    return st == GK_OK ? 0 : fail(st);
}

int load_annotations(const std::string& path, AnnotationsHandle& ann) {
    const gk_status st = gk_annotations_load(path.c_str(), &ann.h);
    return st == GK_OK ? 0 : fail(st);
}

// ---- subcommand options ----

struct IngestOpts {
    std::string input, annotations, out, format = "json";
    Geometry geom;
};

struct SynthOpts {
    std::string out, spec_file;
    std::uint64_t seed = 0;
    int categories = 13, sketches = 24, subjects = 4, parts = 4;
    Geometry geom;
};

struct FixmapOpts {
    std::string input, sketch, subject, render, out, format = "json", style = "gray";
    double sigma = 36.0;
    bool use_duration = true;
    bool standardize = false;
    Geometry geom;
};

struct CatmapOpts {
    std::string input, out, format = "json", style = "gray", prefix = "catmap_";
    std::string regime = "both";
    double sigma = 36.0;
    bool use_duration = true;
    bool no_marginalize = false;
    Geometry geom;
};

struct IocOpts {
    std::string input, out, format = "json", regime = "both";
    double sigma = 36.0;
    bool use_duration = true;
    int n_random = 100;
    int threads = 1;
    std::uint64_t seed = 0;
    Geometry geom;
};

struct PredictCategoryOpts {
    std::string train, out, format = "json";
    std::string train_regime = "both", test_regime = "both";
    double sigma = 36.0;
    bool use_duration = true;
    int threads = 1;
    Geometry geom;
};

struct PartAssignOpts {
    std::string input, annotations, out, regime = "both";
    double snap = 0.0;
    Geometry geom;
};

struct PartSimilarityOpts {
    std::string input, annotations, out, format = "json", regime = "both";
    double snap = 0.0;
    int n_random = 100;
    int threads = 1;
    bool drop_unassigned = false;
    std::uint64_t seed = 0;
    Geometry geom;
};

struct TrainHmmOpts {
    std::string input, annotations, labels, out, category, regime = "both";
    double snap = 0.0;
    double smoothing = 1.0;
    int n_f = 0;
    bool drop_unassigned = false;
    Geometry geom;
};

struct PredictPartsOpts {
    std::string input, model, train, annotations, labels, out, format = "json";
    std::string decoder = "pmap", regime = "both";
    double snap = 0.0;
    bool drop_unassigned = false;
    std::uint64_t seed = 0;
    bool seed_given = false;
    Geometry geom;
};

struct EvaluatePartsOpts {
    std::string input, annotations, labels, out, format = "json", regime = "both";
    double train_frac = 0.6;
    int trials = 10;
    int k_augment = 50;
    double max_dev_deg = 1.0;
    double smoothing = 1.0;
    double snap = 0.0;
    bool drop_unassigned = false;
    std::vector<std::string> decoders = {"pmap", "viterbi", "dtw", "random"};
    int threads = 1;
    std::uint64_t seed = 0;
    Geometry geom;
};

struct CorrelateOpts {
    std::string input, out, format = "json", regime = "both";
    Geometry geom;
};

// ---- subcommand runners ----

int run_ingest(const IngestOpts& o) {
    DatasetHandle ds;
    if (const int rc = load_dataset(o.input, o.geom, ds)) return rc;
    GkStr summary;
    if (const gk_status st = gk_dataset_summary_json(ds.h, &summary.p); st != GK_OK)
        return fail(st);
    ordered_json report = ordered_json::parse(summary.str());
    if (!o.annotations.empty()) {
        AnnotationsHandle ann;
        if (const int rc = load_annotations(o.annotations, ann)) return rc;
        report["annotations_ok"] = true;
    }
    ordered_json config;
    config["input"] = o.input;
    if (!o.annotations.empty()) config["annotations"] = o.annotations;
    put_geometry(config, o.geom);
    return emit(o.out, o.format, make_envelope(config, nullptr, std::move(report)));
}

int run_synth(const SynthOpts& o) {
    std::string spec;
    if (!o.spec_file.empty()) {
        if (!read_file(o.spec_file, spec)) return fail_io("cannot read " + o.spec_file);
    } else {
        GkStr s;
        const gk_status st =
            gk_synth_desk_spec(o.categories, o.sketches, o.subjects, o.parts, o.geom.width,
                               o.geom.height, o.geom.ppd, &s.p);
        if (st != GK_OK) return fail(st);
        spec = s.str();
    }
    GkStr dataset, annotations, labels;
    const gk_status st =
        gk_synthesize(spec.c_str(), o.seed, &dataset.p, &annotations.p, &labels.p);
    if (st != GK_OK) return fail(st);

    std::error_code ec;
    std::filesystem::create_directories(o.out, ec);
    if (ec) return fail_io("cannot create " + o.out);
    const auto dir = std::filesystem::path(o.out);
    for (const auto& [name, content] :
         {std::pair<std::string, std::string>{"spec.json", spec},
          {"dataset.jsonl", dataset.str()},
          {"annotations.json", annotations.str()},
          {"labels.jsonl", labels.str()}}) {
        if (!write_file((dir / name).string(), content))
            return fail_io("cannot write " + (dir / name).string());
    }

    ordered_json config;
    config["spec"] = o.spec_file.empty() ? ordered_json() : ordered_json(o.spec_file);
    config["categories"] = o.categories;
    config["sketches"] = o.sketches;
    config["subjects"] = o.subjects;
    config["parts"] = o.parts;
    put_geometry(config, o.geom);
    ordered_json report;
    report["files"] = {{"spec", "spec.json"},
                       {"dataset", "dataset.jsonl"},
                       {"annotations", "annotations.json"},
                       {"labels", "labels.jsonl"}};
    const std::uint64_t seed = o.seed;
    return emit((dir / "manifest.json").string(), "json",
                make_envelope(config, &seed, std::move(report)));
}

int run_fixmap(const FixmapOpts& o) {
    DatasetHandle ds;
    if (const int rc = load_dataset(o.input, o.geom, ds)) return rc;
    ordered_json config;
    config["input"] = o.input;
    config["sketch"] = o.sketch;
    config["subject"] = o.subject.empty() ? ordered_json() : ordered_json(o.subject);
    config["sigma_px"] = o.sigma;
    config["use_duration"] = o.use_duration;
    config["standardize"] = o.standardize;
    config["style"] = o.style;
    config["render"] = o.render;
    put_geometry(config, o.geom);
    GkStr stats;
    const gk_status st =
        gk_fixmap_render(ds.h, o.sketch.c_str(), o.subject.empty() ? nullptr : o.subject.c_str(),
                         config.dump().c_str(), o.render.c_str(), &stats.p);
    if (st != GK_OK) return fail(st);
    return emit(o.out, o.format,
                make_envelope(config, nullptr, ordered_json::parse(stats.str())));
}

int run_catmap(const CatmapOpts& o) {
    DatasetHandle ds;
    if (const int rc = load_dataset(o.input, o.geom, ds)) return rc;
    ordered_json config;
    config["input"] = o.input;
    config["sigma_px"] = o.sigma;
    config["use_duration"] = o.use_duration;
    config["marginalize"] = !o.no_marginalize;
    config["regime"] = o.regime;
    config["style"] = o.style;
    config["prefix"] = o.prefix;
    config["out"] = o.out;
    put_geometry(config, o.geom);
    GkStr report;
    const gk_status st = gk_catmap_render(ds.h, config.dump().c_str(), o.out.c_str(), &report.p);
    if (st != GK_OK) return fail(st);
    const std::string ext = o.format == "json" ? "json" : (o.format == "csv" ? "csv" : "txt");
    const auto path = std::filesystem::path(o.out) / ("catmap_report." + ext);
    return emit(path.string(), o.format,
                make_envelope(config, nullptr, ordered_json::parse(report.str())));
}

int run_ioc(const IocOpts& o) {
    DatasetHandle ds;
    if (const int rc = load_dataset(o.input, o.geom, ds)) return rc;
    ordered_json config;
    config["input"] = o.input;
    config["sigma_px"] = o.sigma;
    config["use_duration"] = o.use_duration;
    config["n_random"] = o.n_random;
    config["regime"] = o.regime;
    config["threads"] = o.threads;
    put_geometry(config, o.geom);
    GkStr report;
    const gk_status st = gk_ioc_report(ds.h, config.dump().c_str(), o.seed, &report.p);
    if (st != GK_OK) return fail(st);
    return emit(o.out, o.format,
                make_envelope(config, &o.seed, ordered_json::parse(report.str())));
}

int run_predict_category(const PredictCategoryOpts& o) {
    DatasetHandle ds;
    if (const int rc = load_dataset(o.train, o.geom, ds)) return rc;
    ordered_json config;
    config["train"] = o.train;
    config["sigma_px"] = o.sigma;
    config["use_duration"] = o.use_duration;
    config["train_regime"] = o.train_regime;
    config["test_regime"] = o.test_regime;
    config["threads"] = o.threads;
    put_geometry(config, o.geom);
    GkStr report;
    const gk_status st = gk_loso_report(ds.h, config.dump().c_str(), &report.p);
    if (st != GK_OK) return fail(st);
    return emit(o.out, o.format,
                make_envelope(config, nullptr, ordered_json::parse(report.str())));
}

int run_part_assign(const PartAssignOpts& o) {
    DatasetHandle ds;
    if (const int rc = load_dataset(o.input, o.geom, ds)) return rc;
    AnnotationsHandle ann;
    if (const int rc = load_annotations(o.annotations, ann)) return rc;
    ordered_json config;
    config["max_snap_px"] = o.snap;
    config["regime"] = o.regime;
    GkStr jsonl;
    const gk_status st = gk_assign_parts_jsonl(ds.h, ann.h, config.dump().c_str(), &jsonl.p);
    if (st != GK_OK) return fail(st);
    if (o.out.empty()) {
        std::cout << jsonl.str();
        return 0;
    }
    if (!write_file(o.out, jsonl.str())) return fail_io("cannot write " + o.out);
    return 0;
}

int run_part_similarity(const PartSimilarityOpts& o) {
    DatasetHandle ds;
    if (const int rc = load_dataset(o.input, o.geom, ds)) return rc;
    AnnotationsHandle ann;
    if (const int rc = load_annotations(o.annotations, ann)) return rc;
    ordered_json config;
    config["input"] = o.input;
    config["annotations"] = o.annotations;
    config["max_snap_px"] = o.snap;
    config["n_random"] = o.n_random;
    config["regime"] = o.regime;
    config["drop_unassigned"] = o.drop_unassigned;
    config["threads"] = o.threads;
    put_geometry(config, o.geom);
    GkStr report;
    const gk_status st =
        gk_similarity_report(ds.h, ann.h, config.dump().c_str(), o.seed, &report.p);
    if (st != GK_OK) return fail(st);
    return emit(o.out, o.format,
                make_envelope(config, &o.seed, ordered_json::parse(report.str())));
}

int run_train_hmm(const TrainHmmOpts& o) {
    DatasetHandle ds;
    if (const int rc = load_dataset(o.input, o.geom, ds)) return rc;
    AnnotationsHandle ann;
    std::string labels_text;
    if (!o.annotations.empty()) {
        if (const int rc = load_annotations(o.annotations, ann)) return rc;
    }
    if (!o.labels.empty() && !read_file(o.labels, labels_text))
        return fail_io("cannot read " + o.labels);
    ordered_json config;
    config["category"] = o.category.empty() ? ordered_json() : ordered_json(o.category);
    config["max_snap_px"] = o.snap;
    config["drop_unassigned"] = o.drop_unassigned;
    config["smoothing"] = o.smoothing;
    config["regime"] = o.regime;
    config["n_f"] = o.n_f;
    ModelHandle model;
    gk_status st = gk_train_hmm(ds.h, ann.h, o.labels.empty() ? nullptr : labels_text.c_str(),
                                config.dump().c_str(), &model.h);
    if (st != GK_OK) return fail(st);
    st = gk_model_save(model.h, o.out.c_str());
    if (st != GK_OK) return fail(st);
    return 0;
}

int run_predict_parts(const PredictPartsOpts& o) {
    if (o.decoder == "random" && !o.seed_given) {
        std::cerr << "error: --decoder random requires --seed\n";
        return 2;
    }
    DatasetHandle test;
    if (const int rc = load_dataset(o.input, o.geom, test)) return rc;
    ModelHandle model;
    if (!o.model.empty()) {
        if (const gk_status st = gk_model_load(o.model.c_str(), &model.h); st != GK_OK)
            return fail(st);
    }
    DatasetHandle train;
    if (!o.train.empty()) {
        if (const int rc = load_dataset(o.train, o.geom, train)) return rc;
    }
    AnnotationsHandle ann;
    if (!o.annotations.empty()) {
        if (const int rc = load_annotations(o.annotations, ann)) return rc;
    }
    std::string labels_text;
    if (!o.labels.empty() && !read_file(o.labels, labels_text))
        return fail_io("cannot read " + o.labels);

    ordered_json config;
    config["input"] = o.input;
    config["decoder"] = o.decoder;
    config["model"] = o.model.empty() ? ordered_json() : ordered_json(o.model);
    config["train"] = o.train.empty() ? ordered_json() : ordered_json(o.train);
    config["max_snap_px"] = o.snap;
    config["drop_unassigned"] = o.drop_unassigned;
    config["regime"] = o.regime;
    put_geometry(config, o.geom);
    GkStr report;
    const gk_status st = gk_predict_parts(
        model.h, test.h, train.h, ann.h, o.labels.empty() ? nullptr : labels_text.c_str(),
        config.dump().c_str(), o.seed, &report.p);
    if (st != GK_OK) return fail(st);
    return emit(o.out, o.format,
                make_envelope(config, o.seed_given ? &o.seed : nullptr,
                              ordered_json::parse(report.str())));
}

int run_evaluate_parts(const EvaluatePartsOpts& o) {
    DatasetHandle ds;
    if (const int rc = load_dataset(o.input, o.geom, ds)) return rc;
    AnnotationsHandle ann;
    if (!o.annotations.empty()) {
        if (const int rc = load_annotations(o.annotations, ann)) return rc;
    }
    std::string labels_text;
    if (!o.labels.empty() && !read_file(o.labels, labels_text))
        return fail_io("cannot read " + o.labels);
    ordered_json config;
    config["input"] = o.input;
    config["train_frac"] = o.train_frac;
    config["trials"] = o.trials;
    config["k_augment"] = o.k_augment;
    config["max_dev_deg"] = o.max_dev_deg;
    config["smoothing"] = o.smoothing;
    config["max_snap_px"] = o.snap;
    config["drop_unassigned"] = o.drop_unassigned;
    config["regime"] = o.regime;
    config["decoders"] = o.decoders;
    config["threads"] = o.threads;
    put_geometry(config, o.geom);
    GkStr report;
    const gk_status st =
        gk_evaluate_parts(ds.h, ann.h, o.labels.empty() ? nullptr : labels_text.c_str(),
                          config.dump().c_str(), o.seed, &report.p);
    if (st != GK_OK) return fail(st);
    return emit(o.out, o.format,
                make_envelope(config, &o.seed, ordered_json::parse(report.str())));
}

int run_correlate(const CorrelateOpts& o) {
    DatasetHandle ds;
    if (const int rc = load_dataset(o.input, o.geom, ds)) return rc;
    GkStr report;
    const gk_status st = gk_correlation_report(ds.h, o.regime.c_str(), &report.p);
    if (st != GK_OK) return fail(st);
    ordered_json config;
    config["input"] = o.input;
    config["regime"] = o.regime;
    put_geometry(config, o.geom);
    return emit(o.out, o.format,
                make_envelope(config, nullptr, ordered_json::parse(report.str())));
}

const std::vector<std::string> kFormats = {"json", "csv", "text"};
const std::vector<std::string> kRegimes = {"both", "primed", "unprimed"};
const std::vector<std::string> kStyles = {"gray", "heat"};
const std::vector<std::string> kDecoders = {"pmap", "viterbi", "dtw", "random"};

void add_format_flags(CLI::App* sub, std::string& out, std::string& format) {
    sub->add_option("--out", out, "output file (stdout when omitted)");
    sub->add_option("--format", format, "report format")
        ->check(CLI::IsMember(kFormats))
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gaze analytics for sketch viewing: fixation maps, congruency, "
                 "category prediction, and part-sequence models",
                 "gazekit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", gk_version());
    app.failure_message(CLI::FailureMessage::help);

    IngestOpts ingest;
    auto* ingest_cmd = app.add_subcommand("ingest-check", "Validate a dataset and summarize it");
    ingest_cmd->add_option("--input", ingest.input, "dataset JSON Lines file")->required();
    ingest_cmd->add_option("--annotations", ingest.annotations, "part annotation JSON file");
    add_geometry_flags(ingest_cmd, ingest.geom);
    add_format_flags(ingest_cmd, ingest.out, ingest.format);

    SynthOpts synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth_cmd->add_option("--out", synth.out, "output directory")->required();
    synth_cmd->add_option("--seed", synth.seed, "RNG seed")->required();
    synth_cmd->add_option("--spec", synth.spec_file, "generator spec JSON (overrides the knobs below)");
    synth_cmd->add_option("--categories", synth.categories, "number of categories")
        ->capture_default_str();
    synth_cmd->add_option("--sketches", synth.sketches, "sketches per category")
        ->capture_default_str();
    synth_cmd->add_option("--subjects", synth.subjects, "subjects per sketch")
        ->capture_default_str();
    synth_cmd->add_option("--parts", synth.parts, "parts per category")->capture_default_str();
    add_geometry_flags(synth_cmd, synth.geom);

    FixmapOpts fixmap;
    auto* fixmap_cmd = app.add_subcommand("fixmap", "Render a fixation map for one sketch");
    fixmap_cmd->add_option("--input", fixmap.input, "dataset JSON Lines file")->required();
    fixmap_cmd->add_option("--sketch", fixmap.sketch, "sketch id")->required();
    fixmap_cmd->add_option("--subject", fixmap.subject, "restrict to one subject");
    fixmap_cmd->add_option("--sigma", fixmap.sigma, "Gaussian sigma in pixels")
        ->capture_default_str();
    fixmap_cmd->add_option("--use-duration", fixmap.use_duration, "weight fixations by duration")
        ->capture_default_str();
    fixmap_cmd->add_flag("--standardize", fixmap.standardize, "standardize the map before rendering");
    fixmap_cmd->add_option("--style", fixmap.style, "image style")
        ->check(CLI::IsMember(kStyles))
        ->capture_default_str();
    fixmap_cmd->add_option("--render", fixmap.render, "output image path (.pgm or .ppm)")
        ->required();
    add_geometry_flags(fixmap_cmd, fixmap.geom);
    add_format_flags(fixmap_cmd, fixmap.out, fixmap.format);

    CatmapOpts catmap;
    auto* catmap_cmd = app.add_subcommand("catmap", "Render per-category fixation maps");
    catmap_cmd->add_option("--input", catmap.input, "dataset JSON Lines file")->required();
    catmap_cmd->add_option("--out", catmap.out, "output directory")->required();
    catmap_cmd->add_option("--sigma", catmap.sigma, "Gaussian sigma in pixels")
        ->capture_default_str();
    catmap_cmd->add_option("--use-duration", catmap.use_duration, "weight fixations by duration")
        ->capture_default_str();
    catmap_cmd->add_flag("--no-marginalize", catmap.no_marginalize,
                         "emit plain category maps instead of marginalized ones");
    catmap_cmd->add_option("--style", catmap.style, "image style")
        ->check(CLI::IsMember(kStyles))
        ->capture_default_str();
    catmap_cmd->add_option("--prefix", catmap.prefix, "image filename prefix")
        ->capture_default_str();
    catmap_cmd->add_option("--regime", catmap.regime, "viewing regime filter")
        ->check(CLI::IsMember(kRegimes))
        ->capture_default_str();
    catmap_cmd->add_option("--format", catmap.format, "report format")
        ->check(CLI::IsMember(kFormats))
        ->capture_default_str();
    add_geometry_flags(catmap_cmd, catmap.geom);

    IocOpts ioc;
    auto* ioc_cmd = app.add_subcommand("ioc", "Inter-observer congruency report");
    ioc_cmd->add_option("--input", ioc.input, "dataset JSON Lines file")->required();
    ioc_cmd->add_option("--seed", ioc.seed, "RNG seed")->required();
    ioc_cmd->add_option("--sigma", ioc.sigma, "Gaussian sigma in pixels")->capture_default_str();
    ioc_cmd->add_option("--use-duration", ioc.use_duration, "weight fixations by duration")
        ->capture_default_str();
    ioc_cmd->add_option("--n-random", ioc.n_random, "random scanpaths per held-out subject")
        ->capture_default_str();
    ioc_cmd->add_option("--regime", ioc.regime, "viewing regime filter")
        ->check(CLI::IsMember(kRegimes))
        ->capture_default_str();
    ioc_cmd->add_option("--threads", ioc.threads, "worker threads")->capture_default_str();
    add_geometry_flags(ioc_cmd, ioc.geom);
    add_format_flags(ioc_cmd, ioc.out, ioc.format);

    PredictCategoryOpts predcat;
    auto* predcat_cmd = app.add_subcommand(
        "predict-category", "Leave-one-subject-out category prediction report");
    predcat_cmd->add_option("--train", predcat.train, "dataset JSON Lines file")->required();
    predcat_cmd->add_option("--sigma", predcat.sigma, "Gaussian sigma in pixels")
        ->capture_default_str();
    predcat_cmd
        ->add_option("--use-duration", predcat.use_duration, "weight fixations by duration")
        ->capture_default_str();
    predcat_cmd->add_option("--train-regime", predcat.train_regime, "regime for map building")
        ->check(CLI::IsMember(kRegimes))
        ->capture_default_str();
    predcat_cmd->add_option("--test-regime", predcat.test_regime, "regime for scored sessions")
        ->check(CLI::IsMember(kRegimes))
        ->capture_default_str();
    predcat_cmd->add_option("--threads", predcat.threads, "worker threads")
        ->capture_default_str();
    add_geometry_flags(predcat_cmd, predcat.geom);
    add_format_flags(predcat_cmd, predcat.out, predcat.format);

    PartAssignOpts passign;
    auto* passign_cmd =
        app.add_subcommand("part-assign", "Map fixation sequences to part-label sequences");
    passign_cmd->add_option("--input", passign.input, "dataset JSON Lines file")->required();
    passign_cmd->add_option("--annotations", passign.annotations, "part annotation JSON file")
        ->required();
    passign_cmd->add_option("--snap", passign.snap, "snap radius in pixels (0 = one degree)")
        ->capture_default_str();
    passign_cmd->add_option("--regime", passign.regime, "viewing regime filter")
        ->check(CLI::IsMember(kRegimes))
        ->capture_default_str();
    passign_cmd->add_option("--out", passign.out, "output JSON Lines file (stdout when omitted)");
    add_geometry_flags(passign_cmd, passign.geom);

    PartSimilarityOpts psim;
    auto* psim_cmd =
        app.add_subcommand("part-similarity", "Within-category part-sequence similarity report");
    psim_cmd->add_option("--input", psim.input, "dataset JSON Lines file")->required();
    psim_cmd->add_option("--annotations", psim.annotations, "part annotation JSON file")
        ->required();
    psim_cmd->add_option("--seed", psim.seed, "RNG seed")->required();
    psim_cmd->add_option("--snap", psim.snap, "snap radius in pixels (0 = one degree)")
        ->capture_default_str();
    psim_cmd->add_option("--n-random", psim.n_random, "random sequences per z-score")
        ->capture_default_str();
    psim_cmd->add_flag("--drop-unassigned", psim.drop_unassigned,
                       "drop UNASSIGNED tokens instead of aligning them");
    psim_cmd->add_option("--regime", psim.regime, "viewing regime filter")
        ->check(CLI::IsMember(kRegimes))
        ->capture_default_str();
    psim_cmd->add_option("--threads", psim.threads, "worker threads")->capture_default_str();
    add_geometry_flags(psim_cmd, psim.geom);
    add_format_flags(psim_cmd, psim.out, psim.format);

    TrainHmmOpts train;
    auto* train_cmd = app.add_subcommand("train-hmm", "Train a part-label sequence model");
    train_cmd->add_option("--input", train.input, "dataset JSON Lines file")->required();
    train_cmd->add_option("--annotations", train.annotations, "part annotation JSON file");
    train_cmd->add_option("--labels", train.labels, "ground-truth label JSON Lines file");
    train_cmd->add_option("--out", train.out, "output model JSON file")->required();
    train_cmd->add_option("--category", train.category, "train on one category only");
    train_cmd->add_option("--snap", train.snap, "snap radius in pixels (0 = one degree)")
        ->capture_default_str();
    train_cmd->add_option("--smoothing", train.smoothing, "additive smoothing weight")
        ->capture_default_str();
    train_cmd->add_option("--n-f", train.n_f, "ordinal normalizer (0 = dataset maximum)")
        ->capture_default_str();
    train_cmd->add_flag("--drop-unassigned", train.drop_unassigned,
                        "drop UNASSIGNED fixations from training sequences");
    train_cmd->add_option("--regime", train.regime, "viewing regime filter")
        ->check(CLI::IsMember(kRegimes))
        ->capture_default_str();
    add_geometry_flags(train_cmd, train.geom);

    PredictPartsOpts predict;
    auto* predict_cmd =
        app.add_subcommand("predict-parts", "Decode part labels for every session");
    predict_cmd->add_option("--input", predict.input, "test dataset JSON Lines file")->required();
    predict_cmd->add_option("--decoder", predict.decoder, "decoding strategy")
        ->check(CLI::IsMember(kDecoders))
        ->capture_default_str();
    predict_cmd->add_option("--model", predict.model,
                            "model JSON file (pmap, viterbi and random decoders)");
    predict_cmd->add_option("--train", predict.train, "training dataset (dtw decoder)");
    predict_cmd->add_option("--annotations", predict.annotations,
                            "part annotation JSON file (dtw decoder)");
    predict_cmd->add_option("--labels", predict.labels,
                            "ground-truth label JSON Lines file (dtw decoder)");
    auto* predict_seed =
        predict_cmd->add_option("--seed", predict.seed, "RNG seed (random decoder)");
    predict_cmd->add_option("--snap", predict.snap, "snap radius in pixels (0 = one degree)")
        ->capture_default_str();
    predict_cmd->add_flag("--drop-unassigned", predict.drop_unassigned,
                          "drop UNASSIGNED fixations from dtw training sequences");
    predict_cmd->add_option("--regime", predict.regime, "training regime filter (dtw decoder)")
        ->check(CLI::IsMember(kRegimes))
        ->capture_default_str();
    add_geometry_flags(predict_cmd, predict.geom);
    add_format_flags(predict_cmd, predict.out, predict.format);

    EvaluatePartsOpts evaluate;
    auto* evaluate_cmd = app.add_subcommand(
        "evaluate-parts", "Train/test split evaluation of part-label decoders");
    evaluate_cmd->add_option("--input", evaluate.input, "dataset JSON Lines file")->required();
    evaluate_cmd->add_option("--annotations", evaluate.annotations, "part annotation JSON file");
    evaluate_cmd->add_option("--labels", evaluate.labels, "ground-truth label JSON Lines file");
    evaluate_cmd->add_option("--seed", evaluate.seed, "RNG seed")->required();
    evaluate_cmd->add_option("--train-frac", evaluate.train_frac, "training fraction per trial")
        ->capture_default_str();
    evaluate_cmd->add_option("--trials", evaluate.trials, "random split trials")
        ->capture_default_str();
    evaluate_cmd->add_option("--k-augment", evaluate.k_augment, "augmented copies per sequence")
        ->capture_default_str();
    evaluate_cmd
        ->add_option("--max-dev-deg", evaluate.max_dev_deg, "augmentation jitter in degrees")
        ->capture_default_str();
    evaluate_cmd->add_option("--smoothing", evaluate.smoothing, "additive smoothing weight")
        ->capture_default_str();
    evaluate_cmd->add_option("--snap", evaluate.snap, "snap radius in pixels (0 = one degree)")
        ->capture_default_str();
    evaluate_cmd->add_flag("--drop-unassigned", evaluate.drop_unassigned,
                           "drop UNASSIGNED fixations from sequences");
    evaluate_cmd->add_option("--decoders", evaluate.decoders, "decoders to evaluate")
        ->delimiter(',')
        ->capture_default_str();
    evaluate_cmd->add_option("--regime", evaluate.regime, "viewing regime filter")
        ->check(CLI::IsMember(kRegimes))
        ->capture_default_str();
    evaluate_cmd->add_option("--threads", evaluate.threads, "worker threads")
        ->capture_default_str();
    add_geometry_flags(evaluate_cmd, evaluate.geom);
    add_format_flags(evaluate_cmd, evaluate.out, evaluate.format);

    CorrelateOpts correlate;
    auto* correlate_cmd = app.add_subcommand(
        "correlate-duration", "Correlate per-category mean fixation duration with count");
    correlate_cmd->add_option("--input", correlate.input, "dataset JSON Lines file")->required();
    correlate_cmd->add_option("--regime", correlate.regime, "viewing regime filter")
        ->check(CLI::IsMember(kRegimes))
        ->capture_default_str();
    add_geometry_flags(correlate_cmd, correlate.geom);
    add_format_flags(correlate_cmd, correlate.out, correlate.format);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    predict.seed_given = predict_seed->count() > 0;

    if (*ingest_cmd) return run_ingest(ingest);
    if (*synth_cmd) return run_synth(synth);
    if (*fixmap_cmd) return run_fixmap(fixmap);
    if (*catmap_cmd) return run_catmap(catmap);
    if (*ioc_cmd) return run_ioc(ioc);
    if (*predcat_cmd) return run_predict_category(predcat);
    if (*passign_cmd) return run_part_assign(passign);
    if (*psim_cmd) return run_part_similarity(psim);
    if (*train_cmd) return run_train_hmm(train);
    if (*predict_cmd) return run_predict_parts(predict);
    if (*evaluate_cmd) return run_evaluate_parts(evaluate);
    if (*correlate_cmd) return run_correlate(correlate);
    return 2;
}
