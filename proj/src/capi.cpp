#include "gazekit.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazekit/catpredict.hpp"
#include "gazekit/congruency.hpp"
#include "gazekit/dataset.hpp"
#include "gazekit/errors.hpp"
#include "gazekit/fixmap.hpp"
#include "gazekit/partmodel.hpp"
#include "gazekit/partseq.hpp"
#include "gazekit/rng.hpp"
#include "gazekit/synth.hpp"
#include "gazekit/version.hpp"

using nlohmann::ordered_json;

struct gk_dataset {
    gazekit::Dataset value;
};

struct gk_annotations {
    gazekit::AnnotationMap value;
};

struct gk_model {
    gazekit::PartHmm value;
};

namespace {

thread_local std::string g_error;

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void require(bool ok, const char* message) {
    if (!ok) throw gazekit::InvalidArgument(message);
}

template <typename Fn>
gk_status wrap(Fn&& fn) {
    try {
        fn();
        g_error.clear();
        return GK_OK;
    } catch (const gazekit::InvalidArgument& e) {
        g_error = e.what();
        return GK_ERR_INVALID_ARGUMENT;
    } catch (const gazekit::ParseError& e) {
        g_error = e.what();
        return GK_ERR_PARSE;
    } catch (const gazekit::ValidationError& e) {
        g_error = e.what();
        return GK_ERR_VALIDATION;
    } catch (const gazekit::IoError& e) {
        g_error = e.what();
        return GK_ERR_IO;
    } catch (const nlohmann::json::exception& e) {
        g_error = e.what();
        return GK_ERR_PARSE;
    } catch (const std::exception& e) {
        g_error = e.what();
        return GK_ERR_INTERNAL;
    } catch (...) {
        g_error = "unknown error";
        return GK_ERR_INTERNAL;
    }
}

ordered_json parse_config(const char* config_json) {
    if (config_json == nullptr || *config_json == '\0') return ordered_json::object();
    ordered_json j = ordered_json::parse(config_json);
    if (!j.is_object()) throw gazekit::InvalidArgument("config must be a JSON object");
    return j;
}

double cfg_num(const ordered_json& j, const char* key, double fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    if (!it->is_number())
        throw gazekit::InvalidArgument(std::string("config key '") + key + "' must be a number");
    return it->get<double>();
}

int cfg_int(const ordered_json& j, const char* key, int fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    if (!it->is_number_integer())
        throw gazekit::InvalidArgument(std::string("config key '") + key + "' must be an integer");
    return it->get<int>();
}

bool cfg_bool(const ordered_json& j, const char* key, bool fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    if (!it->is_boolean())
        throw gazekit::InvalidArgument(std::string("config key '") + key + "' must be a boolean");
    return it->get<bool>();
}

std::string cfg_str(const ordered_json& j, const char* key, const std::string& fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    if (!it->is_string())
        throw gazekit::InvalidArgument(std::string("config key '") + key + "' must be a string");
    return it->get<std::string>();
}

gazekit::StimulusGeometry make_geometry(int width_px, int height_px, double ppd) {
    gazekit::StimulusGeometry g;
    g.width_px = width_px;
    g.height_px = height_px;
    g.pixels_per_degree = ppd;
    g.validate();
    return g;
}

gazekit::RenderStyle style_from_string(const std::string& s) {
    if (s == "gray") return gazekit::RenderStyle::gray;
    if (s == "heat") return gazekit::RenderStyle::heat;
    throw gazekit::InvalidArgument("style must be 'gray' or 'heat', got '" + s + "'");
}

std::string sanitize_filename(const std::string& name) {
    std::string out;
    out.reserve(name.size());
    for (const char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? std::string("_") : out;
}

// Part-label sequences for model work, from polygon annotations or from a
// ground-truth label table. Sessions without a source are skipped; dropping
// UNASSIGNED removes the fixation together with its label.
std::vector<gazekit::LabeledSequence> labeled_sequences(
    const gazekit::Dataset& data, const gazekit::AnnotationMap* annotations,
    const gazekit::GroundTruthLabels* truth, gazekit::RegimeFilter regime, double max_snap_px,
    bool drop_unassigned) {
    std::vector<gazekit::LabeledSequence> out;
    for (const auto& session : data.sessions()) {
        if (!gazekit::regime_matches(session.regime, regime)) continue;
        std::vector<std::string> labels;
        if (annotations != nullptr) {
            auto it = annotations->find(session.sketch_id);
            if (it == annotations->end()) continue;
            labels = gazekit::assign_parts(session.fixations, it->second, max_snap_px);
        } else {
            auto it = truth->find({session.sketch_id, session.subject_id});
            if (it == truth->end()) continue;
            labels = it->second;
            if (labels.size() != session.fixations.size())
                throw gazekit::ValidationError("label sequence for " + session.sketch_id + "/" +
                                               session.subject_id +
                                               " does not match the fixation count");
        }
        gazekit::LabeledSequence seq;
        seq.sketch_id = session.sketch_id;
        seq.subject_id = session.subject_id;
        seq.category = session.category;
        if (drop_unassigned) {
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == gazekit::kUnassigned) continue;
                seq.fixations.push_back(session.fixations[i]);
                seq.labels.push_back(labels[i]);
            }
            if (seq.labels.empty()) continue;
        } else {
            seq.fixations = session.fixations;
            seq.labels = std::move(labels);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

double resolve_snap(const ordered_json& cfg, const gazekit::StimulusGeometry& geometry) {
    const double snap = cfg_num(cfg, "max_snap_px", 0.0);
    return snap > 0.0 ? snap : geometry.pixels_per_degree;
}

}  // namespace

extern "C" {

const char* gk_version(void) { return GAZEKIT_VERSION; }

const char* gk_last_error(void) { return g_error.c_str(); }

void gk_string_free(char* s) { delete[] s; }

gk_status gk_dataset_load(const char* path, int width_px, int height_px,
                          double pixels_per_degree, gk_dataset** out) {
    if (out != nullptr) *out = nullptr;
    return wrap([&] {
        require(path != nullptr && out != nullptr, "path and out must be non-null");
        const auto geometry = make_geometry(width_px, height_px, pixels_per_degree);
        *out = new gk_dataset{gazekit::load_dataset(path, geometry)};
    });
}

gk_status gk_dataset_from_jsonl(const char* text, int width_px, int height_px,
                                double pixels_per_degree, gk_dataset** out) {
    if (out != nullptr) *out = nullptr;
    return wrap([&] {
        require(text != nullptr && out != nullptr, "text and out must be non-null");
        const auto geometry = make_geometry(width_px, height_px, pixels_per_degree);
        *out = new gk_dataset{gazekit::dataset_from_jsonl(text, geometry)};
    });
}

gk_status gk_dataset_save(const gk_dataset* ds, const char* path) {
    return wrap([&] {
        require(ds != nullptr && path != nullptr, "dataset and path must be non-null");
        gazekit::write_dataset(ds->value, path);
    });
}

gk_status gk_dataset_to_jsonl(const gk_dataset* ds, char** out_text) {
    if (out_text != nullptr) *out_text = nullptr;
    return wrap([&] {
        require(ds != nullptr && out_text != nullptr, "dataset and out must be non-null");
        *out_text = dup_string(gazekit::dataset_to_jsonl(ds->value));
    });
}

gk_status gk_dataset_summary_json(const gk_dataset* ds, char** out_json) {
    if (out_json != nullptr) *out_json = nullptr;
    return wrap([&] {
        require(ds != nullptr && out_json != nullptr, "dataset and out must be non-null");
        *out_json = dup_string(gazekit::dataset_summary_json(ds->value));
    });
}

void gk_dataset_free(gk_dataset* ds) { delete ds; }

gk_status gk_annotations_load(const char* path, gk_annotations** out) {
    if (out != nullptr) *out = nullptr;
    return wrap([&] {
        require(path != nullptr && out != nullptr, "path and out must be non-null");
        *out = new gk_annotations{gazekit::load_annotations(path)};
    });
}

gk_status gk_annotations_from_json(const char* text, gk_annotations** out) {
    if (out != nullptr) *out = nullptr;
    return wrap([&] {
        require(text != nullptr && out != nullptr, "text and out must be non-null");
        *out = new gk_annotations{gazekit::annotations_from_json(text)};
    });
}

gk_status gk_annotations_save(const gk_annotations* ann, const char* path) {
    return wrap([&] {
        require(ann != nullptr && path != nullptr, "annotations and path must be non-null");
        gazekit::write_annotations(ann->value, path);
    });
}

void gk_annotations_free(gk_annotations* ann) { delete ann; }

gk_status gk_synth_desk_spec(int n_categories, int sketches_per_category,
                             int subjects_per_sketch, int parts_per_category, int width_px,
                             int height_px, double pixels_per_degree, char** out_spec_json) {
    if (out_spec_json != nullptr) *out_spec_json = nullptr;
    return wrap([&] {
        require(out_spec_json != nullptr, "out must be non-null");
        const auto geometry = make_geometry(width_px, height_px, pixels_per_degree);
        const auto spec = gazekit::desk_scale_spec(geometry, n_categories, sketches_per_category,
                                                   subjects_per_sketch, parts_per_category);
        *out_spec_json = dup_string(gazekit::synth_spec_to_json(spec));
    });
}

gk_status gk_synthesize(const char* spec_json, uint64_t seed, char** out_dataset_jsonl,
                        char** out_annotations_json, char** out_labels_jsonl) {
    if (out_dataset_jsonl != nullptr) *out_dataset_jsonl = nullptr;
    if (out_annotations_json != nullptr) *out_annotations_json = nullptr;
    if (out_labels_jsonl != nullptr) *out_labels_jsonl = nullptr;
    return wrap([&] {
        require(spec_json != nullptr, "spec must be non-null");
        const auto spec = gazekit::synth_spec_from_json(spec_json);
        const auto result = gazekit::synthesize_dataset(spec, gazekit::Rng(seed));
        if (out_dataset_jsonl != nullptr)
            *out_dataset_jsonl = dup_string(gazekit::dataset_to_jsonl(result.dataset));
        if (out_annotations_json != nullptr)
            *out_annotations_json = dup_string(gazekit::annotations_to_json(result.annotations));
        if (out_labels_jsonl != nullptr)
            *out_labels_jsonl = dup_string(gazekit::labels_to_jsonl(result.labels));
    });
}

gk_status gk_fixmap_render(const gk_dataset* ds, const char* sketch_id,
                           const char* subject_id, const char* config_json,
                           const char* image_path, char** out_stats_json) {
    if (out_stats_json != nullptr) *out_stats_json = nullptr;
    return wrap([&] {
        require(ds != nullptr && sketch_id != nullptr && image_path != nullptr,
                "dataset, sketch_id and image_path must be non-null");
        const auto cfg = parse_config(config_json);
        const auto& geometry = ds->value.geometry();
        double sigma = cfg_num(cfg, "sigma_px", 0.0);
        if (sigma <= 0.0) sigma = geometry.pixels_per_degree;
        const bool use_duration = cfg_bool(cfg, "use_duration", true);
        const bool do_standardize = cfg_bool(cfg, "standardize", false);
        const auto style = style_from_string(cfg_str(cfg, "style", "gray"));

        std::vector<gazekit::Fixation> fixations;
        int n_sessions = 0;
        for (const auto& session : ds->value.sessions()) {
            if (session.sketch_id != sketch_id) continue;
            if (subject_id != nullptr && session.subject_id != subject_id) continue;
            fixations.insert(fixations.end(), session.fixations.begin(),
                             session.fixations.end());
            ++n_sessions;
        }
        if (n_sessions == 0)
            throw gazekit::InvalidArgument(
                subject_id == nullptr
                    ? "no sessions for sketch '" + std::string(sketch_id) + "'"
                    : "no sessions for sketch '" + std::string(sketch_id) + "' and subject '" +
                          subject_id + "'");

        gazekit::FixationMap map = gazekit::raw_map(fixations, geometry, sigma, use_duration);
        if (do_standardize) map = gazekit::standardize(map);
        gazekit::render_map(map, image_path, style);

        if (out_stats_json != nullptr) {
            const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
            ordered_json stats;
            stats["sketch_id"] = sketch_id;
            stats["subject_id"] =
                subject_id == nullptr ? ordered_json() : ordered_json(subject_id);
            stats["n_sessions"] = n_sessions;
            stats["n_fixations"] = fixations.size();
            stats["kind"] = gazekit::to_string(map.kind);
            stats["sigma_px"] = sigma;
            stats["use_duration"] = use_duration;
            stats["min"] = *lo;
            stats["max"] = *hi;
            *out_stats_json = dup_string(stats.dump(2) + "\n");
        }
    });
}

gk_status gk_catmap_render(const gk_dataset* ds, const char* config_json, const char* out_dir,
                           char** out_report_json) {
    if (out_report_json != nullptr) *out_report_json = nullptr;
    return wrap([&] {
        require(ds != nullptr && out_dir != nullptr, "dataset and out_dir must be non-null");
        const auto cfg = parse_config(config_json);
        const auto& geometry = ds->value.geometry();
        double sigma = cfg_num(cfg, "sigma_px", 0.0);
        if (sigma <= 0.0) sigma = geometry.pixels_per_degree;
        const bool use_duration = cfg_bool(cfg, "use_duration", true);
        const bool do_marginalize = cfg_bool(cfg, "marginalize", true);
        const auto regime = gazekit::regime_filter_from_string(cfg_str(cfg, "regime", "both"));
        const auto style = style_from_string(cfg_str(cfg, "style", "gray"));
        const std::string prefix = cfg_str(cfg, "prefix", "catmap_");

        // Pool each sketch's sessions, standardize its map, and keep per
        // category a running sum so only one full-resolution map is live at
        // a time.
        std::map<std::string, std::pair<std::string, std::vector<gazekit::Fixation>>> by_sketch;
        for (const auto& session : ds->value.sessions()) {
            if (!gazekit::regime_matches(session.regime, regime)) continue;
            auto& entry = by_sketch[session.sketch_id];
            entry.first = session.category;
            entry.second.insert(entry.second.end(), session.fixations.begin(),
                                session.fixations.end());
        }
        if (by_sketch.empty()) throw gazekit::ValidationError("no sessions match the regime");

        std::map<std::string, gazekit::FixationMap> sums;
        std::map<std::string, int> counts;
        for (const auto& [sketch_id, entry] : by_sketch) {
            auto map = gazekit::standardize(
                gazekit::raw_map(entry.second, geometry, sigma, use_duration));
            auto it = sums.find(entry.first);
            if (it == sums.end()) {
                sums.emplace(entry.first, std::move(map));
            } else {
                for (std::size_t i = 0; i < map.values.size(); ++i)
                    it->second.values[i] += map.values[i];
            }
            ++counts[entry.first];
        }
        std::map<std::string, gazekit::FixationMap> maps;
        for (auto& [category, sum] : sums) {
            const double n = static_cast<double>(counts[category]);
            for (auto& v : sum.values) v /= n;
            sum.kind = gazekit::MapKind::category;
            maps.emplace(category, std::move(sum));
        }
        if (do_marginalize) maps = gazekit::marginalize(maps);

        std::filesystem::create_directories(out_dir);
        const char* ext = style == gazekit::RenderStyle::gray ? ".pgm" : ".ppm";
        ordered_json entries = ordered_json::object();
        for (const auto& [category, map] : maps) {
            const std::string file = prefix + sanitize_filename(category) + ext;
            gazekit::render_map(map, (std::filesystem::path(out_dir) / file).string(), style);
            const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
            ordered_json e;
            e["file"] = file;
            e["n_sketches"] = counts[category];
            e["min"] = *lo;
            e["max"] = *hi;
            entries[category] = std::move(e);
        }
        if (out_report_json != nullptr) {
            ordered_json report;
            report["kind"] = do_marginalize ? "marginalized" : "category";
            report["sigma_px"] = sigma;
            report["use_duration"] = use_duration;
            report["n_categories"] = maps.size();
            report["categories"] = std::move(entries);
            *out_report_json = dup_string(report.dump(2) + "\n");
        }
    });
}

gk_status gk_ioc_report(const gk_dataset* ds, const char* config_json, uint64_t seed,
                        char** out_json) {
    if (out_json != nullptr) *out_json = nullptr;
    return wrap([&] {
        require(ds != nullptr && out_json != nullptr, "dataset and out must be non-null");
        const auto cfg = parse_config(config_json);
        gazekit::IocOptions options;
        options.sigma_px = cfg_num(cfg, "sigma_px", 0.0);
        options.use_duration = cfg_bool(cfg, "use_duration", true);
        options.n_random = cfg_int(cfg, "n_random", 100);
        options.regime = gazekit::regime_filter_from_string(cfg_str(cfg, "regime", "both"));
        options.threads = cfg_int(cfg, "threads", 1);
        const auto report = gazekit::ioc_report(ds->value, options, gazekit::Rng(seed));
        *out_json = dup_string(gazekit::ioc_report_to_json(report));
    });
}

gk_status gk_loso_report(const gk_dataset* ds, const char* config_json, char** out_json) {
    if (out_json != nullptr) *out_json = nullptr;
    return wrap([&] {
        require(ds != nullptr && out_json != nullptr, "dataset and out must be non-null");
        const auto cfg = parse_config(config_json);
        gazekit::LosoOptions options;
        options.sigma_px = cfg_num(cfg, "sigma_px", 0.0);
        options.use_duration = cfg_bool(cfg, "use_duration", true);
        options.train_regime =
            gazekit::regime_filter_from_string(cfg_str(cfg, "train_regime", "both"));
        options.test_regime =
            gazekit::regime_filter_from_string(cfg_str(cfg, "test_regime", "both"));
        options.threads = cfg_int(cfg, "threads", 1);
        const auto report = gazekit::loso_evaluate(ds->value, options);
        *out_json = dup_string(gazekit::loso_report_to_json(report));
    });
}

gk_status gk_correlation_report(const gk_dataset* ds, const char* regime, char** out_json) {
    if (out_json != nullptr) *out_json = nullptr;
    return wrap([&] {
        require(ds != nullptr && out_json != nullptr, "dataset and out must be non-null");
        const auto filter =
            gazekit::regime_filter_from_string(regime == nullptr ? "both" : regime);
        const auto result = gazekit::duration_count_correlation(ds->value, filter);
        *out_json = dup_string(gazekit::correlation_to_json(result));
    });
}

gk_status gk_assign_parts_jsonl(const gk_dataset* ds, const gk_annotations* ann,
                                const char* config_json, char** out_jsonl) {
    if (out_jsonl != nullptr) *out_jsonl = nullptr;
    return wrap([&] {
        require(ds != nullptr && ann != nullptr && out_jsonl != nullptr,
                "dataset, annotations and out must be non-null");
        const auto cfg = parse_config(config_json);
        const double snap = resolve_snap(cfg, ds->value.geometry());
        const auto regime = gazekit::regime_filter_from_string(cfg_str(cfg, "regime", "both"));

        std::string out;
        bool any = false;
        for (const auto& session : ds->value.sessions()) {
            if (!gazekit::regime_matches(session.regime, regime)) continue;
            auto it = ann->value.find(session.sketch_id);
            if (it == ann->value.end()) continue;
            any = true;
            ordered_json line;
            line["sketch_id"] = session.sketch_id;
            line["subject_id"] = session.subject_id;
            line["category"] = session.category;
            line["labels"] = gazekit::assign_parts(session.fixations, it->second, snap);
            out += line.dump();
            out += '\n';
        }
        if (!any) throw gazekit::ValidationError("no session has a matching part annotation");
        *out_jsonl = dup_string(out);
    });
}

gk_status gk_similarity_report(const gk_dataset* ds, const gk_annotations* ann,
                               const char* config_json, uint64_t seed, char** out_json) {
    if (out_json != nullptr) *out_json = nullptr;
    return wrap([&] {
        require(ds != nullptr && ann != nullptr && out_json != nullptr,
                "dataset, annotations and out must be non-null");
        const auto cfg = parse_config(config_json);
        gazekit::SimilarityReportOptions options;
        options.max_snap_px = cfg_num(cfg, "max_snap_px", 0.0);
        options.n_random = cfg_int(cfg, "n_random", 100);
        options.regime = gazekit::regime_filter_from_string(cfg_str(cfg, "regime", "both"));
        options.drop_unassigned = cfg_bool(cfg, "drop_unassigned", false);
        options.threads = cfg_int(cfg, "threads", 1);
        const auto report =
            gazekit::similarity_report(ds->value, ann->value, options, gazekit::Rng(seed));
        *out_json = dup_string(gazekit::similarity_report_to_json(report));
    });
}

gk_status gk_train_hmm(const gk_dataset* ds, const gk_annotations* ann,
                       const char* labels_jsonl, const char* config_json, gk_model** out) {
    if (out != nullptr) *out = nullptr;
    return wrap([&] {
        require(ds != nullptr && out != nullptr, "dataset and out must be non-null");
        require((ann != nullptr) != (labels_jsonl != nullptr),
                "exactly one of annotations and ground-truth labels must be given");
        const auto cfg = parse_config(config_json);
        const auto& geometry = ds->value.geometry();
        const double snap = resolve_snap(cfg, geometry);
        const bool drop_unassigned = cfg_bool(cfg, "drop_unassigned", false);
        const double smoothing = cfg_num(cfg, "smoothing", 1.0);
        const auto regime = gazekit::regime_filter_from_string(cfg_str(cfg, "regime", "both"));
        const std::string category = cfg_str(cfg, "category", "");
        int n_f = cfg_int(cfg, "n_f", 0);
        if (n_f <= 0) n_f = ds->value.max_sequence_length();

        gazekit::GroundTruthLabels truth;
        if (labels_jsonl != nullptr) truth = gazekit::labels_from_jsonl(labels_jsonl);
        auto sequences = labeled_sequences(ds->value, ann != nullptr ? &ann->value : nullptr,
                                           labels_jsonl != nullptr ? &truth : nullptr, regime,
                                           snap, drop_unassigned);
        if (!category.empty()) {
            std::erase_if(sequences, [&](const gazekit::LabeledSequence& s) {
                return s.category != category;
            });
        }
        if (sequences.empty())
            throw gazekit::ValidationError("no training sequences after filtering");

        std::vector<std::string> vocabulary;
        std::vector<gazekit::TrainingSequence> training;
        training.reserve(sequences.size());
        for (const auto& seq : sequences) {
            vocabulary.insert(vocabulary.end(), seq.labels.begin(), seq.labels.end());
            training.push_back({gazekit::featurize(seq.fixations, n_f, geometry), seq.labels});
        }
        std::sort(vocabulary.begin(), vocabulary.end());
        vocabulary.erase(std::unique(vocabulary.begin(), vocabulary.end()), vocabulary.end());

        *out = new gk_model{
            gazekit::train_hmm(training, vocabulary, geometry, n_f, smoothing)};
    });
}

gk_status gk_model_save(const gk_model* m, const char* path) {
    return wrap([&] {
        require(m != nullptr && path != nullptr, "model and path must be non-null");
        gazekit::save_model(m->value, path);
    });
}

gk_status gk_model_load(const char* path, gk_model** out) {
    if (out != nullptr) *out = nullptr;
    return wrap([&] {
        require(path != nullptr && out != nullptr, "path and out must be non-null");
        *out = new gk_model{gazekit::load_model(path)};
    });
}

gk_status gk_model_to_json(const gk_model* m, char** out_json) {
    if (out_json != nullptr) *out_json = nullptr;
    return wrap([&] {
        require(m != nullptr && out_json != nullptr, "model and out must be non-null");
        *out_json = dup_string(gazekit::model_to_json(m->value));
    });
}

void gk_model_free(gk_model* m) { delete m; }

gk_status gk_predict_parts(const gk_model* model, const gk_dataset* test,
                           const gk_dataset* train, const gk_annotations* ann,
                           const char* labels_jsonl, const char* config_json, uint64_t seed,
                           char** out_json) {
    if (out_json != nullptr) *out_json = nullptr;
    return wrap([&] {
        require(test != nullptr && out_json != nullptr, "test dataset and out must be non-null");
        const auto cfg = parse_config(config_json);
        const auto decoder = gazekit::decoder_from_string(cfg_str(cfg, "decoder", "pmap"));
        const auto& geometry = test->value.geometry();

        ordered_json results = ordered_json::array();
        if (decoder == gazekit::Decoder::dtw) {
            require(train != nullptr, "dtw decoding needs a training dataset");
            require((ann != nullptr) != (labels_jsonl != nullptr),
                    "dtw decoding needs exactly one of annotations and ground-truth labels");
            const double snap = resolve_snap(cfg, train->value.geometry());
            const bool drop_unassigned = cfg_bool(cfg, "drop_unassigned", false);
            const auto regime =
                gazekit::regime_filter_from_string(cfg_str(cfg, "regime", "both"));
            gazekit::GroundTruthLabels truth;
            if (labels_jsonl != nullptr) truth = gazekit::labels_from_jsonl(labels_jsonl);
            const auto sequences = labeled_sequences(
                train->value, ann != nullptr ? &ann->value : nullptr,
                labels_jsonl != nullptr ? &truth : nullptr, regime, snap, drop_unassigned);
            if (sequences.empty())
                throw gazekit::ValidationError("no training sequences for dtw decoding");

            int n_f = test->value.max_sequence_length();
            for (const auto& seq : sequences)
                n_f = std::max(n_f, static_cast<int>(seq.labels.size()));
            std::vector<gazekit::TrainingSequence> training;
            training.reserve(sequences.size());
            for (const auto& seq : sequences)
                training.push_back(
                    {gazekit::featurize(seq.fixations, n_f, train->value.geometry()),
                     seq.labels});

            for (const auto& session : test->value.sessions()) {
                ordered_json line;
                line["sketch_id"] = session.sketch_id;
                line["subject_id"] = session.subject_id;
                line["category"] = session.category;
                line["labels"] = gazekit::decode_dtw(
                    gazekit::featurize(session.fixations, n_f, geometry), training);
                results.push_back(std::move(line));
            }
        } else {
            require(model != nullptr, "this decoder needs a trained model");
            const auto& hmm = model->value;
            if (hmm.geometry.width_px != geometry.width_px ||
                hmm.geometry.height_px != geometry.height_px ||
                hmm.geometry.pixels_per_degree != geometry.pixels_per_degree)
                throw gazekit::ValidationError(
                    "test dataset geometry differs from the model's");
            const gazekit::Rng root(seed);
            for (const auto& session : test->value.sessions()) {
                std::vector<std::string> labels;
                if (decoder == gazekit::Decoder::random) {
                    auto rng = root.derive("predict:" + session.sketch_id + ":" +
                                           session.subject_id);
                    for (std::size_t i = 0; i < session.fixations.size(); ++i)
                        labels.push_back(hmm.states[rng.next_below(hmm.states.size())]);
                } else {
                    const auto features =
                        gazekit::featurize(session.fixations, hmm.n_f, geometry);
                    labels = decoder == gazekit::Decoder::pmap
                                 ? gazekit::decode_pmap(hmm, features)
                                 : gazekit::decode_viterbi(hmm, features);
                }
                ordered_json line;
                line["sketch_id"] = session.sketch_id;
                line["subject_id"] = session.subject_id;
                line["category"] = session.category;
                line["labels"] = std::move(labels);
                results.push_back(std::move(line));
            }
        }
        ordered_json report;
        report["decoder"] = gazekit::to_string(decoder);
        report["n_sequences"] = results.size();
        report["results"] = std::move(results);
        *out_json = dup_string(report.dump(2) + "\n");
    });
}

gk_status gk_evaluate_parts(const gk_dataset* ds, const gk_annotations* ann,
                            const char* labels_jsonl, const char* config_json, uint64_t seed,
                            char** out_json) {
    if (out_json != nullptr) *out_json = nullptr;
    return wrap([&] {
        require(ds != nullptr && out_json != nullptr, "dataset and out must be non-null");
        require((ann != nullptr) != (labels_jsonl != nullptr),
                "exactly one of annotations and ground-truth labels must be given");
        const auto cfg = parse_config(config_json);
        gazekit::PartEvalOptions options;
        options.train_frac = cfg_num(cfg, "train_frac", 0.6);
        options.trials = cfg_int(cfg, "trials", 10);
        options.k_augment = cfg_int(cfg, "k_augment", 50);
        options.max_dev_deg = cfg_num(cfg, "max_dev_deg", 1.0);
        options.smoothing = cfg_num(cfg, "smoothing", 1.0);
        options.max_snap_px = cfg_num(cfg, "max_snap_px", 0.0);
        options.drop_unassigned = cfg_bool(cfg, "drop_unassigned", false);
        options.regime = gazekit::regime_filter_from_string(cfg_str(cfg, "regime", "both"));
        options.threads = cfg_int(cfg, "threads", 1);
        if (auto it = cfg.find("decoders"); it != cfg.end() && !it->is_null()) {
            if (!it->is_array())
                throw gazekit::InvalidArgument("config key 'decoders' must be an array");
            options.decoders.clear();
            for (const auto& d : *it)
                options.decoders.push_back(
                    gazekit::decoder_from_string(d.get<std::string>()));
        }
        const gazekit::Rng rng(seed);
        gazekit::PartEvalReport report;
        if (ann != nullptr) {
            report = gazekit::evaluate_part_prediction(ds->value, ann->value, options, rng);
        } else {
            const auto truth = gazekit::labels_from_jsonl(labels_jsonl);
            report = gazekit::evaluate_with_labels(ds->value, truth, options, rng);
        }
        *out_json = dup_string(gazekit::part_eval_report_to_json(report));
    });
}

}  // extern "C"
