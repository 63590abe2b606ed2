#include "pointseg/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include <CLI11.hpp>
#include <json.hpp>

#include "pointseg/io.hpp"
#include "pointseg/parallel.hpp"

namespace pointseg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers can be rejected.
class Section {
public:
    Section(const json& node, std::string prefix) : node_(node), prefix_(std::move(prefix)) {
        if (!node_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
    }

    std::string field(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    template <typename T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        const auto it = node_.find(key);
        if (it == node_.end()) return;
        const json& v = *it;
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_unsigned()) {
                    out = v.get<T>();
                } else {
                    throw ConfigError(field(key), "expected a non-negative integer");
                }
            } else {
                const auto x = v.get<std::int64_t>();
                if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
                    throw ConfigError(field(key), "integer out of range");
                }
                out = static_cast<T>(x);
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(field(key), "expected a number");
            out = v.get<T>();
        } else {
            if (!v.is_string()) throw ConfigError(field(key), "expected a string");
            out = v.get<std::string>();
        }
    }

    void read_rgb(const std::string& key, Rgb& out) {
        seen_.insert(key);
        const auto it = node_.find(key);
        if (it == node_.end()) return;
        if (!it->is_array() || it->size() != 3) throw ConfigError(field(key), "expected [r, g, b]");
        std::uint8_t c[3];
        for (int i = 0; i < 3; ++i) {
            const json& v = (*it)[i];
            if (!v.is_number_integer() || v.get<int>() < 0 || v.get<int>() > 255) {
                throw ConfigError(field(key), "channel values must be integers in [0, 255]");
            }
            c[i] = static_cast<std::uint8_t>(v.get<int>());
        }
        out = {c[0], c[1], c[2]};
    }

    void read_weights(const std::string& key, std::array<double, 3>& out) {
        seen_.insert(key);
        const auto it = node_.find(key);
        if (it == node_.end()) return;
        if (!it->is_array() || it->size() != 3) throw ConfigError(field(key), "expected three numbers");
        for (int i = 0; i < 3; ++i) {
            if (!(*it)[i].is_number()) throw ConfigError(field(key), "expected three numbers");
            out[static_cast<std::size_t>(i)] = (*it)[i].get<double>();
        }
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        const auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.count(key) && !(key.size() > 0 && key[0] == '_')) throw ConfigError(field(key), "unknown key");
        }
    }

private:
    const json& node_;
    std::string prefix_;
    std::set<std::string> seen_;
};

json rgb_json(const Rgb& c) { return json::array({c.r, c.g, c.b}); }

json synth_to_json(const SynthSpec& s, int images) {
    return {
        {"images", images},
        {"height", s.dims.height},
        {"width", s.dims.width},
        {"min_cells", s.min_cells},
        {"max_cells", s.max_cells},
        {"min_radius", s.min_radius},
        {"max_radius", s.max_radius},
        {"min_eccentricity", s.min_eccentricity},
        {"max_eccentricity", s.max_eccentricity},
        {"strong_positive", rgb_json(s.strong_positive)},
        {"weak_positive", rgb_json(s.weak_positive)},
        {"negative", rgb_json(s.negative)},
        {"background", rgb_json(s.background)},
        {"class_weights", s.class_weights},
        {"contrast_jitter", s.contrast_jitter},
        {"min_contrast", s.min_contrast},
        {"noise_sigma", s.noise_sigma},
        {"max_retries", s.max_retries},
    };
}

void synth_from_json(const json& node, SynthSpec& s, int& images) {
    Section sec(node, "synth");
    sec.read("images", images);
    sec.read("height", s.dims.height);
    sec.read("width", s.dims.width);
    sec.read("min_cells", s.min_cells);
    sec.read("max_cells", s.max_cells);
    sec.read("min_radius", s.min_radius);
    sec.read("max_radius", s.max_radius);
    sec.read("min_eccentricity", s.min_eccentricity);
    sec.read("max_eccentricity", s.max_eccentricity);
    sec.read_rgb("strong_positive", s.strong_positive);
    sec.read_rgb("weak_positive", s.weak_positive);
    sec.read_rgb("negative", s.negative);
    sec.read_rgb("background", s.background);
    sec.read_weights("class_weights", s.class_weights);
    sec.read("contrast_jitter", s.contrast_jitter);
    sec.read("min_contrast", s.min_contrast);
    sec.read("noise_sigma", s.noise_sigma);
    sec.read("max_retries", s.max_retries);
    sec.finish();
}

json config_json(const RunConfig& c) {
    return {
        {"seed", c.seed},
        {"threads", c.threads},
        {"synth", synth_to_json(c.synth, c.images)},
        {"encode",
         {{"dot_radius", c.encode.dot_radius},
          {"distance_weight", c.encode.distance_weight},
          {"repel_alpha", c.encode.repel.alpha},
          {"repel_radius", c.encode.repel.radius},
          {"filter_repel", c.encode.filter_repel}}},
        {"train",
         {{"learning_rate", c.train.learning_rate},
          {"momentum", c.train.momentum},
          {"batch_size", c.train.batch_size},
          {"epochs", c.train.epochs},
          {"mode", to_string(c.mode)}}},
        {"post", {{"min_distance", c.post.min_distance}, {"threshold", c.post.threshold}}},
        {"predict", {{"split", c.predict_split}}},
        {"eval", {{"match_radius", c.match_radius}}},
    };
}

RunConfig config_from_node(const json& root) {
    RunConfig c;
    Section top(root, "");
    top.read("seed", c.seed);
    top.read("threads", c.threads);
    if (const json* n = top.child("synth")) synth_from_json(*n, c.synth, c.images);
    if (const json* n = top.child("encode")) {
        Section s(*n, "encode");
        s.read("dot_radius", c.encode.dot_radius);
        s.read("distance_weight", c.encode.distance_weight);
        s.read("repel_alpha", c.encode.repel.alpha);
        s.read("repel_radius", c.encode.repel.radius);
        s.read("filter_repel", c.encode.filter_repel);
        s.finish();
    }
    if (const json* n = top.child("train")) {
        Section s(*n, "train");
        s.read("learning_rate", c.train.learning_rate);
        s.read("momentum", c.train.momentum);
        s.read("batch_size", c.train.batch_size);
        s.read("epochs", c.train.epochs);
        std::string mode = to_string(c.mode);
        s.read("mode", mode);
        try {
            c.mode = train_mode_from_string(mode);
        } catch (const Error& e) {
            throw ConfigError("train.mode", e.what());
        }
        s.finish();
    }
    if (const json* n = top.child("post")) {
        Section s(*n, "post");
        s.read("min_distance", c.post.min_distance);
        s.read("threshold", c.post.threshold);
        s.finish();
    }
    if (const json* n = top.child("predict")) {
        Section s(*n, "predict");
        s.read("split", c.predict_split);
        s.finish();
    }
    if (const json* n = top.child("eval")) {
        Section s(*n, "eval");
        s.read("match_radius", c.match_radius);
        s.finish();
    }
    top.finish();
    c.synth.seed = c.seed;
    c.train.seed = c.seed;
    c.train.threads = c.threads;
    c.validate();
    return c;
}

// Wraps a component validator so its message is attributed to a config section.
template <typename Fn>
void check_section(const std::string& section, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(section, e.what());
    }
}

json parse_json_file(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("invalid JSON: ") + e.what());
    } catch (const Error& e) {
        throw ConfigError(path, e.what());
    }
}

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(10) << v;
    return out.str();
}

// ---- dataset directory ----------------------------------------------------

struct Entry {
    Sample sample;
    Split split = Split::Train;
};

std::vector<Entry> load_manifest(const fs::path& dir) {
    const json m = json::parse(read_text((dir / "manifest.json").string()));
    std::vector<Entry> out;
    for (const json& item : m.at("images")) {
        Entry e;
        e.sample.id = item.at("id").get<std::string>();
        e.sample.regime = item.value("regime", "");
        e.split = split_from_string(item.at("split").get<std::string>());
        e.sample.image = read_png_rgb((dir / item.at("image").get<std::string>()).string());
        const std::string points_path = (dir / item.at("points").get<std::string>()).string();
        e.sample.points = parse_points_csv(read_text(points_path), e.sample.image.dims(), points_path);
        if (item.contains("instances")) {
            e.sample.instances = read_instances((dir / item.at("instances").get<std::string>()).string());
        }
        out.push_back(std::move(e));
    }
    return out;
}

bool split_selected(const std::string& which, Split s) {
    if (which == "all") return true;
    if (which == "heldout") return s != Split::Train;
    return to_string(s) == which;
}

void write_json(const fs::path& path, const json& j) { write_text(path.string(), j.dump(2) + "\n"); }

// ---- stages ---------------------------------------------------------------

void stage_synth(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    fs::create_directories(out / "images");
    fs::create_directories(out / "points");
    fs::create_directories(out / "instances");
    std::vector<Sample> samples = generate_regime_dataset(cfg.synth, cfg.images);
    const std::vector<Split> splits = assign_splits(samples, cfg.seed);
    json items = json::array();
    int counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        const std::string image = "images/" + s.id + ".png";
        const std::string points = "points/" + s.id + ".csv";
        const std::string instances = "instances/" + s.id + ".png";
        write_png_rgb((out / image).string(), s.image);
        write_text((out / points).string(), "x,y,class\n" + points_to_csv(s.points));
        write_instances((out / instances).string(), *s.instances);
        items.push_back({{"id", s.id},
                         {"image", image},
                         {"points", points},
                         {"instances", instances},
                         {"split", to_string(splits[i])},
                         {"regime", s.regime}});
        ++counts[static_cast<int>(splits[i])];
    }
    json spec = synth_to_json(cfg.synth, cfg.images);
    spec["seed"] = cfg.seed;
    write_json(out / "manifest.json", {{"spec", spec}, {"images", items}});
    log << "[synth] " << samples.size() << " images (train " << counts[0] << ", val " << counts[1] << ", test "
        << counts[2] << ")\n";
}

std::string target_path(const fs::path& dir, const std::string& id, const char* kind) {
    return (dir / (id + "_" + kind + ".png")).string();
}

void stage_encode(const RunConfig& cfg, const fs::path& data, const fs::path& out, std::ostream& log) {
    fs::create_directories(out);
    const std::vector<Entry> entries = load_manifest(data);
    std::vector<std::vector<ClusterDiagnostic>> fallbacks(entries.size());
    parallel_for(entries.size(), cfg.threads, [&](std::size_t i) {
        const Sample& s = entries[i].sample;
        const EncodedTargets t = encode_sample(s, cfg.encode);
        write_label_map(target_path(out, s.id, "voronoi"), t.voronoi.target);
        write_label_map(target_path(out, s.id, "cluster"), t.cluster.target);
        write_repel_map(target_path(out, s.id, "repel"), t.repel, cfg.encode.repel);
        write_repel_map(target_path(out, s.id, "filtered"), t.filtered, cfg.encode.repel);
        fallbacks[i] = t.cluster.fallbacks;
    });
    json report = json::array();
    std::size_t total = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        json f = json::array();
        for (const ClusterDiagnostic& d : fallbacks[i]) f.push_back({{"region", d.region}, {"reason", d.reason}});
        total += fallbacks[i].size();
        report.push_back({{"id", entries[i].sample.id}, {"fallbacks", f}});
    }
    write_json(out / "encode.json", {{"images", report}});
    log << "[encode] " << entries.size() << " images, " << total << " clustering fallbacks\n";
}

void stage_train(const RunConfig& cfg, const fs::path& data, const fs::path& targets, const fs::path& out,
                 std::ostream& log) {
    fs::create_directories(out);
    std::vector<Sample> train_samples;
    for (Entry& e : load_manifest(data)) {
        if (e.split == Split::Train) train_samples.push_back(std::move(e.sample));
    }
    if (train_samples.empty()) throw Error("no training images in " + data.string());
    const Normalized norm = normalize(train_samples);
    std::vector<TrainingExample> examples;
    for (std::size_t i = 0; i < train_samples.size(); ++i) {
        const std::string& id = train_samples[i].id;
        TrainingTargets t;
        t.voronoi = read_label_map(target_path(targets, id, "voronoi"));
        t.cluster = read_label_map(target_path(targets, id, "cluster"));
        t.repel = read_repel_map(target_path(targets, id, cfg.encode.filter_repel ? "filtered" : "repel"));
        examples.push_back({norm.images[i], std::move(t)});
    }
    log << "[train] " << examples.size() << " images, mode " << to_string(cfg.mode) << ", " << cfg.train.epochs
        << " epochs\n";
    const TrainResult result = train(cfg.train, examples, cfg.mode, [&](const EpochSummary& s) {
        log << "[train] epoch " << s.epoch << "/" << cfg.train.epochs;
        for (int k = 0; k < 3; ++k) {
            log << " " << to_string(static_cast<LossKind>(k)) << "=" << fmt(s.mean_loss[static_cast<std::size_t>(k)]);
        }
        log << "\n";
    });
    write_text((out / "params.json").string(), params_to_json(result.params));
    write_text((out / "norm.json").string(), stats_to_json(norm.stats));
    std::ostringstream iters;
    iters << "iteration,epoch,kind,value\n";
    for (const IterationRecord& r : result.log.iterations) {
        iters << r.iteration << "," << r.epoch << "," << r.kind << "," << fmt(r.value) << "\n";
    }
    write_text((out / "loss_log.csv").string(), iters.str());
    std::ostringstream epochs;
    epochs << "epoch,VORONOI,REPEL,CLUSTER\n";
    for (const EpochSummary& s : result.log.epochs) {
        epochs << s.epoch << "," << fmt(s.mean_loss[0]) << "," << fmt(s.mean_loss[1]) << "," << fmt(s.mean_loss[2])
               << "\n";
    }
    write_text((out / "epochs.csv").string(), epochs.str());
}

Grid<std::uint16_t> probability_png(const ProbabilityMap& prob) {
    Grid<std::uint16_t> g(prob.dims());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = static_cast<std::uint16_t>(std::lround(std::clamp(prob.nuclei[i], 0.0, 1.0) * 65535.0));
    }
    return g;
}

void stage_predict(const RunConfig& cfg, const fs::path& data, const fs::path& model, const fs::path& out,
                   std::ostream& log) {
    fs::create_directories(out);
    const ModelParams params = params_from_json(read_text((model / "params.json").string()));
    const NormStats stats = stats_from_json(read_text((model / "norm.json").string()));
    std::vector<Entry> entries;
    for (Entry& e : load_manifest(data)) {
        if (split_selected(cfg.predict_split, e.split)) entries.push_back(std::move(e));
    }
    parallel_for(entries.size(), cfg.threads, [&](std::size_t i) {
        const Sample& s = entries[i].sample;
        const Prediction p = predict(params, apply_normalization(s.image, stats), cfg.post);
        const std::string base = (out / s.id).string();
        write_png_gray16(base + "_prob.png", probability_png(p.prob));
        Grid<std::uint8_t> mask(p.mask.dims());
        for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = p.mask[k] ? 255 : 0;
        write_png_gray8(base + "_mask.png", mask);
        write_instances(base + "_instances.png", p.instances);
        write_text(base + "_detections.csv", detections_to_csv(p.detections));
        write_png_rgb(base + "_overlay.png", overlay(s.image, p.instances, p.detections));
    });
    json ids = json::array();
    for (const Entry& e : entries) ids.push_back(e.sample.id);
    write_json(out / "predictions.json", {{"split", cfg.predict_split}, {"ids", ids}});
    log << "[predict] " << entries.size() << " images (" << cfg.predict_split << ")\n";
}

DetectionSet parse_detections(const std::string& text, const std::string& source) {
    DetectionSet out;
    std::istringstream in(text);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (row == 1 || line.empty()) continue;
        Detection d;
        char c1 = 0, c2 = 0;
        std::istringstream ls(line);
        if (!(ls >> d.x >> c1 >> d.y >> c2 >> d.score) || c1 != ',' || c2 != ',') {
            throw Error(source + " row " + std::to_string(row) + ": malformed detection");
        }
        out.push_back(d);
    }
    return out;
}

json score_or_null(double v, bool available) { return available ? json(v) : json(nullptr); }

void stage_eval(const RunConfig& cfg, const fs::path& data, const fs::path& pred, const fs::path& out,
                std::ostream& log) {
    fs::create_directories(out);
    const json listing = json::parse(read_text((pred / "predictions.json").string()));
    std::map<std::string, Entry> by_id;
    for (Entry& e : load_manifest(data)) by_id.emplace(e.sample.id, std::move(e));
    std::vector<ImageEval> evals;
    json per_image = json::array();
    bool have_masks = true;
    for (const json& idj : listing.at("ids")) {
        const std::string id = idj.get<std::string>();
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw Error("prediction " + id + " has no entry in the dataset manifest");
        const Sample& truth = it->second.sample;
        const std::string base = (pred / id).string();
        Prediction p;
        const Grid<std::uint8_t> mask = read_png_gray8(base + "_mask.png");
        p.mask = BinaryMask(mask.dims(), 0);
        for (std::size_t k = 0; k < mask.size(); ++k) p.mask[k] = mask[k] ? 1 : 0;
        p.instances = read_instances(base + "_instances.png");
        p.detections = parse_detections(read_text(base + "_detections.csv"), base + "_detections.csv");
        const ImageEval e = evaluate_image(p, truth, cfg.match_radius);
        const bool seg = truth.instances.has_value();
        have_masks = have_masks && seg;
        per_image.push_back({{"id", id},
                             {"ACC", score_or_null(e.pixel.acc, seg)},
                             {"F1", score_or_null(e.pixel.f1.value, seg)},
                             {"Dice", score_or_null(e.dice.value, seg)},
                             {"AJI", score_or_null(e.aji.value, seg)},
                             {"Precision", e.detection.precision},
                             {"Recall", e.detection.recall},
                             {"TP", e.detection.tp},
                             {"FP", e.detection.fp},
                             {"FN", e.detection.fn},
                             {"true_count", e.true_count},
                             {"predicted_count", e.predicted_count}});
        evals.push_back(e);
    }
    if (evals.empty()) throw Error("no predictions to evaluate");
    const EvalSummary s = summarize(std::move(evals));
    const json report = {
        {"ACC", score_or_null(s.seg.acc, have_masks)},
        {"F1", score_or_null(s.seg.f1, have_masks)},
        {"Dice", score_or_null(s.seg.object_dice, have_masks)},
        {"AJI", score_or_null(s.seg.aji, have_masks)},
        {"Precision", s.det.precision},
        {"Recall", s.det.recall},
        {"CCC", score_or_null(s.det.ccc, s.images.size() >= 2)},
        {"CCC_degenerate", s.ccc_degenerate},
        {"TP", s.det.tp},
        {"FP", s.det.fp},
        {"FN", s.det.fn},
        {"images", s.images.size()},
        {"match_radius", cfg.match_radius},
        {"per_image", per_image},
    };
    write_json(out / "report.json", report);
    log << "[eval] ACC " << fmt(s.seg.acc) << " F1 " << fmt(s.seg.f1) << " Dice " << fmt(s.seg.object_dice) << " AJI "
        << fmt(s.seg.aji) << " Precision " << fmt(s.det.precision) << " Recall " << fmt(s.det.recall) << " CCC "
        << fmt(s.det.ccc) << "\n";
}

// ---- command line ---------------------------------------------------------

void apply_override(json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set", "expected key.path=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("--set", "empty key in '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        json& next = (*node)[key];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) throw ConfigError(path.substr(0, dot), "not an object");
        node = &next;
        start = dot + 1;
    }
}

void report_error(std::ostream& log, const std::string& kind, const std::string& field, const std::string& message) {
    json j = {{"error", kind}, {"message", message}};
    if (!field.empty()) j["field"] = field;
    log << j.dump() << "\n";
}

struct Inputs {
    std::string spec, data, targets, model, pred, out;
};

}  // namespace

void RunConfig::validate() const {
    if (threads < 1) throw ConfigError("threads", "must be >= 1");
    if (images < 1) throw ConfigError("synth.images", "must be >= 1");
    check_section("synth", [&] { synth.validate(); });
    if (!(encode.dot_radius > 0.0)) throw ConfigError("encode.dot_radius", "must be > 0");
    if (!(encode.distance_weight >= 0.0)) throw ConfigError("encode.distance_weight", "must be >= 0");
    if (!(encode.repel.alpha > 0.0)) throw ConfigError("encode.repel_alpha", "must be > 0");
    if (!(encode.repel.radius > 0.0)) throw ConfigError("encode.repel_radius", "must be > 0");
    if (!(train.learning_rate >= 0.0)) throw ConfigError("train.learning_rate", "must be >= 0");
    if (!(train.momentum >= 0.0 && train.momentum < 1.0)) throw ConfigError("train.momentum", "must be in [0, 1)");
    if (train.batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (train.epochs < 0) throw ConfigError("train.epochs", "must be >= 0");
    if (post.min_distance < 1) throw ConfigError("post.min_distance", "must be >= 1");
    if (!(post.threshold >= 0.0 && post.threshold <= 1.0)) throw ConfigError("post.threshold", "must be in [0, 1]");
    static const std::set<std::string> splits{"train", "val", "test", "heldout", "all"};
    if (!splits.count(predict_split)) throw ConfigError("predict.split", "must be one of train, val, test, heldout, all");
    if (!(match_radius > 0.0)) throw ConfigError("eval.match_radius", "must be > 0");
}

std::string to_string(TrainMode mode) { return mode == TrainMode::Scheduler ? "SCHEDULER" : "NAIVE_SUM"; }

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "SCHEDULER") return TrainMode::Scheduler;
    if (s == "NAIVE_SUM") return TrainMode::NaiveSum;
    throw Error("unknown training mode '" + s + "' (expected SCHEDULER or NAIVE_SUM)");
}

RunConfig config_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
    }
    return config_from_node(root);
}

std::string config_to_json(const RunConfig& config) { return config_json(config).dump(2) + "\n"; }

int run_cli(const std::vector<std::string>& args, std::ostream& log) {
    CLI::App app{"Nuclei segmentation and detection trained from point annotations", "pointseg"};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    int threads = 1;
    app.add_option("--config", config_path, "JSON config file (or a previous run.json)");
    app.add_option("--set", overrides, "Override a config value, e.g. --set train.epochs=5");
    auto* seed_opt = app.add_option("--seed", seed, "Seed for data generation, splits and training");
    auto* threads_opt = app.add_option("--threads", threads, "Worker threads for per-image stages and training");

    Inputs in;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with a manifest");
    synth->add_option("--spec", in.spec, "JSON file with the synth section");
    auto* encode = app.add_subcommand("encode", "Write Voronoi, cluster and repel targets per image");
    encode->add_option("--data", in.data, "Dataset directory");
    auto* train_cmd = app.add_subcommand("train", "Train the network on the train split");
    train_cmd->add_option("--data", in.data, "Dataset directory");
    train_cmd->add_option("--targets", in.targets, "Directory written by encode");
    auto* predict_cmd = app.add_subcommand("predict", "Run the trained network and post-processing");
    predict_cmd->add_option("--data", in.data, "Dataset directory");
    predict_cmd->add_option("--model", in.model, "Directory written by train");
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
    eval_cmd->add_option("--data", in.data, "Dataset directory");
    eval_cmd->add_option("--pred", in.pred, "Directory written by predict");
    auto* pipeline_cmd = app.add_subcommand("pipeline", "synth, encode, train, predict and eval in one run");
    for (CLI::App* sub : {synth, encode, train_cmd, predict_cmd, eval_cmd, pipeline_cmd}) {
        sub->add_option("--out", in.out, "Output directory");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        report_error(log, "usage", "", e.what());
        return 2;
    }
    const CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();

    RunConfig cfg;
    json inputs_json = json::object();
    try {
        json root = json::object();
        if (!config_path.empty()) {
            root = parse_json_file(config_path);
            // A run.json nests the resolved config next to the inputs it was run with.
            if (root.is_object() && root.contains("command") && root.contains("config")) {
                if (root.contains("inputs") && root["inputs"].is_object()) inputs_json = root["inputs"];
                root = json(root["config"]);
            }
        }
        if (!root.is_object()) throw ConfigError("<root>", "expected an object");
        if (!in.spec.empty()) {
            json spec = parse_json_file(in.spec);
            root["synth"] = spec.is_object() && spec.contains("synth") ? spec["synth"] : spec;
        }
        for (const std::string& o : overrides) apply_override(root, o);
        if (seed_opt->count() > 0) root["seed"] = seed;
        if (threads_opt->count() > 0) root["threads"] = threads;
        cfg = config_from_node(root);

        auto resolve = [&](std::string& value, const char* key, const char* flag) {
            if (value.empty() && inputs_json.contains(key) && inputs_json[key].is_string()) {
                value = inputs_json[key].get<std::string>();
            }
            if (value.empty()) throw ConfigError(flag, "required for " + command);
        };
        if (command == "encode" || command == "train" || command == "predict" || command == "eval") {
            resolve(in.data, "data", "--data");
        }
        if (command == "train") resolve(in.targets, "targets", "--targets");
        if (command == "predict") resolve(in.model, "model", "--model");
        if (command == "eval") resolve(in.pred, "pred", "--pred");
        if (in.out.empty()) throw ConfigError("--out", "required");
    } catch (const ConfigError& e) {
        report_error(log, "config", e.field(), e.message());
        return 2;
    }

    json inputs = json::object();
    if (!in.data.empty()) inputs["data"] = in.data;
    if (!in.targets.empty()) inputs["targets"] = in.targets;
    if (!in.model.empty()) inputs["model"] = in.model;
    if (!in.pred.empty()) inputs["pred"] = in.pred;

    try {
        const fs::path out(in.out);
        fs::create_directories(out);
        write_json(out / "run.json", {{"command", command}, {"config", config_json(cfg)}, {"inputs", inputs}});
        if (command == "synth") {
            stage_synth(cfg, out, log);
        } else if (command == "encode") {
            stage_encode(cfg, in.data, out, log);
        } else if (command == "train") {
            stage_train(cfg, in.data, in.targets, out, log);
        } else if (command == "predict") {
            stage_predict(cfg, in.data, in.model, out, log);
        } else if (command == "eval") {
            stage_eval(cfg, in.data, in.pred, out, log);
        } else {
            stage_synth(cfg, out / "data", log);
            stage_encode(cfg, out / "data", out / "targets", log);
            stage_train(cfg, out / "data", out / "targets", out / "model", log);
            stage_predict(cfg, out / "data", out / "model", out / "pred", log);
            stage_eval(cfg, out / "data", out / "pred", out / "eval", log);
        }
    } catch (const std::exception& e) {
        report_error(log, "runtime", "", e.what());
        return 1;
    }
    return 0;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cerr);
}

}  // namespace pointseg::cli
