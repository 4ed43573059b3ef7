// Command-line front end: scene generation, training, registration,
// evaluation, and report rendering over the library. stdout carries only
// machine-readable results (JSON, or the requested table for `report`);
// progress and diagnostics go to stderr. Exit codes: 0 success, 1 bad
// input/config, 2 degenerate computation.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pcreg/checkpoint.hpp"
#include "pcreg/evaluate.hpp"
#include "pcreg/manifest.hpp"
#include "pcreg/metrics.hpp"
#include "pcreg/pipeline.hpp"
#include "pcreg/ply.hpp"
#include "pcreg/scene_gen.hpp"
#include "pcreg/train.hpp"

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr const char* kUsage = R"(usage: pcreg <subcommand> [--config FILE] [--key value ...]

subcommands:
  gen-data   --out DIR --pairs N [--seed S] [--split NAME] [--preset default|large-motion]
             [--n-master N] [--noise-sigma M] [--overlap-target F]
             [--rotation-max-deg D] [--translation-max M]
             Write PLY pairs plus manifest.jsonl; print summary JSON.
  train      --manifest FILE --iters N [--out DIR] [--split NAME] [--variant byoc|byoc-geo|byoc-rot]
             [--batch-size N] [--lr F] [--beta1 F] [--beta2 F]
             [--lambda-vis F] [--lambda-geo F] [--lambda-v2g F]
             [--k N] [--voxel M] [--neighbors N] [--threads N] [--seed S]
             [--checkpoint-every N] [--resume CKPT] [--val-split NAME] [--validate-every N]
             Write checkpoint.ckpt + train_log.jsonl; print summary JSON.
  register   CLOUD0.ply CLOUD1.ply [--checkpoint CKPT] [--modality visual|geometric]
             [--mode procrustes|randomized|ransac] [--voxel M] [--neighbors N] [--k N]
             [--seed S] [--subsets N] [--subset-size N]
             [--ransac-iterations N] [--ransac-threshold M] [--out ALIGNED.ply]
             Print the fitted transform as JSON; exit 2 if the fit degenerates.
  evaluate   --manifest FILE [--split NAME] [--checkpoint CKPT | --features random|fpfh]
             [--modality visual|geometric] [--estimator procrustes|randomized|ransac|icp-p2p|icp-p2pl]
             [--voxel M] [--neighbors N] [--k N] [--seed S] [--workers N]
             [--tau1 F] [--tau2 F] [--subsets N] [--subset-size N]
             [--ransac-iterations N] [--ransac-threshold M] [--icp-iters N] [--icp-tol F]
             [--out REPORT.json]
             Print the evaluation JSON; render tables to stderr.
  report     REPORT.json
             Render a saved evaluation as text tables.

A config file holds one `key = value` per line ('#' starts a comment) using
the same names as the flags; flags override file values override defaults.
)";

struct Args {
    std::vector<std::string> positional;
    std::map<std::string, std::string> values;
};

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string canonical_key(std::string key) {
    if (key == "iters") return "iterations";
    return key;
}

std::map<std::string, std::string> parse_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trimmed(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path.string() + ":" + std::to_string(line_no) +
                             ": expected key = value");
        const std::string key = trimmed(line.substr(0, eq));
        const std::string value = trimmed(line.substr(eq + 1));
        if (key.empty())
            throw UsageError(path.string() + ":" + std::to_string(line_no) + ": empty key");
        kv[canonical_key(key)] = value;
    }
    return kv;
}

/// Flags override config-file values. Unknown flags are errors; unknown
/// config-file keys are skipped with a note so one file can serve several
/// subcommands.
Args parse_args(int argc, char** argv, const std::set<std::string>& known) {
    std::map<std::string, std::string> flags;
    Args args;
    for (int i = 2; i < argc; ++i) {
        const std::string tok = argv[i];
        if (tok.rfind("--", 0) != 0) {
            args.positional.push_back(tok);
            continue;
        }
        std::string key = tok.substr(2), value;
        if (const auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (key == "help") {
                std::cout << kUsage;
                std::exit(0);
            }
            if (i + 1 >= argc) throw UsageError("flag --" + key + " needs a value");
            value = argv[++i];
        }
        key = canonical_key(key);
        if (key != "config" && !known.count(key))
            throw UsageError("unknown flag --" + key + " (see pcreg --help)");
        flags[key] = value;
    }
    if (const auto it = flags.find("config"); it != flags.end()) {
        for (const auto& [k, v] : parse_config_file(it->second)) {
            if (!known.count(k)) {
                std::cerr << "pcreg: config key '" << k << "' not used by this subcommand\n";
                continue;
            }
            args.values[k] = v;
        }
        flags.erase(it);
    }
    for (const auto& [k, v] : flags) args.values[k] = v;
    return args;
}

bool has(const Args& a, const std::string& key) { return a.values.count(key) > 0; }

std::string get(const Args& a, const std::string& key, const std::string& fallback) {
    const auto it = a.values.find(key);
    return it == a.values.end() ? fallback : it->second;
}

std::string require(const Args& a, const std::string& key) {
    const auto it = a.values.find(key);
    if (it == a.values.end()) throw UsageError("missing required --" + key);
    return it->second;
}

double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("--" + key + ": expected a number, got '" + s + "'");
}

std::int64_t parse_i64(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(s, &pos);
        if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("--" + key + ": expected an integer, got '" + s + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
    try {
        if (!s.empty() && s[0] != '-') {
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(s, &pos);
            if (pos == s.size()) return v;
        }
    } catch (const std::exception&) {
    }
    throw UsageError("--" + key + ": expected a non-negative integer, got '" + s + "'");
}

void override_double(const Args& a, const std::string& key, double& field) {
    if (has(a, key)) field = parse_double(key, a.values.at(key));
}

void override_int(const Args& a, const std::string& key, int& field) {
    if (has(a, key)) field = static_cast<int>(parse_i64(key, a.values.at(key)));
}

void override_u64(const Args& a, const std::string& key, std::uint64_t& field) {
    if (has(a, key)) field = parse_u64(key, a.values.at(key));
}

pcreg::Modality parse_modality(const std::string& s) {
    if (s == "visual") return pcreg::Modality::visual;
    if (s == "geometric") return pcreg::Modality::geometric;
    throw UsageError("--modality must be visual or geometric, got '" + s + "'");
}

const char* modality_section(pcreg::Modality m) {
    return m == pcreg::Modality::visual ? "visual" : "geometric";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- gen-data

const std::set<std::string> kGenDataKeys = {
    "out",           "pairs",        "seed",
    "split",         "preset",       "n-master",
    "noise-sigma",   "overlap-target", "rotation-max-deg",
    "translation-max"};

int cmd_gen_data(const Args& a) {
    const fs::path out = require(a, "out");
    const std::int64_t pairs = parse_i64("pairs", require(a, "pairs"));
    if (pairs < 1) throw UsageError("--pairs must be >= 1");
    const std::uint64_t seed0 = parse_u64("seed", get(a, "seed", "0"));
    const std::string split = get(a, "split", "train");

    pcreg::SceneParams params;
    const std::string preset = get(a, "preset", "default");
    if (preset == "large-motion")
        params = pcreg::SceneParams::large_motion();
    else if (preset != "default")
        throw UsageError("--preset must be default or large-motion, got '" + preset + "'");
    override_int(a, "n-master", params.n_master);
    override_double(a, "noise-sigma", params.noise_sigma);
    override_double(a, "overlap-target", params.overlap_target);
    override_double(a, "rotation-max-deg", params.rotation_max_deg);
    override_double(a, "translation-max", params.translation_max);
    params.validate();

    fs::create_directories(out);
    std::vector<pcreg::ScenePair> rows;
    double sum_rot = 0.0, sum_trans = 0.0, sum_overlap = 0.0;
    std::uint64_t seed = seed0;
    std::int64_t attempts = 0;
    const std::int64_t max_attempts = pairs * 20 + 100;
    const auto t0 = std::chrono::steady_clock::now();
    while (static_cast<std::int64_t>(rows.size()) < pairs) {
        if (attempts++ >= max_attempts)
            throw std::runtime_error("gen-data: only " + std::to_string(rows.size()) + "/" +
                                     std::to_string(pairs) + " pairs after " +
                                     std::to_string(max_attempts) + " attempts");
        try {
            const pcreg::SyntheticPair pair = pcreg::generate_scene_pair(seed, params);
            pcreg::ScenePair row;
            row.scene_id = pair.scene_id;
            row.split = split;
            row.seed = pair.seed;
            row.cloud0 = pair.scene_id + "_0.ply";
            row.cloud1 = pair.scene_id + "_1.ply";
            row.ground_truth = pair.ground_truth;
            row.overlap = pair.overlap;
            pcreg::save_ply(out / row.cloud0, pair.cloud0);
            pcreg::save_ply(out / row.cloud1, pair.cloud1);
            rows.push_back(std::move(row));
            sum_rot += pcreg::rotation_error(pair.ground_truth.rotation,
                                             Eigen::Matrix3d::Identity());
            sum_trans += pair.ground_truth.translation.norm() * 100.0;
            sum_overlap += pair.overlap;
            std::cerr << "gen-data: " << pair.scene_id << " (" << rows.size() << "/" << pairs
                      << ", overlap " << pair.overlap << ")\n";
        } catch (const pcreg::GenerationError& e) {
            std::cerr << "gen-data: seed " << seed << " skipped: " << e.what() << "\n";
        }
        ++seed;
    }
    const fs::path manifest = out / "manifest.jsonl";
    pcreg::save_manifest(manifest, rows);
    pcreg::load_manifest(manifest);  // round-trip self-check
    std::cerr << "gen-data: wrote " << manifest.string() << " in " << seconds_since(t0)
              << " s\n";

    nlohmann::json j;
    j["pairs"] = rows.size();
    j["attempts"] = attempts;
    j["split"] = split;
    j["manifest"] = manifest.string();
    j["mean_rotation_deg"] = sum_rot / static_cast<double>(pairs);
    j["mean_translation_cm"] = sum_trans / static_cast<double>(pairs);
    j["mean_overlap"] = sum_overlap / static_cast<double>(pairs);
    std::cout << j.dump() << "\n";
    return 0;
}

// ------------------------------------------------------------------- train

const std::set<std::string> kTrainKeys = {
    "manifest",   "out",        "split",      "val-split",  "validate-every",
    "iterations", "batch-size", "variant",    "lr",         "beta1",
    "beta2",      "lambda-vis", "lambda-geo", "lambda-v2g", "k",
    "voxel",      "neighbors",  "threads",    "seed",       "checkpoint-every",
    "resume"};

pcreg::TrainingPair load_training_pair(const fs::path& manifest, const pcreg::ScenePair& row) {
    pcreg::TrainingPair pair;
    pair.cloud0 = pcreg::load_ply(pcreg::resolve_cloud_path(manifest, row.cloud0));
    pair.cloud1 = pcreg::load_ply(pcreg::resolve_cloud_path(manifest, row.cloud1));
    pair.ground_truth = row.ground_truth;
    pair.scene_id = row.scene_id;
    return pair;
}

nlohmann::json config_json(const pcreg::TrainConfig& cfg) {
    nlohmann::json j;
    j["variant"] = pcreg::to_string(cfg.variant);
    j["iterations"] = cfg.iterations;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["lambda_vis"] = cfg.effective_lambda_vis();
    j["lambda_geo"] = cfg.effective_lambda_geo();
    j["lambda_v2g"] = cfg.effective_lambda_v2g();
    j["k_correspondences"] = cfg.k_correspondences;
    j["voxel_size"] = cfg.voxel_size;
    j["neighbors"] = cfg.neighbors;
    j["seed"] = cfg.seed;
    return j;
}

int cmd_train(const Args& a) {
    const fs::path manifest = require(a, "manifest");
    const fs::path out = get(a, "out", ".");
    const std::string split = get(a, "split", "train");
    const std::string val_split = get(a, "val-split", "");
    const int validate_every = static_cast<int>(parse_i64("validate-every",
                                                          get(a, "validate-every", "0")));
    if (validate_every < 0) throw UsageError("--validate-every must be >= 0");
    if (validate_every > 0 && val_split.empty())
        throw UsageError("--validate-every needs --val-split");

    pcreg::TrainConfig cfg;
    cfg.iterations = parse_i64("iterations", require(a, "iterations"));
    if (has(a, "variant")) cfg.variant = pcreg::variant_from_string(get(a, "variant", ""));
    override_int(a, "batch-size", cfg.batch_size);
    override_double(a, "lr", cfg.learning_rate);
    override_double(a, "beta1", cfg.beta1);
    override_double(a, "beta2", cfg.beta2);
    override_double(a, "lambda-vis", cfg.lambda_vis);
    override_double(a, "lambda-geo", cfg.lambda_geo);
    override_double(a, "lambda-v2g", cfg.lambda_v2g);
    override_int(a, "k", cfg.k_correspondences);
    override_double(a, "voxel", cfg.voxel_size);
    override_int(a, "neighbors", cfg.neighbors);
    override_int(a, "threads", cfg.threads);
    override_u64(a, "seed", cfg.seed);
    cfg.validate();

    std::vector<pcreg::TrainingPair> train_pairs, val_pairs;
    for (const pcreg::ScenePair& row : pcreg::load_manifest(manifest)) {
        if (row.split == split)
            train_pairs.push_back(load_training_pair(manifest, row));
        else if (!val_split.empty() && row.split == val_split)
            val_pairs.push_back(load_training_pair(manifest, row));
    }
    if (train_pairs.empty())
        throw UsageError("manifest has no rows in split '" + split + "'");
    if (!val_split.empty() && val_pairs.empty())
        throw UsageError("manifest has no rows in split '" + val_split + "'");

    pcreg::TrainState state;
    if (has(a, "resume")) {
        state = pcreg::train_state_from_checkpoint(
            pcreg::load_checkpoint(get(a, "resume", "")));
        const int geo_dim = pcreg::geometric_context_dim(cfg.neighbors);
        if (state.geometric.input_dim() != geo_dim ||
            state.visual.input_dim() != pcreg::visual_context_dim())
            throw UsageError("resume checkpoint encoders do not match --neighbors " +
                             std::to_string(cfg.neighbors));
    } else {
        state = pcreg::make_train_state(cfg);
    }

    const std::int64_t checkpoint_every =
        parse_i64("checkpoint-every", get(a, "checkpoint-every", "0"));
    if (checkpoint_every < 0) throw UsageError("--checkpoint-every must be >= 0");

    fs::create_directories(out);
    const fs::path log_path = out / "train_log.jsonl";
    const fs::path ckpt_path = out / "checkpoint.ckpt";
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot open for writing: " + log_path.string());
    std::ofstream val_log;
    if (validate_every > 0) {
        val_log.open(out / "validation.jsonl", std::ios::trunc);
        if (!val_log)
            throw std::runtime_error("cannot open for writing: " +
                                     (out / "validation.jsonl").string());
    }

    const auto t0 = std::chrono::steady_clock::now();
    double last_total = 0.0;
    while (state.iteration < cfg.iterations) {
        const pcreg::LossReport rep = pcreg::train_step(state, cfg, train_pairs);
        last_total = rep.total;
        nlohmann::json j = pcreg::to_json(rep);
        j["lambda_vis"] = cfg.effective_lambda_vis();
        j["lambda_geo"] = cfg.effective_lambda_geo();
        j["lambda_v2g"] = cfg.effective_lambda_v2g();
        if (cfg.variant == pcreg::Variant::byoc_rot) {
            // Replay the batch derivation to record the augmentation each
            // item saw; angles in degrees, [cloud0, cloud1] per slot.
            nlohmann::json rots = nlohmann::json::array();
            for (const pcreg::BatchSlot& slot :
                 pcreg::batch_slots(cfg, rep.iteration, train_pairs.size())) {
                const auto [q0, q1] = pcreg::augmentation_rotations(slot.item_seed);
                rots.push_back(
                    {pcreg::rotation_error(q0.rotation, Eigen::Matrix3d::Identity()),
                     pcreg::rotation_error(q1.rotation, Eigen::Matrix3d::Identity())});
            }
            j["augmentation_rotations_deg"] = rots;
        }
        log << j.dump() << "\n";
        if (checkpoint_every > 0 && state.iteration % checkpoint_every == 0 &&
            state.iteration < cfg.iterations)
            pcreg::save_checkpoint(
                out / ("checkpoint_" + std::to_string(state.iteration) + ".ckpt"),
                pcreg::to_checkpoint(state));
        if (validate_every > 0 && state.iteration % validate_every == 0) {
            const pcreg::ValidationRecord record =
                pcreg::validate_registration(state, cfg, val_pairs);
            val_log << pcreg::to_json(record).dump() << "\n";
            std::cerr << "train: validation at iter " << record.iteration << ": median rot "
                      << record.median_rotation_deg << " deg over " << record.evaluated
                      << " pairs\n";
        }
        std::cerr << "train: iter " << state.iteration << "/" << cfg.iterations << " total "
                  << rep.total << " used " << rep.used << " skipped " << rep.skipped << " ("
                  << seconds_since(t0) << " s)\n";
    }
    log.flush();
    if (!log) throw std::runtime_error("write failed: " + log_path.string());
    pcreg::save_checkpoint(ckpt_path, pcreg::to_checkpoint(state));

    nlohmann::json j;
    j["iterations"] = state.iteration;
    j["checkpoint"] = ckpt_path.string();
    j["log"] = log_path.string();
    j["final_total"] = last_total;
    j["train_pairs"] = train_pairs.size();
    j["config"] = config_json(cfg);
    std::cout << j.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------- register

const std::set<std::string> kRegisterKeys = {
    "checkpoint", "modality",          "mode",             "voxel",
    "neighbors",  "k",                 "seed",             "subsets",
    "subset-size", "ransac-iterations", "ransac-threshold", "out"};

int cmd_register(const Args& a) {
    if (a.positional.size() != 2)
        throw UsageError("register needs exactly two PLY paths");
    const pcreg::PointCloud c0 = pcreg::load_ply(a.positional[0]);
    const pcreg::PointCloud c1 = pcreg::load_ply(a.positional[1]);

    pcreg::RegisterOptions opts;
    opts.mode = pcreg::fit_mode_from_string(get(a, "mode", "randomized"));
    opts.modality = parse_modality(get(a, "modality", "geometric"));
    override_double(a, "voxel", opts.voxel_size);
    override_int(a, "neighbors", opts.neighbors);
    override_int(a, "k", opts.k_correspondences);
    override_u64(a, "seed", opts.seed);
    override_int(a, "subsets", opts.randomized_subsets);
    override_int(a, "subset-size", opts.randomized_subset_size);
    override_int(a, "ransac-iterations", opts.ransac_iterations);
    override_double(a, "ransac-threshold", opts.ransac_inlier_threshold);
    opts.validate();

    pcreg::EncoderParams encoder;
    if (has(a, "checkpoint")) {
        const pcreg::Checkpoint ck = pcreg::load_checkpoint(get(a, "checkpoint", ""));
        encoder = ck.params(modality_section(opts.modality));
        const int want = opts.modality == pcreg::Modality::visual
                             ? pcreg::visual_context_dim()
                             : pcreg::geometric_context_dim(opts.neighbors);
        if (encoder.input_dim() != want)
            throw UsageError("checkpoint encoder does not match --neighbors " +
                             std::to_string(opts.neighbors));
    } else {
        encoder = pcreg::random_features(opts.modality, opts.neighbors, opts.seed).encoder;
    }

    const pcreg::FitResult fit = pcreg::register_clouds(c0, c1, encoder, opts);
    std::cout << pcreg::to_json(fit).dump() << "\n";
    if (has(a, "out"))
        pcreg::save_ply(get(a, "out", ""), pcreg::apply_transform(fit.transform, c0));
    return fit.degenerate ? 2 : 0;
}

// ---------------------------------------------------------------- evaluate

const std::set<std::string> kEvaluateKeys = {
    "manifest",  "split",       "checkpoint",        "features",
    "modality",  "estimator",   "voxel",             "neighbors",
    "k",         "seed",        "workers",           "tau1",
    "tau2",      "subsets",     "subset-size",       "ransac-iterations",
    "ransac-threshold", "icp-iters", "icp-tol",      "out"};

int cmd_evaluate(const Args& a) {
    const fs::path manifest = require(a, "manifest");
    const std::string split = get(a, "split", "test");

    pcreg::EvaluateOptions opts;
    opts.estimator = pcreg::estimator_from_string(get(a, "estimator", "randomized"));
    override_double(a, "voxel", opts.voxel_size);
    override_int(a, "neighbors", opts.neighbors);
    override_int(a, "k", opts.k_correspondences);
    override_u64(a, "seed", opts.seed);
    override_int(a, "workers", opts.workers);
    override_double(a, "tau1", opts.fmr.tau1);
    override_double(a, "tau2", opts.fmr.tau2);
    override_int(a, "subsets", opts.randomized_subsets);
    override_int(a, "subset-size", opts.randomized_subset_size);
    override_int(a, "ransac-iterations", opts.ransac_iterations);
    override_double(a, "ransac-threshold", opts.ransac_inlier_threshold);
    override_int(a, "icp-iters", opts.icp_max_iters);
    override_double(a, "icp-tol", opts.icp_tol);
    opts.validate();

    const pcreg::Modality modality = parse_modality(get(a, "modality", "geometric"));
    const std::string source = get(a, "features", has(a, "checkpoint") ? "checkpoint" : "random");
    if (has(a, "checkpoint") && source != "checkpoint")
        throw UsageError("--checkpoint conflicts with --features " + source);
    pcreg::EvalFeatures features;
    if (source == "checkpoint") {
        if (!has(a, "checkpoint")) throw UsageError("--features checkpoint needs --checkpoint");
        const pcreg::Checkpoint ck = pcreg::load_checkpoint(get(a, "checkpoint", ""));
        features = pcreg::encoder_features(ck.params(modality_section(modality)), modality);
    } else if (source == "random") {
        features = pcreg::random_features(modality, opts.neighbors, opts.seed);
    } else if (source == "fpfh") {
        features = pcreg::fpfh_features();
    } else {
        throw UsageError("--features must be random, fpfh, or checkpoint, got '" + source +
                         "'");
    }

    const auto t0 = std::chrono::steady_clock::now();
    const pcreg::EvaluationResult result =
        pcreg::evaluate_manifest(manifest, split, features, opts);
    std::cerr << "evaluate: " << result.evaluated << " pairs (" << result.failed
              << " failed) in " << seconds_since(t0) << " s\n";

    nlohmann::json j;
    j["estimator"] = pcreg::to_string(opts.estimator);
    j["features"] = source;
    if (source != "fpfh") j["modality"] = pcreg::to_string(modality);
    j["split"] = split;
    j["evaluated"] = result.evaluated;
    j["failed"] = result.failed;
    j["report"] = pcreg::to_json(result.report);
    if (result.has_fmr)
        j["fmr"] = {{"recall", result.fmr.recall}, {"group_std", result.fmr.group_std}};
    nlohmann::json rows = nlohmann::json::array();
    for (const pcreg::PairEvaluation& pair : result.pairs) {
        nlohmann::json row;
        row["scene_id"] = pair.scene_id;
        row["failed"] = pair.failed;
        if (pair.failed) {
            row["note"] = pair.note;
        } else {
            row["rotation_deg"] = pair.metrics.rotation_deg;
            row["translation_cm"] = pair.metrics.translation_cm;
            row["chamfer_cm"] = pair.metrics.chamfer_cm;
        }
        if (result.has_fmr) row["feature_matched"] = pair.feature_matched;
        rows.push_back(std::move(row));
    }
    j["pairs"] = std::move(rows);

    const std::string dump = j.dump();
    std::cout << dump << "\n";
    if (has(a, "out")) {
        const fs::path out = get(a, "out", "");
        std::ofstream f(out, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for writing: " + out.string());
        f << dump << "\n";
        if (!f) throw std::runtime_error("write failed: " + out.string());
    }

    std::cerr << pcreg::format_table(result.report);
    if (result.has_fmr) {
        std::ostringstream line;
        line << std::fixed << std::setprecision(3) << "feature-match recall "
             << result.fmr.recall << " (std " << result.fmr.group_std
             << " across scene families)\n";
        std::cerr << line.str();
    }
    return 0;
}

// ------------------------------------------------------------------ report

int cmd_report(const Args& a) {
    if (a.positional.size() != 1)
        throw UsageError("report needs exactly one evaluation JSON path");
    std::ifstream in(a.positional[0]);
    if (!in) throw std::runtime_error("cannot open: " + a.positional[0]);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(a.positional[0] + ": " + e.what());
    }

    std::ostringstream os;
    os << "evaluation: estimator " << j.at("estimator").get<std::string>() << ", features "
       << j.at("features").get<std::string>();
    if (j.contains("modality")) os << " (" << j.at("modality").get<std::string>() << ")";
    os << ", split '" << j.at("split").get<std::string>() << "', "
       << j.at("evaluated").get<int>() << " pairs evaluated, " << j.at("failed").get<int>()
       << " failed\n";
    os << pcreg::format_table(pcreg::report_from_json(j.at("report")));
    if (j.contains("fmr"))
        os << std::fixed << std::setprecision(3) << "feature-match recall "
           << j.at("fmr").at("recall").get<double>() << " (std "
           << j.at("fmr").at("group_std").get<double>() << " across scene families)\n";
    std::cout << os.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        if (argc < 2) {
            std::cerr << kUsage;
            return 1;
        }
        const std::string cmd = argv[1];
        if (cmd == "--help" || cmd == "-h" || cmd == "help") {
            std::cout << kUsage;
            return 0;
        }
        if (cmd == "gen-data") return cmd_gen_data(parse_args(argc, argv, kGenDataKeys));
        if (cmd == "train") return cmd_train(parse_args(argc, argv, kTrainKeys));
        if (cmd == "register") return cmd_register(parse_args(argc, argv, kRegisterKeys));
        if (cmd == "evaluate") return cmd_evaluate(parse_args(argc, argv, kEvaluateKeys));
        if (cmd == "report") return cmd_report(parse_args(argc, argv, {}));
        std::cerr << "pcreg: unknown subcommand '" << cmd << "'\n" << kUsage;
        return 1;
    } catch (const pcreg::DegenerateError& e) {
        std::cerr << "pcreg: degenerate: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "pcreg: " << e.what() << "\n";
        return 1;
    }
}
