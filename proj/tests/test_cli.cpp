// Drives the installed CLI binary end to end through std::system. The
// binary's path arrives in PCREG_BIN (set by ctest); without it the suite
// skips rather than guessing.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "pcreg/cloud.hpp"
#include "pcreg/manifest.hpp"
#include "pcreg/ply.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_binary() {
    const char* bin = std::getenv("PCREG_BIN");
    return bin == nullptr ? std::string{} : std::string(bin);
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Runs `pcreg <args>` with cwd `dir`, capturing exit code and both streams.
RunResult run_cli(const fs::path& dir, const std::string& args) {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string command = "cd " + dir.string() + " && " + cli_binary() + " " + args +
                                " > " + out.string() + " 2> " + err.string();
    const int status = std::system(command.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pcreg_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// Byte-compare every regular file in two directory trees.
void require_identical_trees(const fs::path& a, const fs::path& b) {
    std::vector<fs::path> rel;
    for (const auto& entry : fs::recursive_directory_iterator(a))
        if (entry.is_regular_file()) rel.push_back(fs::relative(entry.path(), a));
    REQUIRE(!rel.empty());
    std::size_t b_count = 0;
    for (const auto& entry : fs::recursive_directory_iterator(b))
        if (entry.is_regular_file()) ++b_count;
    REQUIRE(b_count == rel.size());
    for (const auto& r : rel) {
        INFO(r.string());
        REQUIRE(slurp(a / r) == slurp(b / r));
    }
}

// Small-but-real generator settings shared by every case.
const std::string kGenFlags = " --n-master 1500 ";
const std::string kPipelineFlags = " --voxel 0.05 --neighbors 8 --k 100 ";

}  // namespace

#define REQUIRE_CLI_AVAILABLE() \
    if (cli_binary().empty()) SKIP("PCREG_BIN not set")

TEST_CASE("cli lifecycle: gen-data, train, register, evaluate, report", "[cli]") {
    REQUIRE_CLI_AVAILABLE();
    const fs::path dir = fresh_dir("lifecycle");

    const RunResult gen = run_cli(
        dir, "gen-data --out data --pairs 3 --seed 11 --split train" + kGenFlags);
    INFO(gen.err);
    REQUIRE(gen.exit_code == 0);
    const nlohmann::json gen_json = nlohmann::json::parse(gen.out);
    REQUIRE(gen_json.at("pairs").get<int>() == 3);
    REQUIRE(gen_json.at("mean_overlap").get<double>() > 0.0);
    const auto rows = pcreg::load_manifest(dir / "data/manifest.jsonl");
    REQUIRE(rows.size() == 3);

    const RunResult test_gen = run_cli(
        dir, "gen-data --out held --pairs 2 --seed 40 --split test" + kGenFlags);
    REQUIRE(test_gen.exit_code == 0);

    const RunResult train = run_cli(
        dir, "train --manifest data/manifest.jsonl --iters 2 --batch-size 2 --threads 2 "
             "--seed 5 --out run" + kPipelineFlags);
    INFO(train.err);
    REQUIRE(train.exit_code == 0);
    REQUIRE(fs::exists(dir / "run/checkpoint.ckpt"));
    const nlohmann::json train_json = nlohmann::json::parse(train.out);
    REQUIRE(train_json.at("iterations").get<int>() == 2);
    {
        std::ifstream log(dir / "run/train_log.jsonl");
        std::string line;
        int records = 0;
        while (std::getline(log, line)) {
            const nlohmann::json rec = nlohmann::json::parse(line);
            REQUIRE(rec.at("iteration").get<int>() == records);
            ++records;
        }
        REQUIRE(records == 2);
    }

    const std::string pair0 = rows[0].cloud0;
    const RunResult reg = run_cli(
        dir, "register data/" + pair0 + " data/" + pair0 + kPipelineFlags + "--out aligned.ply");
    INFO(reg.err);
    REQUIRE(reg.exit_code == 0);
    const nlohmann::json fit = nlohmann::json::parse(reg.out);
    REQUIRE(fit.at("degenerate").get<bool>() == false);
    const auto rot = fit.at("rotation").get<std::vector<double>>();
    REQUIRE(rot.size() == 9);
    // Same cloud twice: identity to numerical precision.
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            REQUIRE(rot[static_cast<std::size_t>(3 * r + c)] ==
                    Catch::Approx(r == c ? 1.0 : 0.0).margin(1e-6));
    REQUIRE(fs::exists(dir / "aligned.ply"));

    const RunResult eval = run_cli(
        dir, "evaluate --manifest held/manifest.jsonl --split test "
             "--checkpoint run/checkpoint.ckpt --workers 2 --out eval.json" + kPipelineFlags);
    INFO(eval.err);
    REQUIRE(eval.exit_code == 0);
    const nlohmann::json ej = nlohmann::json::parse(eval.out);
    REQUIRE(ej.at("evaluated").get<int>() + ej.at("failed").get<int>() == 2);
    REQUIRE(ej.at("report").at("metrics").size() == 3);
    REQUIRE(ej.contains("fmr"));
    REQUIRE(ej.at("pairs").size() == 2);
    // stdout held exactly one JSON document (parse above would reject table
    // text); the rendered table goes to stderr.
    REQUIRE(eval.err.find("rotation_deg") != std::string::npos);

    const RunResult report = run_cli(dir, "report eval.json");
    REQUIRE(report.exit_code == 0);
    REQUIRE(report.out.find("rotation_deg") != std::string::npos);
    REQUIRE(report.out.find("feature-match recall") != std::string::npos);
}

TEST_CASE("cli reruns are byte-identical for gen-data, train, and evaluate", "[cli]") {
    REQUIRE_CLI_AVAILABLE();
    const fs::path dir = fresh_dir("determinism");

    const std::string gen_args =
        "gen-data --out data --pairs 3 --seed 21 --split test" + kGenFlags;
    const RunResult gen1 = run_cli(dir, gen_args);
    REQUIRE(gen1.exit_code == 0);
    fs::rename(dir / "data", dir / "data_first");
    const RunResult gen2 = run_cli(dir, gen_args);
    REQUIRE(gen2.exit_code == 0);
    REQUIRE(gen1.out == gen2.out);
    require_identical_trees(dir / "data_first", dir / "data");

    const std::string train_args =
        "train --manifest data/manifest.jsonl --split test --iters 2 --batch-size 2 "
        "--seed 9" + kPipelineFlags;
    const RunResult train1 = run_cli(dir, train_args + "--threads 1 --out runA");
    const RunResult train2 = run_cli(dir, train_args + "--threads 4 --out runB");
    INFO(train1.err);
    REQUIRE(train1.exit_code == 0);
    REQUIRE(train2.exit_code == 0);
    REQUIRE(slurp(dir / "runA/checkpoint.ckpt") == slurp(dir / "runB/checkpoint.ckpt"));
    REQUIRE(slurp(dir / "runA/train_log.jsonl") == slurp(dir / "runB/train_log.jsonl"));

    const std::string eval_args =
        "evaluate --manifest data/manifest.jsonl --split test --features random "
        "--seed 3" + kPipelineFlags;
    const RunResult eval1 = run_cli(dir, eval_args + "--workers 1");
    const RunResult eval2 = run_cli(dir, eval_args + "--workers 4");
    REQUIRE(eval1.exit_code == 0);
    REQUIRE(eval2.exit_code == 0);
    REQUIRE(eval1.out == eval2.out);
}

TEST_CASE("cli train resumes from a checkpoint to the uninterrupted result", "[cli]") {
    REQUIRE_CLI_AVAILABLE();
    const fs::path dir = fresh_dir("resume");
    REQUIRE(run_cli(dir, "gen-data --out data --pairs 3 --seed 31" + kGenFlags).exit_code ==
            0);

    const std::string base =
        "train --manifest data/manifest.jsonl --batch-size 2 --seed 7" + kPipelineFlags;
    REQUIRE(run_cli(dir, base + "--iters 4 --out full").exit_code == 0);
    REQUIRE(run_cli(dir, base + "--iters 2 --out half").exit_code == 0);
    const RunResult resumed = run_cli(
        dir, base + "--iters 4 --resume half/checkpoint.ckpt --out resumed");
    INFO(resumed.err);
    REQUIRE(resumed.exit_code == 0);
    REQUIRE(slurp(dir / "full/checkpoint.ckpt") == slurp(dir / "resumed/checkpoint.ckpt"));
}

TEST_CASE("cli variant flags shape the training log", "[cli]") {
    REQUIRE_CLI_AVAILABLE();
    const fs::path dir = fresh_dir("variants");
    REQUIRE(run_cli(dir, "gen-data --out data --pairs 3 --seed 61" + kGenFlags).exit_code ==
            0);

    const RunResult geo = run_cli(
        dir, "train --manifest data/manifest.jsonl --variant byoc-geo --iters 3 "
             "--batch-size 2 --seed 1 --out geo" + kPipelineFlags);
    REQUIRE(geo.exit_code == 0);
    {
        std::ifstream log(dir / "geo/train_log.jsonl");
        std::string line;
        int records = 0;
        while (std::getline(log, line)) {
            const nlohmann::json rec = nlohmann::json::parse(line);
            REQUIRE(rec.at("lambda_vis").get<double>() == 0.0);
            REQUIRE(rec.at("lambda_v2g").get<double>() == 0.0);
            REQUIRE(rec.at("lambda_geo").get<double>() > 0.0);
            ++records;
        }
        REQUIRE(records == 3);
    }

    const RunResult rot = run_cli(
        dir, "train --manifest data/manifest.jsonl --variant byoc-rot --iters 2 "
             "--batch-size 2 --seed 1 --out rot" + kPipelineFlags);
    REQUIRE(rot.exit_code == 0);
    {
        std::ifstream log(dir / "rot/train_log.jsonl");
        std::string line;
        int records = 0;
        while (std::getline(log, line)) {
            const nlohmann::json rec = nlohmann::json::parse(line);
            const auto& rots = rec.at("augmentation_rotations_deg");
            REQUIRE(rots.size() == 2);  // one entry per batch slot
            for (const auto& item : rots) {
                REQUIRE(item.size() == 2);
                for (const auto& deg : item) {
                    REQUIRE(deg.get<double>() >= 0.0);
                    REQUIRE(deg.get<double>() <= 180.0);
                }
            }
            ++records;
        }
        REQUIRE(records == 2);
    }
}

TEST_CASE("cli flag values override config-file values", "[cli]") {
    REQUIRE_CLI_AVAILABLE();
    const fs::path dir = fresh_dir("config");
    REQUIRE(run_cli(dir, "gen-data --out data --pairs 2 --seed 71" + kGenFlags).exit_code ==
            0);
    {
        std::ofstream cfg(dir / "train.cfg");
        cfg << "# shared settings\n"
            << "voxel = 0.05\n"
            << "neighbors = 8\n"
            << "k = 100\n"
            << "batch-size = 2\n"
            << "workers = 4\n";  // not a train key: skipped with a note
    }
    const RunResult file_only = run_cli(
        dir, "train --manifest data/manifest.jsonl --config train.cfg --iters 1 --out a");
    INFO(file_only.err);
    REQUIRE(file_only.exit_code == 0);
    REQUIRE(nlohmann::json::parse(file_only.out)
                .at("config").at("k_correspondences").get<int>() == 100);
    REQUIRE(file_only.err.find("'workers'") != std::string::npos);

    const RunResult with_flag = run_cli(
        dir, "train --manifest data/manifest.jsonl --config train.cfg --iters 1 --k 150 "
             "--out b");
    REQUIRE(with_flag.exit_code == 0);
    REQUIRE(nlohmann::json::parse(with_flag.out)
                .at("config").at("k_correspondences").get<int>() == 150);
}

TEST_CASE("cli exit codes distinguish usage errors from degeneracy", "[cli]") {
    REQUIRE_CLI_AVAILABLE();
    const fs::path dir = fresh_dir("exits");

    REQUIRE(run_cli(dir, "").exit_code == 1);
    REQUIRE(run_cli(dir, "frobnicate").exit_code == 1);
    REQUIRE(run_cli(dir, "--help").exit_code == 0);

    const RunResult no_pairs = run_cli(dir, "gen-data --out void --pairs 0");
    REQUIRE(no_pairs.exit_code == 1);
    REQUIRE(!fs::exists(dir / "void"));

    const RunResult unknown = run_cli(dir, "gen-data --out d --pairs 1 --bogus 3");
    REQUIRE(unknown.exit_code == 1);
    REQUIRE(unknown.err.find("--bogus") != std::string::npos);

    const RunResult missing = run_cli(dir, "register nope_0.ply nope_1.ply");
    REQUIRE(missing.exit_code == 1);
    REQUIRE(missing.err.find("nope_0.ply") != std::string::npos);

    // A collinear cloud survives featurization but degenerates the fit.
    pcreg::PointCloud line;
    for (int i = 0; i < 30; ++i) line.positions.push_back({0.1 * i, 0.0, 0.0});
    pcreg::save_ply(dir / "line.ply", line);
    const RunResult degenerate = run_cli(
        dir, "register line.ply line.ply --voxel 0.05 --neighbors 4 --mode procrustes");
    REQUIRE(degenerate.exit_code == 2);

    const RunResult bad_value = run_cli(
        dir, "gen-data --out d --pairs not_a_number");
    REQUIRE(bad_value.exit_code == 1);
    REQUIRE(bad_value.err.find("not_a_number") != std::string::npos);
}

TEST_CASE("cli evaluate supports fpfh features and icp estimators", "[cli]") {
    REQUIRE_CLI_AVAILABLE();
    const fs::path dir = fresh_dir("estimators");
    REQUIRE(run_cli(dir, "gen-data --out data --pairs 2 --seed 81 --split test" +
                             kGenFlags).exit_code == 0);

    const RunResult fpfh = run_cli(
        dir, "evaluate --manifest data/manifest.jsonl --split test --features fpfh" +
                 kPipelineFlags);
    INFO(fpfh.err);
    REQUIRE(fpfh.exit_code == 0);
    REQUIRE(nlohmann::json::parse(fpfh.out).at("features").get<std::string>() == "fpfh");

    const RunResult icp = run_cli(
        dir, "evaluate --manifest data/manifest.jsonl --split test --estimator icp-p2p" +
                 kPipelineFlags);
    REQUIRE(icp.exit_code == 0);
    const nlohmann::json ij = nlohmann::json::parse(icp.out);
    REQUIRE(ij.at("estimator").get<std::string>() == "icp-p2p");
    REQUIRE(!ij.contains("fmr"));  // no correspondences, no recall

    const RunResult bad_split = run_cli(
        dir, "evaluate --manifest data/manifest.jsonl --split val" + kPipelineFlags);
    REQUIRE(bad_split.exit_code == 1);
}
