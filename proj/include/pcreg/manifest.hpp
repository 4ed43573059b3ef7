#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcreg/cloud.hpp"

namespace pcreg {

/**
 * One registration pair in a dataset manifest. Cloud paths are stored as
 * written (normally relative to the manifest file); ground_truth maps points
 * from the cloud0 frame into the cloud1 frame.
 */
struct ScenePair {
    std::string scene_id;
    std::string split;  // train / val / test
    std::uint64_t seed = 0;
    std::string cloud0;
    std::string cloud1;
    RigidTransform ground_truth;
    double overlap = 0.0;
};

inline std::filesystem::path resolve_cloud_path(const std::filesystem::path& manifest_path,
                                                const std::string& stored) {
    const std::filesystem::path p(stored);
    return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

/// One JSON object per line; key order and float formatting are fixed by the
/// serializer, so rewriting an unchanged manifest is byte-identical.
inline void save_manifest(const std::filesystem::path& path,
                          const std::vector<ScenePair>& pairs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (const auto& pair : pairs) {
        nlohmann::json j;
        j["scene_id"] = pair.scene_id;
        j["split"] = pair.split;
        j["seed"] = pair.seed;
        j["cloud0"] = pair.cloud0;
        j["cloud1"] = pair.cloud1;
        std::vector<double> rot(9);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                rot[static_cast<std::size_t>(3 * r + c)] = pair.ground_truth.rotation(r, c);
        j["rotation"] = rot;
        j["translation"] = {pair.ground_truth.translation.x(),
                            pair.ground_truth.translation.y(),
                            pair.ground_truth.translation.z()};
        j["overlap"] = pair.overlap;
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::vector<ScenePair> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::vector<ScenePair> pairs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " +
                                     e.what());
        }
        try {
            ScenePair pair;
            pair.scene_id = j.at("scene_id").get<std::string>();
            pair.split = j.at("split").get<std::string>();
            pair.seed = j.at("seed").get<std::uint64_t>();
            pair.cloud0 = j.at("cloud0").get<std::string>();
            pair.cloud1 = j.at("cloud1").get<std::string>();
            const auto rot = j.at("rotation").get<std::vector<double>>();
            const auto trans = j.at("translation").get<std::vector<double>>();
            if (rot.size() != 9 || trans.size() != 3)
                throw std::runtime_error("rotation/translation of wrong length");
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    pair.ground_truth.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)];
            pair.ground_truth.translation = {trans[0], trans[1], trans[2]};
            pair.overlap = j.at("overlap").get<double>();
            pairs.push_back(std::move(pair));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " +
                                     e.what());
        }
    }

    // A scene id must live in exactly one split, or train/test leakage hides
    // behind the manifest.
    std::map<std::string, std::string> split_of;
    for (const auto& pair : pairs) {
        const auto [it, inserted] = split_of.emplace(pair.scene_id, pair.split);
        if (!inserted && it->second != pair.split)
            throw std::runtime_error(path.string() + ": scene '" + pair.scene_id +
                                     "' appears in splits '" + it->second + "' and '" +
                                     pair.split + "'");
    }

    std::string missing;
    for (const auto& pair : pairs)
        for (const auto& stored : {pair.cloud0, pair.cloud1}) {
            const auto resolved = resolve_cloud_path(path, stored);
            if (!std::filesystem::exists(resolved)) missing += "\n  " + resolved.string();
        }
    if (!missing.empty())
        throw std::runtime_error(path.string() + ": missing cloud files:" + missing);

    return pairs;
}

}  // namespace pcreg
