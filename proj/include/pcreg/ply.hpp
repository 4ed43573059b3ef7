#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcreg/cloud.hpp"

namespace pcreg {

class PlyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Writes an ASCII PLY file. Positions (and normals, when present) are printed
 * with 17 significant digits so a load reproduces them bit-exactly; colors
 * are stored as 8-bit channels, so only 1/255-quantized colors round-trip.
 */
inline void save_ply(const std::filesystem::path& path, const PointCloud& cloud) {
    cloud.validate();
    std::ofstream out(path);
    if (!out) throw PlyError("cannot open for writing: " + path.string());

    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << cloud.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (cloud.has_colors())
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    if (cloud.has_normals())
        out << "property double nx\nproperty double ny\nproperty double nz\n";
    out << "end_header\n";

    char buf[420];
    for (int i = 0; i < cloud.size(); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const auto& p = cloud.positions[idx];
        int len = std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g", p.x(), p.y(), p.z());
        if (cloud.has_colors()) {
            const auto& c = cloud.colors[idx];
            const auto chan = [](double v) {
                return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            };
            len += std::snprintf(buf + len, sizeof(buf) - static_cast<std::size_t>(len),
                                 " %d %d %d", chan(c.x()), chan(c.y()), chan(c.z()));
        }
        if (cloud.has_normals()) {
            const auto& n = cloud.normals[idx];
            len += std::snprintf(buf + len, sizeof(buf) - static_cast<std::size_t>(len),
                                 " %.17g %.17g %.17g", n.x(), n.y(), n.z());
        }
        out << buf << "\n";
    }
    if (!out) throw PlyError("write failed: " + path.string());
}

namespace detail {

struct PlyProperty {
    std::string type;
    std::string name;
    bool is_list = false;
};

[[noreturn]] inline void ply_fail(const std::filesystem::path& path, int line,
                                  const std::string& msg) {
    throw PlyError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace detail

/**
 * Reads an ASCII PLY file. Recognized vertex properties: x/y/z, red/green/blue
 * (8-bit), nx/ny/nz. Unknown properties and non-vertex elements are skipped
 * with a warning on stderr. Malformed input raises PlyError with the
 * offending line number.
 */
inline PointCloud load_ply(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PlyError("cannot open: " + path.string());

    int line_no = 0;
    std::string line;
    const auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };

    if (!next_line() || line != "ply") detail::ply_fail(path, line_no, "missing 'ply' magic");
    if (!next_line() || line != "format ascii 1.0")
        detail::ply_fail(path, line_no, "only 'format ascii 1.0' is supported");

    struct Element {
        std::string name;
        long count = 0;
        std::vector<detail::PlyProperty> props;
    };
    std::vector<Element> elements;
    bool header_done = false;
    while (!header_done) {
        if (!next_line()) detail::ply_fail(path, line_no, "unexpected end of header");
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment" || word.empty()) continue;
        if (word == "end_header") {
            header_done = true;
        } else if (word == "element") {
            Element e;
            if (!(ls >> e.name >> e.count) || e.count < 0)
                detail::ply_fail(path, line_no, "malformed element declaration");
            elements.push_back(std::move(e));
        } else if (word == "property") {
            if (elements.empty())
                detail::ply_fail(path, line_no, "property before any element");
            detail::PlyProperty p;
            ls >> p.type;
            if (p.type == "list") {
                std::string count_type, value_type;
                if (!(ls >> count_type >> value_type >> p.name))
                    detail::ply_fail(path, line_no, "malformed list property");
                p.is_list = true;
            } else if (!(ls >> p.name)) {
                detail::ply_fail(path, line_no, "malformed property declaration");
            }
            elements.back().props.push_back(std::move(p));
        } else {
            detail::ply_fail(path, line_no, "unrecognized header keyword '" + word + "'");
        }
    }

    PointCloud cloud;
    for (const auto& element : elements) {
        if (element.name != "vertex") {
            if (element.count > 0)
                std::fprintf(stderr, "warning: %s: skipping element '%s' (%ld rows)\n",
                             path.string().c_str(), element.name.c_str(), element.count);
            for (long r = 0; r < element.count; ++r) {
                if (!next_line())
                    detail::ply_fail(path, line_no, "unexpected end of file in element '" +
                                                        element.name + "'");
            }
            continue;
        }

        bool has_xyz = false, has_rgb = false, has_normals = false;
        for (const auto& p : element.props) {
            if (p.name == "x") has_xyz = true;
            if (p.name == "red") has_rgb = true;
            if (p.name == "nx") has_normals = true;
            if (!p.is_list && p.name != "x" && p.name != "y" && p.name != "z" &&
                p.name != "red" && p.name != "green" && p.name != "blue" &&
                p.name != "nx" && p.name != "ny" && p.name != "nz") {
                std::fprintf(stderr, "warning: %s: skipping unknown vertex property '%s'\n",
                             path.string().c_str(), p.name.c_str());
            }
        }
        if (!has_xyz) detail::ply_fail(path, line_no, "vertex element lacks x/y/z");

        cloud.positions.reserve(static_cast<std::size_t>(element.count));
        for (long r = 0; r < element.count; ++r) {
            if (!next_line()) detail::ply_fail(path, line_no, "unexpected end of vertex data");
            std::istringstream ls(line);
            Eigen::Vector3d pos = Eigen::Vector3d::Zero();
            Eigen::Vector3d color = Eigen::Vector3d::Zero();
            Eigen::Vector3d normal = Eigen::Vector3d::Zero();
            for (const auto& p : element.props) {
                if (p.is_list) detail::ply_fail(path, line_no, "list property on vertex");
                double v = 0.0;
                if (!(ls >> v))
                    detail::ply_fail(path, line_no, "bad value for property '" + p.name + "'");
                if (p.name == "x") pos.x() = v;
                else if (p.name == "y") pos.y() = v;
                else if (p.name == "z") pos.z() = v;
                else if (p.name == "red") color.x() = v / 255.0;
                else if (p.name == "green") color.y() = v / 255.0;
                else if (p.name == "blue") color.z() = v / 255.0;
                else if (p.name == "nx") normal.x() = v;
                else if (p.name == "ny") normal.y() = v;
                else if (p.name == "nz") normal.z() = v;
            }
            cloud.positions.push_back(pos);
            if (has_rgb) cloud.colors.push_back(color);
            if (has_normals) cloud.normals.push_back(normal);
        }
    }
    cloud.validate();
    return cloud;
}

}  // namespace pcreg
