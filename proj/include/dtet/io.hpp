#pragma once

// File formats: PNG (8-bit), little-endian PFM, OBJ, and JSON documents for
// cameras, poses, pose sequences and rigs.

#include "dtet/camera.hpp"
#include "dtet/image.hpp"
#include "dtet/mesh.hpp"
#include "dtet/rig.hpp"
#include "dtet/tetgrid.hpp"

#include <json.hpp>
#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace dtet {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// PNG

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const
    {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const fs::path& p, const char* mode)
{
    FilePtr f(std::fopen(p.c_str(), mode));
    if (!f) throw std::runtime_error("cannot open '" + p.string() + "'");
    return f;
}

inline void png_error_fn(png_structp png, png_const_charp) { png_longjmp(png, 1); }
inline void png_warning_fn(png_structp, png_const_charp) {}

inline std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace detail

/// Writes a 1- or 3-channel image in [0, 1] as 8-bit gray or RGB.
inline void write_png(const fs::path& path, const Image& img)
{
    if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("write_png: expected 1 or 3 channels");
    auto f = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_fn, detail::png_warning_fn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("write_png: libpng init failed");
    }
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * img.channels);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: libpng error writing '" + path.string() + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.width, img.height, 8, img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        for (std::size_t i = 0; i < row.size(); ++i) row[i] = detail::to_byte(img.data[static_cast<std::size_t>(y) * row.size() + i]);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Reads an 8-bit PNG as doubles in [0, 1], converted to `channels` (1 or 3).
inline Image read_png(const fs::path& path, int channels)
{
    auto f = detail::open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_fn, detail::png_warning_fn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("read_png: libpng init failed");
    }
    Image img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: '" + path.string() + "' is not a readable PNG");
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    const int type = png_get_color_type(png, info);
    if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (channels == 3 && (type == PNG_COLOR_TYPE_GRAY || type == PNG_COLOR_TYPE_GRAY_ALPHA)) png_set_gray_to_rgb(png);
    if (channels == 1 && (type & PNG_COLOR_MASK_COLOR)) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int ch = png_get_channels(png, info);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * ch);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w * ch;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    if (ch != channels) throw std::runtime_error("read_png: '" + path.string() + "' has an unexpected channel count");
    img = Image(w, h, channels);
    for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0;
    return img;
}

// ---------------------------------------------------------------------------
// PFM (negative scale = little-endian; rows stored bottom to top)

inline void write_pfm(const fs::path& path, const Image& img)
{
    if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("write_pfm: expected 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "'");
    out << (img.channels == 3 ? "PF" : "Pf") << '\n' << img.width << ' ' << img.height << '\n' << "-1\n";
    for (int y = img.height - 1; y >= 0; --y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) detail::write_le<float>(out, static_cast<float>(img.at(x, y, c)));
}

inline Image read_pfm(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    in.get();
    if ((magic != "PF" && magic != "Pf") || w <= 0 || h <= 0) throw std::runtime_error("read_pfm: bad header in '" + path.string() + "'");
    if (scale >= 0.0) throw std::runtime_error("read_pfm: big-endian PFM is not supported");
    Image img(w, h, magic == "PF" ? 3 : 1);
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = detail::read_le<float>(in);
    return img;
}

// ---------------------------------------------------------------------------
// OBJ

inline void write_obj(const fs::path& path, const TriMesh& m)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "'");
    out << std::setprecision(9);
    for (const Vec3& v : m.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const Face& f : m.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

/// Reads `v` and triangular `f` records (vertex indices only).
inline TriMesh read_obj(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    TriMesh m;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3 v;
            ls >> v.x() >> v.y() >> v.z();
            m.vertices.push_back(v);
        } else if (tag == "f") {
            Face f;
            for (int k = 0; k < 3; ++k) {
                std::string tok;
                ls >> tok;
                f[k] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
                if (f[k] < 0) throw std::runtime_error("read_obj: relative indices are not supported");
            }
            m.faces.push_back(f);
        }
    }
    for (const Face& f : m.faces)
        for (int i : f)
            if (i >= static_cast<int>(m.vertices.size())) throw std::runtime_error("read_obj: face index out of range");
    update_normals(m);
    return m;
}

// ---------------------------------------------------------------------------
// JSON documents

namespace detail {

inline nlohmann::json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("'" + path.string() + "': " + e.what());
    }
}

inline void write_json(const fs::path& path, const nlohmann::json& j)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

inline nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline Vec3 json_vec(const nlohmann::json& j)
{
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-vector");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace detail

inline nlohmann::json camera_to_json(const Camera& c)
{
    nlohmann::json r = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.push_back(c.rotation(i, j));
    return {{"rotation", r}, {"position", detail::vec_json(c.position)}, {"fov_y", c.fov_y}, {"width", c.width},
            {"height", c.height}, {"cx", c.cx}, {"cy", c.cy}};
}

inline Camera camera_from_json(const nlohmann::json& j)
{
    Camera c;
    try {
        const auto& r = j.at("rotation");
        if (!r.is_array() || r.size() != 9) throw std::invalid_argument("camera: rotation must hold 9 numbers");
        for (int i = 0; i < 9; ++i) c.rotation(i / 3, i % 3) = r[i].get<double>();
        c.position = detail::json_vec(j.at("position"));
        c.fov_y = j.at("fov_y").get<double>();
        c.width = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
        c.cx = j.contains("cx") ? j.at("cx").get<double>() : 0.5 * c.width;
        c.cy = j.contains("cy") ? j.at("cy").get<double>() : 0.5 * c.height;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("camera: ") + e.what());
    }
    c.validate();
    return c;
}

inline void write_camera(const fs::path& p, const Camera& c) { detail::write_json(p, camera_to_json(c)); }
inline Camera read_camera(const fs::path& p) { return camera_from_json(detail::read_json(p)); }

inline nlohmann::json pose_to_json(const PoseParams& p)
{
    nlohmann::json rot = nlohmann::json::array();
    for (const Vec3& r : p.rotations) rot.push_back(detail::vec_json(r));
    std::vector<double> e(p.expression.data(), p.expression.data() + p.expression.size());
    return {{"rotations", rot}, {"expression", e}, {"translation", detail::vec_json(p.translation)}};
}

inline PoseParams pose_from_json(const nlohmann::json& j)
{
    PoseParams p;
    try {
        for (const auto& r : j.at("rotations")) p.rotations.push_back(detail::json_vec(r));
        const auto e = j.at("expression").get<std::vector<double>>();
        p.expression = Eigen::Map<const Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()));
        if (j.contains("translation")) p.translation = detail::json_vec(j.at("translation"));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("pose: ") + e.what());
    }
    return p;
}

inline void write_pose(const fs::path& path, const PoseParams& p) { detail::write_json(path, pose_to_json(p)); }
inline PoseParams read_pose(const fs::path& path) { return pose_from_json(detail::read_json(path)); }

/// One pose per non-empty line: 3B axis-angle numbers, K expression
/// coefficients, then 3 translation numbers. '#' starts a comment.
inline std::vector<PoseParams> read_pose_sequence(const fs::path& path, int bones, int expressions)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::vector<PoseParams> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = line.substr(0, line.find('#'));
        std::istringstream ls(line);
        std::vector<double> v;
        double x;
        while (ls >> x) v.push_back(x);
        if (!ls.eof()) throw std::invalid_argument("pose sequence line " + std::to_string(lineno) + ": not a number");
        if (v.empty()) continue;
        const std::size_t want = static_cast<std::size_t>(3 * bones + expressions + 3);
        if (v.size() != want)
            throw std::invalid_argument("pose sequence line " + std::to_string(lineno) + ": expected " + std::to_string(want) +
                                        " numbers, got " + std::to_string(v.size()));
        PoseParams p = PoseParams::rest(bones, expressions);
        for (int b = 0; b < bones; ++b) p.rotations[b] = Vec3(v[3 * b], v[3 * b + 1], v[3 * b + 2]);
        for (int k = 0; k < expressions; ++k) p.expression[k] = v[3 * bones + k];
        p.translation = Vec3(v[want - 3], v[want - 2], v[want - 1]);
        out.push_back(std::move(p));
    }
    return out;
}

inline constexpr int kRigFormatVersion = 1;

inline nlohmann::json rig_to_json(const RiggedTemplate& t)
{
    nlohmann::json verts = nlohmann::json::array(), faces = nlohmann::json::array(), weights = nlohmann::json::array(),
                   joints = nlohmann::json::array(), shapes = nlohmann::json::array();
    for (const Vec3& v : t.vertices) verts.push_back(detail::vec_json(v));
    for (const Face& f : t.faces) faces.push_back({f[0], f[1], f[2]});
    for (Eigen::Index i = 0; i < t.weights.rows(); ++i) {
        std::vector<double> row(t.weights.cols());
        for (Eigen::Index b = 0; b < t.weights.cols(); ++b) row[b] = t.weights(i, b);
        weights.push_back(row);
    }
    for (const Vec3& j : t.joints) joints.push_back(detail::vec_json(j));
    for (const auto& e : t.blendshapes) {
        nlohmann::json s = nlohmann::json::array();
        for (Eigen::Index i = 0; i < e.rows(); ++i) s.push_back({e(i, 0), e(i, 1), e(i, 2)});
        shapes.push_back(s);
    }
    return {{"format", "dtet-rig"}, {"version", kRigFormatVersion}, {"vertices", verts}, {"faces", faces},
            {"weights", weights},   {"blendshapes", shapes},         {"joints", joints},  {"parents", t.parents},
            {"names", t.names}};
}

/// Parses and validates a rig document; errors name the offending field.
inline RiggedTemplate rig_from_json(const nlohmann::json& j)
{
    RiggedTemplate t;
    std::string field = "format";
    try {
        if (j.at("format").get<std::string>() != "dtet-rig") throw std::invalid_argument("not a dtet-rig document");
        field = "version";
        if (j.at("version").get<int>() != kRigFormatVersion) throw std::invalid_argument("unsupported version");
        field = "vertices";
        for (const auto& v : j.at("vertices")) t.vertices.push_back(detail::json_vec(v));
        field = "faces";
        for (const auto& f : j.at("faces")) {
            if (!f.is_array() || f.size() != 3) throw std::invalid_argument("faces must be index triples");
            t.faces.push_back({f[0].get<int>(), f[1].get<int>(), f[2].get<int>()});
        }
        field = "joints";
        for (const auto& v : j.at("joints")) t.joints.push_back(detail::json_vec(v));
        field = "parents";
        t.parents = j.at("parents").get<std::vector<int>>();
        field = "names";
        t.names = j.at("names").get<std::vector<std::string>>();
        field = "weights";
        const auto& w = j.at("weights");
        t.weights.resize(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(t.joints.size()));
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i].size() != t.joints.size()) throw std::invalid_argument("row " + std::to_string(i) + " must have one entry per joint");
            for (std::size_t b = 0; b < t.joints.size(); ++b) t.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = w[i][b].get<double>();
        }
        field = "blendshapes";
        for (const auto& s : j.at("blendshapes")) {
            Eigen::MatrixX3d e(static_cast<Eigen::Index>(s.size()), 3);
            for (std::size_t i = 0; i < s.size(); ++i) e.row(static_cast<Eigen::Index>(i)) = detail::json_vec(s[i]).transpose();
            t.blendshapes.push_back(e);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("rig field '" + field + "': " + e.what());
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        if (msg.rfind("rig field", 0) == 0) throw;
        throw std::invalid_argument("rig field '" + field + "': " + msg);
    }
    t.validate();
    return t;
}

inline void write_rig(const fs::path& p, const RiggedTemplate& t) { detail::write_json(p, rig_to_json(t)); }

/// Loads, validates, and scales the template into the canonical cube.
inline RiggedTemplate read_rig(const fs::path& p)
{
    RiggedTemplate t = rig_from_json(detail::read_json(p));
    fit_template_to_cube(t);
    return t;
}

}  // namespace dtet
