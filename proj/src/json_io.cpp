#include "dtwin/json_io.hpp"

#include <fstream>
#include <sstream>

#include "dtwin/error.hpp"

namespace dtwin {

void to_json(json& j, const Vec3& v) { j = json::array({v.x, v.y, v.z}); }

void from_json(const json& j, Vec3& v) {
    if (!j.is_array() || j.size() != 3) throw ValidationError("expected a 3-element array");
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number()) throw ValidationError("expected numeric vector components");
        v[i] = j[i].get<double>();
    }
}

void to_json(json& j, const Transform& t) {
    j = json{{"position", t.position}, {"rotation_deg", t.rotation_deg}, {"scale", t.scale}};
}

void from_json(const json& j, Transform& t) {
    if (!j.is_object()) throw ValidationError("transform must be an object");
    t = Transform{};
    if (j.contains("position")) t.position = j.at("position").get<Vec3>();
    if (j.contains("rotation_deg")) t.rotation_deg = j.at("rotation_deg").get<Vec3>();
    if (j.contains("scale")) t.scale = j.at("scale").get<Vec3>();
    if (!t.valid()) throw ValidationError("transform scale components must be > 0");
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": invalid JSON: " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write file: " + path.string());
        out << text;
        if (!out) throw IoError("write failed: " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot write file: " + path.string() + ": " + ec.message());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j, bool pretty) {
    write_text_file(path, j.dump(pretty ? 2 : -1) + "\n");
}

}  // namespace dtwin
