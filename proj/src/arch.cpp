#include "crownfill/arch.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "crownfill/error.hpp"

namespace crownfill {

const char* jaw_name(Jaw jaw) { return jaw == Jaw::Upper ? "upper" : "lower"; }

Jaw jaw_from_name(const std::string& name) {
    if (name == "upper") return Jaw::Upper;
    if (name == "lower") return Jaw::Lower;
    throw ValidationError("jaw must be \"upper\" or \"lower\", got \"" + name + "\"");
}

bool is_valid_fdi(int code) {
    if (code == 0) return true;
    int quadrant = code / 10, tooth = code % 10;
    return quadrant >= 1 && quadrant <= 4 && tooth >= 1 && tooth <= 8;
}

void LabeledArch::validate() const {
    if (labels.size() != mesh.vertices.size())
        throw ValidationError("LabeledArch: label count " + std::to_string(labels.size()) +
                              " does not match vertex count " +
                              std::to_string(mesh.vertices.size()));
    for (int code : labels)
        if (!is_valid_fdi(code))
            throw ValidationError("LabeledArch: unknown FDI code " + std::to_string(code));
}

std::vector<int> LabeledArch::tooth_fdis() const {
    std::set<int> seen;
    for (int code : labels)
        if (code != 0) seen.insert(code);
    return {seen.begin(), seen.end()};
}

LabeledArch load_arch(const std::string& mesh_path, const std::string& label_path,
                      int* dropped_faces) {
    LabeledArch arch;
    arch.mesh = load_obj(mesh_path);

    std::ifstream is(label_path);
    if (!is) throw IoError("load_arch: cannot open " + label_path);
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const std::exception& e) {
        throw ValidationError("load_arch: unparseable label file " + label_path + ": " + e.what());
    }
    if (!doc.contains("labels") || !doc["labels"].is_array())
        throw ValidationError("load_arch: missing \"labels\" array in " + label_path);
    arch.labels = doc["labels"].get<std::vector<int>>();
    arch.jaw = jaw_from_name(doc.value("jaw", "lower"));
    arch.arch_id = doc.value("arch_id", mesh_path);

    arch.validate();
    int dropped = arch.mesh.drop_degenerate_faces();
    if (dropped_faces) *dropped_faces = dropped;
    return arch;
}

void save_arch(const LabeledArch& arch, const std::string& mesh_path,
               const std::string& label_path) {
    arch.validate();
    save_obj(arch.mesh, mesh_path);
    nlohmann::json doc;
    doc["labels"] = arch.labels;
    doc["jaw"] = jaw_name(arch.jaw);
    doc["arch_id"] = arch.arch_id;
    std::ofstream os(label_path);
    if (!os) throw IoError("save_arch: cannot open " + label_path);
    os << doc.dump(0) << '\n';
    if (!os) throw IoError("save_arch: write failed for " + label_path);
}

}  // namespace crownfill
