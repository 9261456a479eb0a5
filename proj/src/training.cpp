#include "dtwin/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "dtwin/csv.hpp"
#include "dtwin/error.hpp"
#include "dtwin/pipeline.hpp"
#include "dtwin/primitives.hpp"

namespace dtwin {

namespace fs = std::filesystem;

namespace {

constexpr const char* label_names[] = {"ruined", "bad", "good", "perfect"};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string pad3(std::size_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%03zu", v);
    return buf;
}

}  // namespace

const char* label_name(Label l) { return label_names[static_cast<int>(l)]; }

Label parse_label(const std::string& s) {
    for (int i = 0; i < 4; ++i) {
        if (s == label_names[i]) return static_cast<Label>(i);
    }
    throw ValidationError("unknown label '" + s + "' (expected ruined, bad, good or perfect)");
}

double label_value(Label l) { return static_cast<double>(static_cast<int>(l)) / 3.0; }

std::vector<QualityLabel> read_labels_csv(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const char* cols[] = {"object_id", "param_id", "replicate", "rater", "label"};
    int idx[5];
    for (int i = 0; i < 5; ++i) {
        idx[i] = t.column(cols[i]);
        if (idx[i] < 0) throw ValidationError(path.string() + ": missing column '" + cols[i] + "'");
    }
    std::vector<QualityLabel> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const int line = t.row_lines[r];
        if (row.size() != t.header.size()) throw ParseError(path.string() + ": wrong column count", line, 1);
        QualityLabel q;
        q.object_id = row[static_cast<std::size_t>(idx[0])];
        double pid = 0, rep = 0;
        if (!parse_double(row[static_cast<std::size_t>(idx[1])], pid) || pid < 0 || pid != std::floor(pid)) {
            throw ParseError(path.string() + ": bad param_id", line, idx[1] + 1);
        }
        if (!parse_double(row[static_cast<std::size_t>(idx[2])], rep) || rep < 1 || rep != std::floor(rep)) {
            throw ParseError(path.string() + ": bad replicate", line, idx[2] + 1);
        }
        q.param_id = static_cast<std::size_t>(pid);
        q.replicate = static_cast<int>(rep);
        q.rater = row[static_cast<std::size_t>(idx[3])];
        try {
            q.label = parse_label(row[static_cast<std::size_t>(idx[4])]);
        } catch (const ValidationError& e) {
            throw ParseError(path.string() + ": " + e.what(), line, idx[4] + 1);
        }
        out.push_back(std::move(q));
    }
    return out;
}

void write_labels_csv(const fs::path& path, const std::vector<QualityLabel>& labels) {
    std::string out = "object_id,param_id,replicate,rater,label\n";
    for (const auto& q : labels) {
        out += csv_field(q.object_id) + "," + std::to_string(q.param_id) + "," + std::to_string(q.replicate) + "," +
               csv_field(q.rater) + "," + label_name(q.label) + "\n";
    }
    write_text_file(path, out);
}

std::vector<ObjectMeasurements> measure_objects(const std::vector<TrainingObject>& objects, const ParamGrid& grid,
                                                const SimilarityConfig& similarity, bool parallel) {
    std::vector<ObjectMeasurements> out(objects.size());
    std::vector<ShapeProfile> high(objects.size());
    for (std::size_t o = 0; o < objects.size(); ++o) {
        high[o] = shape_profile(objects[o].mesh);
        out[o].id = objects[o].id;
        out[o].high = high[o].metrics;
        out[o].pairs.resize(grid.size());
    }
    SimilarityConfig inner = similarity;
    inner.parallel = false;
    const auto total = static_cast<std::int64_t>(objects.size() * grid.size());
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
    for (std::int64_t k = 0; k < total; ++k) {
        const auto o = static_cast<std::size_t>(k) / grid.size();
        const auto p = static_cast<std::size_t>(k) % grid.size();
        const auto& mesh = objects[o].mesh;
        const DecimationResult dec = decimate(mesh, grid.combos[p]);
        PairMeasurement& m = out[o].pairs[p];
        m.params = grid.combos[p];
        m.faces_before = dec.faces_before;
        m.faces_after = dec.faces_after;
        try {
            const ShapeProfile low = shape_profile(dec.mesh);
            m.low = low.metrics;
            m.ratios = compute_shape_ratios(high[o], low);
            m.similarity = compute_similarity(mesh, dec.mesh, inner);
        } catch (const ValidationError&) {
            m.low_degenerate = true;
        }
    }
    return out;
}

TrainingData build_training_dataset(const std::vector<ObjectMeasurements>& measured,
                                    const std::vector<QualityLabel>& labels) {
    TrainingData td;
    td.quality.feature_names = config_feature_names();
    td.poly.feature_names = config_feature_names();
    td.gate.feature_names = gate_feature_names();
    std::map<std::string, std::size_t> index;
    for (std::size_t o = 0; o < measured.size(); ++o) {
        if (!index.emplace(measured[o].id, o).second) throw ValidationError("duplicate object id " + measured[o].id);
    }
    for (const auto& obj : measured) {
        for (const auto& m : obj.pairs) {
            td.poly.add(config_features(obj.high, m.params),
                        static_cast<double>(m.faces_after) / static_cast<double>(m.faces_before));
        }
    }
    for (const auto& q : labels) {
        const auto it = index.find(q.object_id);
        if (it == index.end() || q.param_id >= measured[it->second].pairs.size()) {
            throw ValidationError("label references unknown pair (object '" + q.object_id + "', param " +
                                  std::to_string(q.param_id) + ")");
        }
        const auto& obj = measured[it->second];
        const auto& m = obj.pairs[q.param_id];
        td.quality.add(config_features(obj.high, m.params), label_value(q.label));
        if (m.low_degenerate) {
            ++td.skipped_gate_rows;
            continue;
        }
        td.gate.add(gate_features(obj.high, m.low, m.ratios, m.similarity), label_accepts(q.label) ? 1.0 : 0.0);
    }
    return td;
}

TrainingData build_training_dataset(const std::vector<TrainingObject>& objects, const ParamGrid& grid,
                                    const std::vector<QualityLabel>& labels, const SimilarityConfig& similarity) {
    return build_training_dataset(measure_objects(objects, grid, similarity), labels);
}

Label OracleLabeler::judge(const SimilarityMetrics& s, const std::string& object_id, std::size_t param_id,
                           int replicate) const {
    Rng rng = make_rng(seed ^ fnv1a(object_id), param_id * 64 + static_cast<std::uint64_t>(replicate));
    const double d = s.D * std::exp(perception_sigma * standard_normal(rng));
    const double n = s.dN * std::exp(perception_sigma * standard_normal(rng));
    const double severity = std::max(d / max_D, n / max_dN);
    if (d < max_D && n < max_dN) return severity < perfect_below ? Label::perfect : Label::good;
    return severity < ruined_above ? Label::bad : Label::ruined;
}

std::vector<QualityLabel> OracleLabeler::label_all(const std::vector<ObjectMeasurements>& measured,
                                                   int replicates) const {
    std::vector<QualityLabel> out;
    for (const auto& obj : measured) {
        for (std::size_t p = 0; p < obj.pairs.size(); ++p) {
            for (int r = 1; r <= replicates; ++r) {
                const auto& m = obj.pairs[p];
                // A degenerate reduction is judged ruined without looking.
                const Label l = m.low_degenerate ? Label::ruined : judge(m.similarity, obj.id, p, r);
                out.push_back({obj.id, p, r, "oracle" + std::to_string(r), l});
            }
        }
    }
    return out;
}

json export_label_tasks(const std::vector<TrainingObject>& objects, const ParamGrid& grid, int replicates,
                        const fs::path& out_dir) {
    if (replicates < 1) throw ValidationError("replicates must be >= 1");
    json manifest = json::array();
    for (const auto& obj : objects) {
        const fs::path rel_dir = fs::path("meshes") / obj.id;
        const fs::path high_rel = rel_dir / "high.obj";
        write_obj(out_dir / high_rel, obj.mesh);
        for (std::size_t p = 0; p < grid.size(); ++p) {
            const fs::path low_rel = rel_dir / ("p" + pad3(p) + ".obj");
            write_obj(out_dir / low_rel, decimate(obj.mesh, grid.combos[p]).mesh);
            for (int r = 1; r <= replicates; ++r) {
                manifest.push_back({{"pair_id", obj.id + "-p" + pad3(p) + "-r" + std::to_string(r)},
                                    {"object_id", obj.id},
                                    {"param_id", p},
                                    {"replicate", r},
                                    {"high_path", high_rel.generic_string()},
                                    {"low_path", low_rel.generic_string()}});
            }
        }
    }
    write_json_file(out_dir / "manifest.json", manifest);
    return manifest;
}

std::vector<TrainingObject> synthetic_objects(int count, int first_index) {
    std::vector<TrainingObject> out;
    for (int i = 0; i < count; ++i) {
        out.push_back({"obj" + pad3(static_cast<std::size_t>(first_index + i)),
                       primitives::synthetic_part(first_index + i)});
    }
    return out;
}

fs::path write_synthetic_assembly(const fs::path& dir, int unique, int total, std::uint64_t seed) {
    if (unique < 1 || total < unique) throw ValidationError("assembly needs 1 <= unique <= total");
    Rng rng = make_rng(seed, 0xa55e);
    // Owner mesh for every part slot: each unique mesh once, the rest random repeats.
    std::vector<int> owner(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) {
        owner[static_cast<std::size_t>(i)] =
            i < unique ? i : static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(unique)));
    }
    for (int i = total - 1; i > 0; --i) {
        std::swap(owner[static_cast<std::size_t>(i)],
                  owner[uniform_index(rng, static_cast<std::uint64_t>(i) + 1)]);
    }
    for (int u = 0; u < unique; ++u) {
        write_obj(dir / "meshes" / ("m" + pad3(static_cast<std::size_t>(u)) + ".obj"), primitives::synthetic_part(u));
    }
    auto random_transform = [&]() {
        json t;
        t["position"] = {10 * unit_double(rng) - 5, 10 * unit_double(rng) - 5, 10 * unit_double(rng) - 5};
        t["rotation_deg"] = {360 * unit_double(rng) - 180, 180 * unit_double(rng) - 90, 360 * unit_double(rng) - 180};
        t["scale"] = {1, 1, 1};
        return t;
    };
    json roots = json::array();
    std::vector<int> copies(static_cast<std::size_t>(unique), 0);
    constexpr int per_assembly = 12;
    for (int start = 0; start < total; start += per_assembly) {
        json children = json::array();
        for (int i = start; i < std::min(total, start + per_assembly); ++i) {
            const int u = owner[static_cast<std::size_t>(i)];
            const int copy = copies[static_cast<std::size_t>(u)]++;
            std::string path = "meshes/m" + pad3(static_cast<std::size_t>(u)) + ".obj";
            // Every other duplicate gets its own byte-identical file, so detection
            // cannot lean on shared paths.
            if (copy % 2 == 1) {
                path = "meshes/m" + pad3(static_cast<std::size_t>(u)) + "_copy" + std::to_string(copy) + ".obj";
                write_obj(dir / path, primitives::synthetic_part(u));
            }
            children.push_back({{"id", "part" + pad3(static_cast<std::size_t>(i))},
                                {"transform", random_transform()},
                                {"mesh", path}});
        }
        roots.push_back({{"id", "asm" + pad3(static_cast<std::size_t>(start / per_assembly))},
                         {"transform", random_transform()},
                         {"children", children}});
    }
    const json manifest = {{"name", "synthetic_assembly"},
                           {"transform", {{"position", {0, 0, 0}}, {"rotation_deg", {0, 0, 0}}, {"scale", {1, 1, 1}}}},
                           {"parts", roots}};
    const fs::path path = dir / "model.json";
    write_json_file(path, manifest);
    return path;
}

}  // namespace dtwin
