#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dtwin/decimate.hpp"
#include "dtwin/forest.hpp"
#include "dtwin/metrics.hpp"
#include "dtwin/model.hpp"
#include "dtwin/random.hpp"

namespace dtwin {

enum class Label { ruined = 0, bad = 1, good = 2, perfect = 3 };

const char* label_name(Label l);
/// Throws ValidationError for anything outside the four names.
Label parse_label(const std::string& s);
/// ruined, bad, good, perfect -> 0, 1/3, 2/3, 1.
double label_value(Label l);
inline bool label_accepts(Label l) { return l == Label::good || l == Label::perfect; }

struct QualityLabel {
    std::string object_id;
    std::size_t param_id = 0;
    int replicate = 1;
    std::string rater;
    Label label = Label::ruined;

    friend bool operator==(const QualityLabel&, const QualityLabel&) = default;
};

/// Columns object_id,param_id,replicate,rater,label.
std::vector<QualityLabel> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const std::vector<QualityLabel>& labels);

struct TrainingObject {
    std::string id;
    TriangleMesh mesh;
};

/// Everything measured for one (object, combo) pair. Computed once and shared by
/// all replicate judgments of the pair.
struct PairMeasurement {
    DecimationParams params;
    std::size_t faces_before = 0;
    std::size_t faces_after = 0;
    ShapeMetrics low;
    ShapeRatios ratios;
    SimilarityMetrics similarity;
    bool low_degenerate = false;
};

struct ObjectMeasurements {
    std::string id;
    ShapeMetrics high;
    std::vector<PairMeasurement> pairs;  // indexed by param id
};

/// Decimates every object with every combo and measures the results. OpenMP over
/// (object, combo); output order is fixed.
std::vector<ObjectMeasurements> measure_objects(const std::vector<TrainingObject>& objects, const ParamGrid& grid,
                                                const SimilarityConfig& similarity, bool parallel = true);

struct TrainingData {
    Dataset quality;  // one row per judgment, target = label value
    Dataset poly;     // one row per (object, combo), target = faces_after / faces_before
    Dataset gate;     // one row per judgment, target = 1 when the label accepts
    std::size_t skipped_gate_rows = 0;  // judgments on degenerate low meshes
};

/// Throws ValidationError for labels naming an unknown object or param id.
TrainingData build_training_dataset(const std::vector<ObjectMeasurements>& measured,
                                    const std::vector<QualityLabel>& labels);
TrainingData build_training_dataset(const std::vector<TrainingObject>& objects, const ParamGrid& grid,
                                    const std::vector<QualityLabel>& labels, const SimilarityConfig& similarity);

/// Stand-in rater: a pair is acceptable iff D < 0.01 and dN < 10 degrees. The
/// grade follows the severity s = max(D / max_D, dN / max_dN): perfect below
/// `perfect_below`, good below 1, bad below `ruined_above`, else ruined. Each rater
/// perceives D and dN with a small multiplicative error, so replicates of
/// borderline pairs can disagree.
struct OracleLabeler {
    double max_D = 0.01;
    double max_dN = 10.0;
    double perfect_below = 0.5;
    double ruined_above = 1.5;
    double perception_sigma = 0.05;
    std::uint64_t seed = 1;

    bool acceptable(const SimilarityMetrics& s) const { return s.D < max_D && s.dN < max_dN; }
    Label judge(const SimilarityMetrics& s, const std::string& object_id, std::size_t param_id, int replicate) const;
    std::vector<QualityLabel> label_all(const std::vector<ObjectMeasurements>& measured, int replicates) const;
};

/// Writes high/low OBJ pairs under out_dir/meshes and out_dir/manifest.json, a list of
/// {pair_id, object_id, param_id, replicate, high_path, low_path}. Returns the manifest.
json export_label_tasks(const std::vector<TrainingObject>& objects, const ParamGrid& grid, int replicates,
                        const std::filesystem::path& out_dir);

/// Training corpus of procedural parts, ids "obj000".."objNNN".
std::vector<TrainingObject> synthetic_objects(int count, int first_index = 0);

/// Writes a model with `total` mesh parts of which `unique` have distinct meshes,
/// grouped into sub-assemblies. Returns the manifest path.
std::filesystem::path write_synthetic_assembly(const std::filesystem::path& dir, int unique, int total,
                                               std::uint64_t seed = 1);

}  // namespace dtwin
