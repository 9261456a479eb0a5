#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtwin/decimate.hpp"
#include "dtwin/forest.hpp"
#include "dtwin/metrics.hpp"
#include "dtwin/model.hpp"

namespace dtwin {

inline constexpr double poly_ratio_floor = 1e-3;
inline constexpr int default_max_attempts = 10;

/// Quality/poly forest input: 9 high-poly shape metrics followed by the encoded params.
std::vector<double> config_features(const ShapeMetrics& high, const DecimationParams& params);
std::vector<std::string> config_feature_names();

/// Gate input: high metrics, low metrics, ratios, similarity (9 + 9 + 9 + 3).
std::vector<double> gate_features(const ShapeMetrics& high, const ShapeMetrics& low, const ShapeRatios& ratios,
                                  const SimilarityMetrics& similarity);
std::vector<std::string> gate_feature_names();

/// Accept/reject decision on a (high, low) pair given its gate features.
class GateModel {
public:
    virtual ~GateModel() = default;
    virtual bool accept(std::span<const double> features) const = 0;
};

/// Accepts when the classifier's majority class is 1.
class ForestGate : public GateModel {
public:
    explicit ForestGate(std::shared_ptr<const Forest> forest);
    bool accept(std::span<const double> features) const override;

private:
    std::shared_ptr<const Forest> forest_;
};

class ConstantGate : public GateModel {
public:
    explicit ConstantGate(bool verdict) : verdict_(verdict) {}
    bool accept(std::span<const double>) const override { return verdict_; }

private:
    bool verdict_;
};

struct PipelineModels {
    std::shared_ptr<const Forest> quality;
    std::shared_ptr<const Forest> poly;
    std::shared_ptr<const GateModel> gate;
};

/// Loads quality.json, poly.json and gate.json from a directory.
PipelineModels load_pipeline_models(const std::filesystem::path& dir);

struct ScoredConfig {
    std::size_t param_id = 0;  // index into the grid
    DecimationParams params;
    double predicted_quality = 0.0;
    double predicted_poly_ratio = 0.0;
    double score = 0.0;  // quality / max(poly_ratio, poly_ratio_floor)
};

/// One entry per grid combo, by descending score; equal scores keep grid order.
std::vector<ScoredConfig> score_configurations(const ShapeMetrics& high, const ParamGrid& grid,
                                               const Forest& quality, const Forest& poly);

struct Attempt {
    std::size_t param_id = 0;
    std::size_t faces_after = 0;
    SimilarityMetrics similarity;
    bool accepted = false;
    std::string note;  // why the trial was rejected before reaching the gate
};

struct PartReport {
    std::string part_id;
    std::size_t duplicates = 0;
    std::vector<Attempt> attempts;
    bool accepted = false;
    bool fallback = false;
    std::string skipped;  // non-empty when metrics could not be computed
    std::optional<std::size_t> chosen_param_id;
    std::optional<DecimationParams> chosen_params;
    std::size_t faces_before = 0;
    std::size_t faces_after = 0;
    SimilarityMetrics similarity;  // of the accepted trial
    double wall_seconds = 0.0;
};

struct ReduceConfig {
    SimilarityConfig similarity{10000, 1, false};
    int max_attempts = default_max_attempts;
};

struct PartResult {
    TriangleMesh mesh;
    PartReport report;
};

/// Reduction loop for one mesh: try scored configs in order until the gate accepts,
/// falling back to the input after max_attempts rejections.
PartResult reduce_part(const TriangleMesh& mesh, const PipelineModels& models, const ParamGrid& grid,
                       const ReduceConfig& config = {});

struct ReductionReport {
    std::vector<PartReport> parts;  // one per duplicate group, in group order
    std::size_t total_parts = 0;
    std::size_t unique_parts = 0;
    std::size_t duplicate_parts = 0;
    std::size_t reduce_calls = 0;
    std::size_t accepted = 0;
    std::size_t fallbacks = 0;
    std::size_t skipped = 0;
    std::size_t faces_before = 0;  // summed over all mesh parts, duplicates included
    std::size_t faces_after = 0;
    int workers = 1;
    double wall_seconds = 0.0;
};

struct PipelineResult {
    Model model;
    ReductionReport report;
};

/// Duplicate detection, parallel reduction of group originals over `workers`
/// threads, and rebuild. Output does not depend on `workers`.
PipelineResult run_pipeline(const Model& model, const PipelineModels& models, const ParamGrid& grid, int workers,
                            const ReduceConfig& config = {});

json params_to_json(const DecimationParams& p);
DecimationParams params_from_json(const json& j);
json part_report_to_json(const PartReport& r, bool timing);
/// Deterministic report; wall times only when `timing` is set.
json report_to_json(const ReductionReport& r, bool timing);

}  // namespace dtwin
