#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "dtwin/mesh.hpp"

namespace dtwin {

/// One point of the decimator's parameter space.
struct DecimationParams {
    double target_ratio = 0.5;       // fraction of faces to keep, (0, 1]
    double edge_weight = 0.0;        // {0, 0.5, 1}: weight of squared edge length in the cost
    double normal_limit_deg = 90.0;  // {15, 45, 90}: max face-normal rotation per collapse
    bool preserve_boundary = false;  // boundary vertices never move

    /// Throws ValidationError when a field is outside its enumeration.
    void validate() const;
    std::string label() const;

    friend bool operator==(const DecimationParams&, const DecimationParams&) = default;
};

struct DecimationResult {
    TriangleMesh mesh;
    std::size_t faces_before = 0;
    std::size_t faces_after = 0;
    std::size_t collapses = 0;
    bool infeasible = false;  // face target not reachable; best achievable mesh returned
};

/// Greedy quadric-error edge collapse. Deterministic: equal costs resolve to the
/// lowest (min vertex, max vertex) edge.
DecimationResult decimate(const TriangleMesh& mesh, const DecimationParams& params);

struct ParamAxes {
    std::vector<double> target_ratios;
    std::vector<double> edge_weights;
    std::vector<double> normal_limits_deg;
    std::vector<bool> preserve_boundary;
};

struct ParamGrid {
    ParamAxes axes;
    std::vector<DecimationParams> combos;  // row-major over the axes as listed

    std::size_t size() const { return combos.size(); }
};

ParamAxes default_axes();
ParamGrid make_grid(const ParamAxes& axes);
/// 6 ratios x 3 edge weights x 3 normal limits x 2 boundary modes = 108 combinations.
ParamGrid default_grid();

/// Forest feature encoding: target ratio as-is, enumerated axes as ordinal indices.
inline constexpr std::size_t encoded_param_count = 4;
std::array<double, encoded_param_count> encode_params(const DecimationParams& params);
const std::array<const char*, encoded_param_count>& encoded_param_names();

}  // namespace dtwin
