#include "dtwin/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "dtwin/error.hpp"

namespace dtwin {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

json similarity_to_json(const SimilarityMetrics& s) {
    return {{"D", s.D}, {"dN", s.dN}, {"dTheta", s.dTheta}, {"open_mesh", s.open_mesh}};
}

}  // namespace

std::vector<double> config_features(const ShapeMetrics& high, const DecimationParams& params) {
    std::vector<double> f;
    f.reserve(ShapeMetrics::size + encoded_param_count);
    for (double v : high.values()) f.push_back(v);
    for (double v : encode_params(params)) f.push_back(v);
    return f;
}

std::vector<std::string> config_feature_names() {
    std::vector<std::string> n;
    for (const char* s : ShapeMetrics::names()) n.emplace_back(s);
    for (const char* s : encoded_param_names()) n.emplace_back(s);
    return n;
}

std::vector<double> gate_features(const ShapeMetrics& high, const ShapeMetrics& low, const ShapeRatios& ratios,
                                  const SimilarityMetrics& similarity) {
    std::vector<double> f;
    f.reserve(2 * ShapeMetrics::size + ShapeRatios::size + SimilarityMetrics::size);
    for (double v : high.values()) f.push_back(v);
    for (double v : low.values()) f.push_back(v);
    for (double v : ratios.values()) f.push_back(v);
    for (double v : similarity.values()) f.push_back(v);
    return f;
}

std::vector<std::string> gate_feature_names() {
    std::vector<std::string> n;
    for (const char* s : ShapeMetrics::names()) n.push_back(std::string("high_") + s);
    for (const char* s : ShapeMetrics::names()) n.push_back(std::string("low_") + s);
    for (const char* s : ShapeRatios::names()) n.emplace_back(s);
    for (const char* s : SimilarityMetrics::names()) n.emplace_back(s);
    return n;
}

ForestGate::ForestGate(std::shared_ptr<const Forest> forest) : forest_(std::move(forest)) {
    if (!forest_ || forest_->kind != ForestKind::classifier) throw ValidationError("gate needs a classification forest");
    if (forest_->feature_count() != gate_feature_names().size()) {
        throw ValidationError("gate forest feature layout mismatch: expected " +
                              std::to_string(gate_feature_names().size()) + " features, got " +
                              std::to_string(forest_->feature_count()));
    }
}

bool ForestGate::accept(std::span<const double> features) const { return forest_->classify(features).first == 1; }

PipelineModels load_pipeline_models(const std::filesystem::path& dir) {
    PipelineModels m;
    m.quality = std::make_shared<const Forest>(load_forest(dir / "quality.json"));
    m.poly = std::make_shared<const Forest>(load_forest(dir / "poly.json"));
    m.gate = std::make_shared<ForestGate>(std::make_shared<const Forest>(load_forest(dir / "gate.json")));
    return m;
}

std::vector<ScoredConfig> score_configurations(const ShapeMetrics& high, const ParamGrid& grid,
                                               const Forest& quality, const Forest& poly) {
    const auto expected = config_feature_names().size();
    for (const Forest* f : {&quality, &poly}) {
        if (f->feature_count() != expected || f->kind != ForestKind::regressor) {
            throw ValidationError("feature layout mismatch: scoring forests need " + std::to_string(expected) +
                                  " regression features (9 shape metrics + 4 encoded params)");
        }
    }
    std::vector<ScoredConfig> out;
    out.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto x = config_features(high, grid.combos[i]);
        ScoredConfig s;
        s.param_id = i;
        s.params = grid.combos[i];
        s.predicted_quality = std::clamp(quality.predict(x), 0.0, 1.0);
        s.predicted_poly_ratio = std::clamp(poly.predict(x), 0.0, 1.0);
        s.score = s.predicted_quality / std::max(s.predicted_poly_ratio, poly_ratio_floor);
        out.push_back(s);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ScoredConfig& a, const ScoredConfig& b) { return a.score > b.score; });
    return out;
}

PartResult reduce_part(const TriangleMesh& mesh, const PipelineModels& models, const ParamGrid& grid,
                       const ReduceConfig& config) {
    const auto t0 = Clock::now();
    PartResult result;
    auto& rep = result.report;
    rep.faces_before = mesh.faces.size();
    ShapeProfile high;
    try {
        high = shape_profile(mesh);
    } catch (const ValidationError& e) {
        rep.skipped = e.what();
        rep.faces_after = rep.faces_before;
        result.mesh = mesh;
        rep.wall_seconds = seconds_since(t0);
        return result;
    }

    const auto ranked = score_configurations(high.metrics, grid, *models.quality, *models.poly);
    const auto tries = std::min<std::size_t>(static_cast<std::size_t>(std::max(config.max_attempts, 0)), ranked.size());
    for (std::size_t k = 0; k < tries; ++k) {
        const auto& cand = ranked[k];
        Attempt a;
        a.param_id = cand.param_id;
        const DecimationResult dec = decimate(mesh, cand.params);
        a.faces_after = dec.faces_after;
        try {
            const ShapeProfile low = shape_profile(dec.mesh);
            const ShapeRatios ratios = compute_shape_ratios(high, low);
            a.similarity = compute_similarity(mesh, dec.mesh, config.similarity);
            a.accepted = models.gate->accept(gate_features(high.metrics, low.metrics, ratios, a.similarity));
        } catch (const ValidationError& e) {
            a.note = e.what();
        }
        rep.attempts.push_back(a);
        if (a.accepted) {
            rep.accepted = true;
            rep.chosen_param_id = cand.param_id;
            rep.chosen_params = cand.params;
            rep.faces_after = dec.faces_after;
            rep.similarity = a.similarity;
            result.mesh = dec.mesh;
            rep.wall_seconds = seconds_since(t0);
            return result;
        }
    }
    rep.fallback = true;
    rep.faces_after = rep.faces_before;
    result.mesh = mesh;
    rep.wall_seconds = seconds_since(t0);
    return result;
}

PipelineResult run_pipeline(const Model& model, const PipelineModels& models, const ParamGrid& grid, int workers,
                            const ReduceConfig& config) {
    if (workers < 1) throw ValidationError("workers must be >= 1");
    if (!models.quality || !models.poly || !models.gate) throw ValidationError("pipeline models are incomplete");
    const auto t0 = Clock::now();
    const auto groups = find_duplicates(model);
    std::vector<const Part*> originals;
    for (const auto& g : groups) originals.push_back(find_part(model, g.original));

    std::vector<PartResult> results(groups.size());
    std::atomic<std::size_t> calls{0};
    const auto n = static_cast<std::int64_t>(groups.size());
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        calls.fetch_add(1, std::memory_order_relaxed);
        results[idx] = reduce_part(*originals[idx]->mesh, models, grid, config);
    }

    std::map<std::string, ReducedMesh> reduced;
    ReductionReport report;
    report.workers = workers;
    report.reduce_calls = calls.load();
    report.unique_parts = groups.size();
    report.total_parts = mesh_part_count(model);
    report.duplicate_parts = report.total_parts - report.unique_parts;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        auto& r = results[i];
        r.report.part_id = groups[i].original;
        r.report.duplicates = groups[i].duplicates.size();
        if (r.report.fallback) {
            reduced[groups[i].original] = {nullptr, true};
        } else if (!r.report.accepted) {
            reduced[groups[i].original] = {originals[i]->mesh, false};
        } else {
            reduced[groups[i].original] = {std::make_shared<const TriangleMesh>(std::move(r.mesh)), false};
        }
        report.accepted += r.report.accepted;
        report.fallbacks += r.report.fallback;
        report.skipped += !r.report.skipped.empty();
        report.faces_before += r.report.faces_before * groups[i].size();
        report.faces_after += r.report.faces_after * groups[i].size();
        report.parts.push_back(std::move(r.report));
    }
    PipelineResult out{rebuild_model(model, reduced, groups), std::move(report)};
    out.report.wall_seconds = seconds_since(t0);
    return out;
}

json params_to_json(const DecimationParams& p) {
    return {{"target_ratio", p.target_ratio},
            {"edge_weight", p.edge_weight},
            {"normal_limit_deg", p.normal_limit_deg},
            {"preserve_boundary", p.preserve_boundary}};
}

DecimationParams params_from_json(const json& j) {
    DecimationParams p;
    p.target_ratio = j.at("target_ratio").get<double>();
    p.edge_weight = j.value("edge_weight", 0.0);
    p.normal_limit_deg = j.value("normal_limit_deg", 90.0);
    p.preserve_boundary = j.value("preserve_boundary", false);
    p.validate();
    return p;
}

json part_report_to_json(const PartReport& r, bool timing) {
    json attempts = json::array();
    for (const auto& a : r.attempts) {
        json aj = {{"param_id", a.param_id},
                   {"faces_after", a.faces_after},
                   {"similarity", similarity_to_json(a.similarity)},
                   {"accepted", a.accepted}};
        if (!a.note.empty()) aj["note"] = a.note;
        attempts.push_back(aj);
    }
    json j = {{"part_id", r.part_id},
              {"duplicates", r.duplicates},
              {"attempts_used", r.attempts.size()},
              {"accepted", r.accepted},
              {"fallback", r.fallback},
              {"faces_before", r.faces_before},
              {"faces_after", r.faces_after},
              {"attempts", attempts}};
    if (!r.skipped.empty()) j["skipped"] = r.skipped;
    if (r.chosen_params) {
        j["chosen_param_id"] = *r.chosen_param_id;
        j["chosen_params"] = params_to_json(*r.chosen_params);
        j["similarity"] = similarity_to_json(r.similarity);
    }
    if (timing) j["wall_seconds"] = r.wall_seconds;
    return j;
}

json report_to_json(const ReductionReport& r, bool timing) {
    json parts = json::array();
    for (const auto& p : r.parts) parts.push_back(part_report_to_json(p, timing));
    json j = {{"totals",
               {{"total_parts", r.total_parts},
                {"unique_parts", r.unique_parts},
                {"duplicate_parts", r.duplicate_parts},
                {"reduce_calls", r.reduce_calls},
                {"accepted", r.accepted},
                {"fallbacks", r.fallbacks},
                {"skipped", r.skipped},
                {"faces_before", r.faces_before},
                {"faces_after", r.faces_after}}},
              {"parts", parts}};
    if (timing) {
        j["totals"]["wall_seconds"] = r.wall_seconds;
        j["totals"]["workers"] = r.workers;
    }
    return j;
}

}  // namespace dtwin
