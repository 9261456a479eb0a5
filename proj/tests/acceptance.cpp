// Acceptance report: one PASS/FAIL line per criterion with its runtime.
// Exits 0 unless --strict is given and something failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dtwin/decimate.hpp"
#include "dtwin/expression.hpp"
#include "dtwin/forest.hpp"
#include "dtwin/metrics.hpp"
#include "dtwin/model.hpp"
#include "dtwin/pipeline.hpp"
#include "dtwin/player.hpp"
#include "dtwin/primitives.hpp"
#include "dtwin/process.hpp"
#include "dtwin/random.hpp"
#include "dtwin/scenario.hpp"
#include "dtwin/training.hpp"
#include "expr_corpus.hpp"
#include "mutations.hpp"
#include "tmpdir.hpp"

using namespace dtwin;
namespace prim = dtwin::primitives;
namespace fs = std::filesystem;

namespace {

const fs::path case_dir = fs::path(DTWIN_FIXTURE_DIR) / "case_study";

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += (ok ? "" : "MISS ") + what;
    }
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// Training corpus shared by criteria 4 and 7.
struct Trained {
    std::vector<ObjectMeasurements> measured;
    TrainingData data;
    PipelineModels models;
    double measure_seconds = 0.0;
    double train_seconds = 0.0;
};

Trained& trained() {
    static std::unique_ptr<Trained> t;
    if (t) return *t;
    t = std::make_unique<Trained>();
    auto t0 = Clock::now();
    t->measured = measure_objects(synthetic_objects(37), default_grid(), SimilarityConfig{});
    t->data = build_training_dataset(t->measured, OracleLabeler{}.label_all(t->measured, 5));
    t->measure_seconds = since(t0);
    t0 = Clock::now();
    const ForestConfig cfg;
    t->models.quality = std::make_shared<const Forest>(train_forest(t->data.quality, cfg, ForestKind::regressor));
    t->models.poly = std::make_shared<const Forest>(train_forest(t->data.poly, cfg, ForestKind::regressor));
    t->models.gate = std::make_shared<ForestGate>(
        std::make_shared<const Forest>(train_forest(t->data.gate, cfg, ForestKind::classifier)));
    t->train_seconds = since(t0);
    return *t;
}

Outcome analytic_metrics() {
    Outcome o;
    const ShapeMetrics cube = compute_shape_metrics(prim::unit_cube());
    o.require(std::fabs(cube.phi - 0.80600) <= 1e-4, fmt("cube phi %.6f", cube.phi));
    o.require(std::fabs(cube.rho_box - 1.0) <= 1e-9, fmt("cube rho_box %.12f", cube.rho_box));
    o.require(cube.alpha == 1.5, fmt("cube alpha %.17g", cube.alpha));
    const ShapeMetrics ico = compute_shape_metrics(prim::icosphere(3));
    o.require(ico.phi >= 0.98, fmt("icosphere(3) phi %.5f", ico.phi));
    return o;
}

std::vector<double> all_quantities(const TriangleMesh& high, const TriangleMesh& low) {
    const ShapeProfile hp = shape_profile(high), lp = shape_profile(low);
    std::vector<double> q;
    for (double v : hp.metrics.values()) q.push_back(v);
    for (double v : compute_shape_ratios(hp, lp).values()) q.push_back(v);
    for (double v : compute_similarity(high, low).values()) q.push_back(v);
    return q;
}

Outcome scale_invariance() {
    Outcome o;
    const std::vector<std::pair<std::string, TriangleMesh>> meshes = {
        {"box", prim::box({2.0, 1.0, 0.5}, 3)},
        {"icosphere", prim::icosphere(3)},
        {"torus", prim::torus(1.0, 0.3, 24, 12)},
        {"cylinder", prim::cylinder(0.5, 2.0, 24, 4)},
        {"bumpy", prim::bumpy_sphere(3, 0.15, 4)},
    };
    double worst = 0.0;
    std::size_t count = 0;
    for (const auto& [name, high] : meshes) {
        const TriangleMesh low = decimate(high, {0.35, 0.5, 45.0, false}).mesh;
        const auto ref = all_quantities(high, low);
        count = ref.size();
        for (double s : {0.01, 100.0}) {
            const auto got = all_quantities(scaled(high, s), scaled(low, s));
            for (std::size_t i = 0; i < ref.size(); ++i) {
                const double den = std::max({std::fabs(ref[i]), std::fabs(got[i]), 1e-9});
                worst = std::max(worst, std::fabs(ref[i] - got[i]) / den);
            }
        }
    }
    o.require(count == 21, fmt("%zu quantities per mesh", count));
    o.require(worst <= 1e-6, fmt("worst relative deviation %.3g over 5 meshes x {0.01, 100}", worst));
    return o;
}

Outcome decimation() {
    Outcome o;
    const TriangleMesh ico = prim::icosphere(3);
    const double v0 = mesh_summary(ico).volume;
    const auto half = decimate(ico, {0.5, 0.0, 90.0, false});
    const double dv = std::fabs(mesh_summary(half.mesh).volume - v0) / v0;
    const double d = compute_similarity(ico, half.mesh).D;
    o.require(half.faces_after >= 576 && half.faces_after <= 704, fmt("%zu -> %zu faces", ico.faces.size(), half.faces_after));
    o.require(dv < 0.02, fmt("|dV| %.3f%%", 100 * dv));
    o.require(d < 0.01, fmt("D %.5f", d));
    std::size_t prev_faces = ico.faces.size();
    double prev_d = 0.0;
    bool faces_ok = true, d_ok = true;
    std::string seq;
    for (double r : {0.8, 0.4, 0.2, 0.1}) {
        const auto res = decimate(ico, {r, 0.0, 90.0, false});
        const double dr = compute_similarity(ico, res.mesh).D;
        faces_ok = faces_ok && res.faces_after < prev_faces;
        d_ok = d_ok && dr >= prev_d;
        seq += fmt(" %zu/%.4f", res.faces_after, dr);
        prev_faces = res.faces_after;
        prev_d = dr;
    }
    o.require(faces_ok && d_ok, "faces/D across 0.8,0.4,0.2,0.1:" + seq);
    return o;
}

Outcome bookkeeping() {
    Outcome o;
    o.require(default_grid().size() == 108, fmt("grid %zu combos", default_grid().size()));
    const Trained& t = trained();
    o.require(t.data.poly.rows() == 3996, fmt("poly rows %zu", t.data.poly.rows()));
    o.require(t.data.quality.rows() == 19980, fmt("quality rows %zu", t.data.quality.rows()));
    o.require(t.data.gate.rows() + t.data.skipped_gate_rows == 19980,
              fmt("gate rows %zu + %zu skipped", t.data.gate.rows(), t.data.skipped_gate_rows));
    o.detail += fmt("; measuring %.1f s", t.measure_seconds);
    return o;
}

Outcome forest() {
    Outcome o;
    auto linear = [](std::size_t n, std::uint64_t seed) {
        Dataset d;
        d.feature_names = {"x1", "x2", "x3"};
        Rng rng = make_rng(seed);
        for (std::size_t i = 0; i < n; ++i) {
            const double x[3] = {unit_double(rng), unit_double(rng), unit_double(rng)};
            d.add(x, 3.0 * x[0] + 0.05 * standard_normal(rng));
        }
        return d;
    };
    const Dataset train = linear(1000, 11), test = linear(500, 12);
    const Forest reg = train_forest(train, {}, ForestKind::regressor);
    std::vector<double> pred;
    for (std::size_t i = 0; i < test.rows(); ++i) pred.push_back(reg.predict(test.row(i)));
    const double r2 = r_squared(test.targets, pred);
    o.require(r2 >= 0.95, fmt("held-out R2 %.4f", r2));

    auto separable = [](std::size_t n, std::uint64_t seed) {
        Dataset d;
        d.feature_names = {"x1", "x2", "x3", "x4"};
        Rng rng = make_rng(seed);
        while (d.rows() < n) {
            const double x[4] = {unit_double(rng), unit_double(rng), unit_double(rng), unit_double(rng)};
            const double s = x[0] + x[1] - 1.0;
            if (std::fabs(s) < 0.05) continue;
            d.add(x, s > 0 ? 1.0 : 0.0);
        }
        return d;
    };
    const Dataset ctrain = separable(1000, 21), ctest = separable(500, 22);
    const Forest cls = train_forest(ctrain, {}, ForestKind::classifier);
    std::size_t right = 0;
    for (std::size_t i = 0; i < ctest.rows(); ++i) right += cls.classify(ctest.row(i)).first == ctest.targets[i];
    const double acc = static_cast<double>(right) / static_cast<double>(ctest.rows());
    o.require(acc >= 0.98, fmt("held-out accuracy %.4f", acc));

    const std::string a = forest_to_json(train_forest(train, {}, ForestKind::regressor, true)).dump();
    const std::string b = forest_to_json(train_forest(train, {}, ForestKind::regressor, false)).dump();
    o.require(a == b && a == forest_to_json(reg).dump(), "retrain bit-identical (parallel and serial)");
    return o;
}

bool same_models(const Model& a, const Model& b) {
    const auto pa = mesh_parts(a), pb = mesh_parts(b);
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i]->id != pb[i]->id || !(*pa[i]->mesh == *pb[i]->mesh) || pa[i]->fallback != pb[i]->fallback) return false;
    }
    return true;
}

Outcome pipeline() {
    Outcome o;
    TempDir dir;
    const Model model = load_model(write_synthetic_assembly(dir.path(), 39, 106));
    const PipelineModels& models = trained().models;
    const ParamGrid grid = default_grid();

    auto t0 = Clock::now();
    const auto one = run_pipeline(model, models, grid, 1);
    const double t1 = since(t0);
    t0 = Clock::now();
    const auto four = run_pipeline(model, models, grid, 4);
    const double t4 = since(t0);

    o.require(one.report.reduce_calls == 39, fmt("reduce calls %zu", one.report.reduce_calls));
    o.require(mesh_part_count(one.model) == 106, fmt("output parts %zu", mesh_part_count(one.model)));
    o.require(stored_mesh_count(one.model) == 39, fmt("stored meshes %zu", stored_mesh_count(one.model)));

    const PipelineModels reject{models.quality, models.poly, std::make_shared<ConstantGate>(false)};
    const auto r = reduce_part(*mesh_parts(model).front()->mesh, reject, grid);
    o.require(r.report.attempts.size() == 10 && r.report.fallback,
              fmt("always-reject: %zu attempts, fallback %d", r.report.attempts.size(), r.report.fallback));

    const bool same = report_to_json(one.report, false) == report_to_json(four.report, false) &&
                      same_models(one.model, four.model);
    o.require(same, "workers 1 and 4 identical");
    o.require(t4 <= 0.6 * t1, fmt("4 workers %.2f s vs 1 worker %.2f s (ratio %.2f, need <= 0.6; %u hardware threads)",
                                  t4, t1, t4 / t1, std::thread::hardware_concurrency()));
    return o;
}

Outcome gating() {
    Outcome o;
    const Trained& t = trained();
    const OracleLabeler oracle;
    int good = 0;
    std::string seq;
    for (const auto& obj : synthetic_objects(10, 100)) {
        const auto r = reduce_part(obj.mesh, t.models, default_grid());
        const bool ok = r.report.accepted && r.report.attempts.size() <= 2 && oracle.acceptable(r.report.similarity);
        good += ok;
        seq += ok ? "+" : "-";
    }
    o.require(good >= 9, fmt("%d/10 accepted within 2 attempts [%s]", good, seq.c_str()));
    o.detail += fmt("; training set %.1f s, fitting %.1f s", t.measure_seconds, t.train_seconds);
    return o;
}

Outcome checker() {
    Outcome o;
    const auto sc = load_scenario(case_dir / "scenario.json");
    const auto pr = load_process(case_dir / "lab.proc");
    const auto mutants = mutation::corpus(sc, pr, 10);
    std::size_t detected = 0, stray = 0;
    for (const auto& m : mutants) {
        const auto issues = mutation::diagnose(m);
        detected += !issues.empty();
        for (const auto& i : issues) stray += !mutation::attributable(i, m);
    }
    std::size_t clean = validate_scenario(sc).size() + check_scenario(pr, sc).size();
    o.require(mutants.size() == 30, fmt("%zu mutants", mutants.size()));
    o.require(detected == mutants.size(), fmt("%zu detected", detected));
    o.require(stray == 0 && clean == 0, fmt("%zu unattributable diagnostics, %zu on the clean fixture", stray, clean));
    return o;
}

Outcome playthrough() {
    Outcome o;
    Session s = Session::create(load_scenario(case_dir / "scenario.json"), load_process(case_dir / "lab.proc"));
    std::ifstream in(case_dir / "script.jsonl");
    run_script(s, in);
    o.require(s.done(), fmt("%zu steps completed, done %d", s.completed().size(), s.done()));
    o.require(s.readings().size() == 8, fmt("%zu readings", s.readings().size()));
    bool exact = s.readings().size() == 8;
    std::string currents;
    for (std::size_t k = 0; k < s.readings().size(); ++k) {
        const auto& v = s.readings()[k].values;
        const auto it = v.find("current");
        const double want = 5.0 * static_cast<double>(k + 1) / 2.0;  // V / R, R = 2
        const bool hit = it != v.end() && it->second && *it->second == want;
        exact = exact && hit;
        currents += it != v.end() && it->second ? fmt(" %g", *it->second) : " ?";
    }
    o.require(exact, "currents" + currents + " A");
    return o;
}

Outcome expressions() {
    Outcome o;
    corpus::Generator gen(2024);
    double worst = 0.0;
    int errors = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto tree = gen.expr(1 + i % 6);
        const double want = corpus::eval(*tree, gen.env());
        try {
            const double got = Expression::parse(gen.render(*tree)).evaluate(gen.env());
            worst = std::max(worst, std::fabs(got - want) / std::max(1.0, std::fabs(want)));
        } catch (const std::exception&) {
            ++errors;
        }
    }
    o.require(errors == 0 && worst <= 1e-12, fmt("1000 expressions, %d errors, worst relative error %.3g", errors, worst));
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    bool strict = false;
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--strict") == 0) {
            strict = true;
        } else {
            only.push_back(std::atoi(argv[i]));
        }
    }
    const std::vector<Criterion> criteria = {
        {1, "analytic metrics", 5, analytic_metrics},
        {2, "scale invariance", 30, scale_invariance},
        {3, "decimation", 30, decimation},
        {4, "grid and bookkeeping", 600, bookkeeping},
        {5, "forest", 60, forest},
        {6, "pipeline", 300, pipeline},
        {7, "end-to-end gating", 600, gating},
        {8, "process checker", 5, checker},
        {9, "case-study playthrough", 5, playthrough},
        {10, "expression corpus", 5, expressions},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const double secs = since(t0);
        if (secs > c.budget_seconds) {
            o.pass = false;
            o.detail += fmt("; MISS over budget %.0f s", c.budget_seconds);
        }
        failed += !o.pass;
        std::printf("%s %2d %-24s %8.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d failed\n", failed);
    return strict && failed ? 1 : 0;
}
