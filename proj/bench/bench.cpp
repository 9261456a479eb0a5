// Timings of the parallel kernels against their serial references.
// Usage: dtwin_bench [--threads N] [--repeat R]

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <memory>

#include "dtwin/decimate.hpp"
#include "dtwin/forest.hpp"
#include "dtwin/metrics.hpp"
#include "dtwin/model.hpp"
#include "dtwin/pipeline.hpp"
#include "dtwin/primitives.hpp"
#include "dtwin/random.hpp"
#include "dtwin/training.hpp"

using namespace dtwin;
namespace fs = std::filesystem;

namespace {

double best_of(int repeat, const std::function<void()>& fn) {
    double best = 1e300;
    for (int i = 0; i < repeat; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void row(const char* name, const char* base, double tb, const char* fast, double tf, bool same) {
    std::printf("%-22s %-18s %9.4f s   %-18s %9.4f s   speedup %5.2fx   %s\n", name, base, tb, fast, tf, tb / tf,
                same ? "identical" : "MISMATCH");
}

Dataset regression_data(std::size_t n) {
    Dataset d;
    d.feature_names = {"x1", "x2", "x3", "x4", "x5", "x6"};
    Rng rng = make_rng(5);
    for (std::size_t i = 0; i < n; ++i) {
        double x[6];
        for (double& v : x) v = unit_double(rng);
        d.add(x, 3 * x[0] + std::sin(6 * x[1]) + 0.1 * standard_normal(rng));
    }
    return d;
}

std::shared_ptr<const Forest> constant_forest(double v) {
    Forest f;
    f.feature_names = config_feature_names();
    f.trees.push_back(Tree{{-1}, {0.0}, {-1}, {-1}, {v}});
    return std::make_shared<const Forest>(f);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dtwin kernel benchmarks"};
    int threads = 4, repeat = 3;
    app.add_option("--threads", threads, "Threads for the parallel variants")->capture_default_str();
    app.add_option("--repeat", repeat, "Best of R runs")->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    omp_set_num_threads(threads);
    std::printf("threads %d (hardware %d)\n", threads, omp_get_num_procs());

    {
        const TriangleMesh high = primitives::bumpy_sphere(4, 0.1, 5);
        const TriangleMesh low = decimate(high, {0.2, 0.0, 90.0, false}).mesh;
        const SimilarityConfig cfg{10000, 1, true};
        SimilarityMetrics a, b;
        const double tb = best_of(repeat, [&] { a = compute_similarity_reference(high, low, cfg); });
        const double tf = best_of(repeat, [&] { b = compute_similarity(high, low, cfg); });
        row("similarity", "brute force", tb, "bvh + openmp", tf, a.values() == b.values());
    }
    {
        const Dataset d = regression_data(4000);
        ForestConfig cfg;
        std::string a, b;
        const double tb = best_of(repeat, [&] { a = forest_to_json(train_forest(d, cfg, ForestKind::regressor, false)).dump(); });
        const double tf = best_of(repeat, [&] { b = forest_to_json(train_forest(d, cfg, ForestKind::regressor, true)).dump(); });
        row("forest training", "serial", tb, "openmp", tf, a == b);
    }
    {
        const fs::path dir = fs::temp_directory_path() / "dtwin_bench_assembly";
        fs::remove_all(dir);
        const Model model = load_model(write_synthetic_assembly(dir, 39, 106));
        const PipelineModels models{constant_forest(0.8), constant_forest(0.4), std::make_shared<ConstantGate>(true)};
        std::string a, b;
        const double tb = best_of(repeat, [&] {
            a = report_to_json(run_pipeline(model, models, default_grid(), 1).report, false).dump();
        });
        const double tf = best_of(repeat, [&] {
            b = report_to_json(run_pipeline(model, models, default_grid(), threads).report, false).dump();
        });
        row("pipeline (106 parts)", "1 worker", tb, "workers", tf, a == b);
        fs::remove_all(dir);
    }
    return 0;
}
