// dtwin: command-line front end for the toolkit.
#include <CLI11.hpp>

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dtwin/decimate.hpp"
#include "dtwin/error.hpp"
#include "dtwin/expression.hpp"
#include "dtwin/forest.hpp"
#include "dtwin/json_io.hpp"
#include "dtwin/metrics.hpp"
#include "dtwin/model.hpp"
#include "dtwin/pipeline.hpp"
#include "dtwin/player.hpp"
#include "dtwin/process.hpp"
#include "dtwin/scenario.hpp"
#include "dtwin/training.hpp"

namespace fs = std::filesystem;
using namespace dtwin;

namespace {

enum Exit { ok = 0, invalid = 1, usage = 2, io = 3 };

bool g_pretty = false;

std::string dump(const json& j) { return g_pretty ? j.dump(2) : j.dump(); }

// Whole report to a file (atomically) or to stdout.
void emit(const json& j, const std::string& out) {
    if (out.empty()) {
        std::cout << dump(j) << "\n";
    } else {
        write_text_file(out, dump(j) + "\n");
    }
}

void write_mesh_atomic(const fs::path& path, const TriangleMesh& mesh) {
    std::ostringstream s;
    write_obj(s, mesh);
    write_text_file(path, s.str());
}

// Builds a directory next to the target and swaps it in once complete.
class StagedDir {
public:
    explicit StagedDir(fs::path target) : target_(std::move(target)) {
        staging_ = target_;
        staging_ += ".partial";
        fs::remove_all(staging_);
        fs::create_directories(staging_);
    }
    ~StagedDir() {
        std::error_code ec;
        if (!committed_) fs::remove_all(staging_, ec);
    }
    const fs::path& path() const { return staging_; }
    void commit() {
        std::error_code ec;
        fs::remove_all(target_, ec);
        fs::rename(staging_, target_, ec);
        if (ec) throw IoError("cannot move output into place: " + target_.string() + ": " + ec.message());
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path staging_;
    bool committed_ = false;
};

json summary_to_json(const MeshSummary& s) {
    return {{"vertices", s.vertex_count},
            {"faces", s.face_count},
            {"area", s.area},
            {"volume", s.volume},
            {"bbox_min", s.bbox.min},
            {"bbox_max", s.bbox.max},
            {"watertight", s.watertight}};
}

template <class T>
json named_values(const T& v) {
    json j = json::object();
    const auto vals = v.values();
    const auto& names = T::names();
    for (std::size_t i = 0; i < T::size; ++i) j[names[i]] = vals[i];
    return j;
}

json similarity_json(const SimilarityMetrics& s) {
    json j = named_values(s);
    j["open_mesh"] = s.open_mesh;
    return j;
}

struct ObjectSource {
    int synthetic = 0;
    std::string dir;
    std::string manifest;
};

void add_object_flags(CLI::App* cmd, ObjectSource& src) {
    auto* syn = cmd->add_option("--synthetic", src.synthetic, "Use N procedural training parts");
    auto* dir = cmd->add_option("--objects", src.dir, "Directory of OBJ files (id = file stem)");
    auto* man = cmd->add_option("--manifest", src.manifest, "Pair manifest; objects are its high-poly meshes");
    syn->excludes(dir)->excludes(man);
    dir->excludes(man);
}

std::vector<TrainingObject> load_objects(const ObjectSource& src) {
    if (src.synthetic > 0) return synthetic_objects(src.synthetic);
    std::vector<TrainingObject> out;
    if (!src.dir.empty()) {
        if (!fs::is_directory(src.dir)) throw IoError("not a directory: " + src.dir);
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(src.dir)) {
            if (e.is_regular_file() && e.path().extension() == ".obj") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.push_back({f.stem().string(), read_obj(f)});
    } else if (!src.manifest.empty()) {
        const json m = read_json_file(src.manifest);
        if (!m.is_array()) throw ValidationError(src.manifest + ": pair manifest must be a list");
        const fs::path base = fs::path(src.manifest).parent_path();
        std::set<std::string> seen;
        for (const auto& row : m) {
            const auto id = row.at("object_id").get<std::string>();
            if (!seen.insert(id).second) continue;
            out.push_back({id, read_obj(base / row.at("high_path").get<std::string>())});
        }
    }
    if (out.empty()) throw ValidationError("no training objects: give --synthetic, --objects or --manifest");
    return out;
}

std::vector<std::pair<std::string, double>> parse_bindings(const std::vector<std::string>& raw) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& b : raw) {
        const auto eq = b.find('=');
        if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--bind", "expected name=value, got '" + b + "'");
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(b.substr(eq + 1), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != b.size() - eq - 1) {
            throw CLI::ValidationError("--bind", "not a number in '" + b + "'");
        }
        out.emplace_back(b.substr(0, eq), v);
    }
    return out;
}

void set_workers(int workers) {
    if (workers < 1) throw ValidationError("--workers must be >= 1");
    omp_set_num_threads(workers);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Digital-twin toolkit: mesh reduction, scenarios, processes and playback"};
    app.set_config("--config", "", "TOML/INI file mirroring the command-line flags");
    app.add_flag("--pretty", g_pretty, "Indent JSON output");
    app.require_subcommand(1);
    app.fallthrough();
    app.failure_message(CLI::FailureMessage::help);

    std::function<int()> action;

    // metrics
    std::string m_high, m_low, m_out;
    std::size_t m_samples = 10000;
    std::uint64_t m_seed = 1;
    auto* metrics = app.add_subcommand("metrics", "Shape metrics of a mesh, plus ratios and similarity against a low-poly version");
    metrics->add_option("high", m_high, "High-poly OBJ")->required();
    metrics->add_option("low", m_low, "Low-poly OBJ");
    metrics->add_option("--samples", m_samples, "Surface samples for similarity")->capture_default_str();
    metrics->add_option("--seed", m_seed, "Sampling seed")->capture_default_str();
    metrics->add_option("--out", m_out, "Write the report here instead of stdout");
    metrics->callback([&] {
        action = [&] {
            const TriangleMesh high = read_obj(m_high);
            const ShapeProfile hp = shape_profile(high);
            json j = {{"high", {{"summary", summary_to_json(hp.summary)}, {"metrics", named_values(hp.metrics)}}}};
            if (!m_low.empty()) {
                const TriangleMesh low = read_obj(m_low);
                const ShapeProfile lp = shape_profile(low);
                const ShapeRatios r = compute_shape_ratios(hp, lp);
                const SimilarityMetrics s = compute_similarity(high, low, {m_samples, m_seed, false});
                j["low"] = {{"summary", summary_to_json(lp.summary)}, {"metrics", named_values(lp.metrics)}};
                j["ratios"] = named_values(r);
                j["ratios"]["flagged"] = r.flagged;
                j["similarity"] = similarity_json(s);
            }
            emit(j, m_out);
            return ok;
        };
    });

    // reduce-one
    std::string r1_in, r1_out, r1_report;
    DecimationParams r1_params;
    std::optional<std::size_t> r1_param_id;
    auto* reduce_one = app.add_subcommand("reduce-one", "Decimate one OBJ with explicit parameters");
    reduce_one->add_option("input", r1_in, "Input OBJ")->required();
    reduce_one->add_option("--out", r1_out, "Output OBJ")->required();
    reduce_one->add_option("--ratio", r1_params.target_ratio, "Fraction of faces to keep")->capture_default_str();
    reduce_one->add_option("--edge-weight", r1_params.edge_weight, "0, 0.5 or 1")->capture_default_str();
    reduce_one->add_option("--normal-limit", r1_params.normal_limit_deg, "15, 45 or 90 degrees")->capture_default_str();
    reduce_one->add_flag("--preserve-boundary", r1_params.preserve_boundary, "Pin boundary vertices");
    reduce_one->add_option("--param-id", r1_param_id, "Take parameters from the default grid row instead");
    reduce_one->add_option("--report", r1_report, "Write the report here instead of stdout");
    reduce_one->callback([&] {
        action = [&] {
            DecimationParams p = r1_params;
            if (r1_param_id) {
                const ParamGrid g = default_grid();
                if (*r1_param_id >= g.size()) throw ValidationError("--param-id out of range");
                p = g.combos[*r1_param_id];
            }
            p.validate();
            const TriangleMesh mesh = read_obj(r1_in);
            const DecimationResult res = decimate(mesh, p);
            write_mesh_atomic(r1_out, res.mesh);
            emit({{"input", r1_in},
                  {"output", r1_out},
                  {"params", params_to_json(p)},
                  {"faces_before", res.faces_before},
                  {"faces_after", res.faces_after},
                  {"collapses", res.collapses},
                  {"infeasible", res.infeasible}},
                 r1_report);
            return ok;
        };
    });

    // reduce
    std::string rd_model, rd_forests, rd_out;
    int rd_workers = 1;
    ReduceConfig rd_cfg;
    auto* reduce = app.add_subcommand("reduce", "Reduce every part of a model with trained forests");
    reduce->add_option("--model", rd_model, "Model manifest")->required();
    reduce->add_option("--forests", rd_forests, "Directory with quality.json, poly.json, gate.json")->required();
    reduce->add_option("--workers", rd_workers, "Worker threads")->capture_default_str();
    reduce->add_option("--out", rd_out, "Output directory")->required();
    reduce->add_option("--max-attempts", rd_cfg.max_attempts, "Configurations tried per part")->capture_default_str();
    reduce->add_option("--samples", rd_cfg.similarity.samples, "Surface samples for similarity")->capture_default_str();
    reduce->add_option("--seed", rd_cfg.similarity.seed, "Sampling seed")->capture_default_str();
    reduce->callback([&] {
        action = [&] {
            const Model model = load_model(rd_model);
            const PipelineModels models = load_pipeline_models(rd_forests);
            const PipelineResult res = run_pipeline(model, models, default_grid(), rd_workers, rd_cfg);
            StagedDir out(rd_out);
            save_model(res.model, out.path(), "model.json");
            write_json_file(out.path() / "report.json", report_to_json(res.report, false), true);
            write_json_file(out.path() / "timing.json", report_to_json(res.report, true), true);
            out.commit();
            json totals = report_to_json(res.report, false)["totals"];
            totals["manifest"] = (fs::path(rd_out) / "model.json").generic_string();
            emit(totals, "");
            return ok;
        };
    });

    // grid
    auto* grid = app.add_subcommand("grid", "List the decimation parameter grid, one JSON row per line");
    grid->callback([&] {
        action = [&] {
            const ParamGrid g = default_grid();
            for (std::size_t i = 0; i < g.size(); ++i) {
                json row = params_to_json(g.combos[i]);
                row["param_id"] = i;
                std::cout << row.dump() << "\n";
            }
            return ok;
        };
    });

    // train
    ObjectSource tr_src;
    std::string tr_labels, tr_out, tr_save_labels;
    int tr_replicates = 5, tr_workers = 1;
    ForestConfig tr_forest;
    std::size_t tr_samples = 2000;
    auto* train = app.add_subcommand("train", "Measure objects, label them and fit the quality, poly and gate forests");
    add_object_flags(train, tr_src);
    train->add_option("--labels", tr_labels, "Label CSV; without it the built-in oracle rater labels every pair");
    train->add_option("--replicates", tr_replicates, "Oracle judgments per pair")->capture_default_str();
    train->add_option("--save-labels", tr_save_labels, "Also write the labels used as CSV");
    train->add_option("--trees", tr_forest.tree_count, "Trees per forest")->capture_default_str();
    train->add_option("--max-depth", tr_forest.max_depth, "Tree depth limit")->capture_default_str();
    train->add_option("--seed", tr_forest.seed, "Seed for bootstraps, sampling and the oracle")->capture_default_str();
    train->add_option("--samples", tr_samples, "Surface samples per similarity measurement")->capture_default_str();
    train->add_option("--workers", tr_workers, "Threads for measuring and fitting")->capture_default_str();
    train->add_option("--out", tr_out, "Output directory for the forests")->required();
    train->callback([&] {
        action = [&] {
            set_workers(tr_workers);
            const bool par = tr_workers > 1;
            const auto objects = load_objects(tr_src);
            const ParamGrid g = default_grid();
            const auto measured = measure_objects(objects, g, {tr_samples, tr_forest.seed, par}, par);
            std::vector<QualityLabel> labels;
            if (!tr_labels.empty()) {
                labels = read_labels_csv(tr_labels);
            } else {
                OracleLabeler oracle;
                oracle.seed = tr_forest.seed;
                labels = oracle.label_all(measured, tr_replicates);
            }
            const TrainingData td = build_training_dataset(measured, labels);
            const Forest quality = train_forest(td.quality, tr_forest, ForestKind::regressor, par);
            const Forest poly = train_forest(td.poly, tr_forest, ForestKind::regressor, par);
            const Forest gate = train_forest(td.gate, tr_forest, ForestKind::classifier, par);
            StagedDir out(tr_out);
            save_forest(quality, out.path() / "quality.json");
            save_forest(poly, out.path() / "poly.json");
            save_forest(gate, out.path() / "gate.json");
            out.commit();
            if (!tr_save_labels.empty()) write_labels_csv(tr_save_labels, labels);
            emit({{"objects", objects.size()},
                  {"grid", g.size()},
                  {"labels", labels.size()},
                  {"rows", {{"quality", td.quality.rows()}, {"poly", td.poly.rows()}, {"gate", td.gate.rows()}}},
                  {"skipped_gate_rows", td.skipped_gate_rows},
                  {"oob", {{"quality_r2", quality.oob_score}, {"poly_r2", poly.oob_score}, {"gate_accuracy", gate.oob_score}}},
                  {"out", tr_out}},
                 "");
            return ok;
        };
    });

    // label-export
    ObjectSource le_src;
    std::string le_out;
    int le_replicates = 5;
    std::size_t le_params = 0;
    auto* label_export = app.add_subcommand("label-export", "Write high/low mesh pairs and a pair manifest for raters");
    add_object_flags(label_export, le_src);
    label_export->add_option("--replicates", le_replicates, "Judgments requested per pair")->capture_default_str();
    label_export->add_option("--params", le_params, "Only the first N grid rows (0 = all)")->capture_default_str();
    label_export->add_option("--out", le_out, "Output directory")->required();
    label_export->callback([&] {
        action = [&] {
            const auto objects = load_objects(le_src);
            ParamGrid g = default_grid();
            if (le_params > 0 && le_params < g.size()) g.combos.resize(le_params);
            StagedDir out(le_out);
            const json manifest = export_label_tasks(objects, g, le_replicates, out.path());
            out.commit();
            emit({{"pairs", manifest.size()},
                  {"objects", objects.size()},
                  {"manifest", (fs::path(le_out) / "manifest.json").generic_string()}},
                 "");
            return ok;
        };
    });

    // label-import
    std::string li_labels, li_manifest, li_out;
    auto* label_import = app.add_subcommand("label-import", "Validate a label CSV, optionally against a pair manifest");
    label_import->add_option("labels", li_labels, "Label CSV (object_id,param_id,replicate,rater,label)")->required();
    label_import->add_option("--manifest", li_manifest, "Pair manifest the labels must refer to");
    label_import->add_option("--out", li_out, "Write the normalized CSV here");
    label_import->callback([&] {
        action = [&] {
            const auto labels = read_labels_csv(li_labels);
            std::map<std::string, std::size_t> by_label;
            std::set<std::pair<std::string, std::size_t>> pairs;
            for (const auto& l : labels) {
                ++by_label[label_name(l.label)];
                pairs.emplace(l.object_id, l.param_id);
            }
            json unmatched = json::array();
            if (!li_manifest.empty()) {
                const json m = read_json_file(li_manifest);
                if (!m.is_array()) throw ValidationError(li_manifest + ": pair manifest must be a list");
                std::set<std::tuple<std::string, std::size_t, int>> known;
                for (const auto& row : m) {
                    known.emplace(row.at("object_id").get<std::string>(), row.at("param_id").get<std::size_t>(),
                                  row.at("replicate").get<int>());
                }
                for (const auto& l : labels) {
                    if (!known.count({l.object_id, l.param_id, l.replicate})) {
                        unmatched.push_back({{"object_id", l.object_id}, {"param_id", l.param_id}, {"replicate", l.replicate}});
                    }
                }
            }
            if (!unmatched.empty()) {
                for (const auto& u : unmatched) {
                    std::cout << json{{"path", li_labels}, {"code", "unknown_pair"}, {"message", u.dump()}}.dump() << "\n";
                }
                return invalid;
            }
            if (!li_out.empty()) write_labels_csv(li_out, labels);
            emit({{"labels", labels.size()}, {"pairs", pairs.size()}, {"by_label", by_label}}, "");
            return ok;
        };
    });

    // compile
    std::string cp_in, cp_out, cp_format = "json";
    auto* compile = app.add_subcommand("compile", "Parse a process document and print its canonical form");
    compile->add_option("process", cp_in, "Process document")->required();
    compile->add_option("--format", cp_format, "json or text")->check(CLI::IsMember({"json", "text"}))->capture_default_str();
    compile->add_option("--out", cp_out, "Write here instead of stdout");
    compile->callback([&] {
        action = [&] {
            const ProcessModel p = load_process(cp_in);
            if (cp_format == "text") {
                const std::string text = print_process(p);
                if (cp_out.empty()) {
                    std::cout << text;
                } else {
                    write_text_file(cp_out, text);
                }
            } else {
                emit(process_to_json(p), cp_out);
            }
            return ok;
        };
    });

    // check
    std::string ck_scenario, ck_process;
    auto* check = app.add_subcommand("check", "Validate a scenario and, optionally, a process against it; JSON-lines diagnostics");
    check->add_option("--scenario", ck_scenario, "Scenario JSON")->required();
    check->add_option("--process", ck_process, "Process document");
    check->callback([&] {
        action = [&] {
            const Scenario s = load_scenario(ck_scenario);
            std::vector<Issue> issues = validate_scenario(s);
            if (!ck_process.empty()) {
                const auto more = check_scenario(load_process(ck_process), s);
                issues.insert(issues.end(), more.begin(), more.end());
            }
            for (const auto& i : issues) std::cout << issue_to_json(i).dump() << "\n";
            return issues.empty() ? ok : invalid;
        };
    });

    // data eval
    std::string de_expr;
    std::vector<std::string> de_binds;
    auto* data = app.add_subcommand("data", "Data-engine utilities");
    data->require_subcommand(1);
    auto* eval = data->add_subcommand("eval", "Evaluate one expression");
    eval->add_option("expression", de_expr, "Expression text")->required();
    eval->add_option("--bind", de_binds, "name=value, repeatable");
    eval->callback([&] {
        action = [&] {
            std::map<std::string, double> env;
            for (const auto& [k, v] : parse_bindings(de_binds)) env[k] = v;
            const Expression e = Expression::parse(de_expr);
            emit({{"expression", e.canonical()}, {"identifiers", e.identifiers()}, {"value", e.evaluate(env)}}, "");
            return ok;
        };
    });

    // run
    std::string rn_scenario, rn_process, rn_script, rn_report;
    ScriptOptions rn_opts;
    auto* run = app.add_subcommand("run", "Play an event script against a scenario and process");
    run->add_option("--scenario", rn_scenario, "Scenario JSON")->required();
    run->add_option("--process", rn_process, "Process document")->required();
    run->add_option("--script", rn_script, "Event script (JSON lines)")->required();
    run->add_option("--report", rn_report, "Write the progress report here instead of stdout");
    run->add_option("--max-dt", rn_opts.max_dt, "Longest single tick, seconds")->capture_default_str();
    run->callback([&] {
        action = [&] {
            Session session = Session::create(load_scenario(rn_scenario), load_process(rn_process));
            std::ifstream script(rn_script);
            if (!script) throw IoError("cannot open file: " + rn_script);
            run_script(session, script, rn_opts);
            emit(session.progress_report(), rn_report);
            return ok;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    auto fail = [](const char* kind, const std::string& msg, int code) {
        std::cerr << json{{"error", kind}, {"message", msg}}.dump() << "\n";
        return code;
    };
    try {
        return action();
    } catch (const SessionError& e) {
        for (const auto& i : e.issues()) std::cout << issue_to_json(i).dump() << "\n";
        return fail("session", e.what(), invalid);
    } catch (const IoError& e) {
        return fail("io", e.what(), io);
    } catch (const fs::filesystem_error& e) {
        return fail("io", e.what(), io);
    } catch (const MathError& e) {
        return fail("math", e.what(), invalid);
    } catch (const ParseError& e) {
        return fail("parse", e.what(), invalid);
    } catch (const ValidationError& e) {
        return fail("validation", e.what(), invalid);
    } catch (const CLI::ValidationError& e) {
        return fail("usage", e.what(), usage);
    } catch (const json::exception& e) {
        return fail("validation", e.what(), invalid);
    }
}
