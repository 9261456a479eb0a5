#include "dtwin/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dtwin/csv.hpp"
#include "dtwin/error.hpp"
#include "dtwin/random.hpp"

namespace dtwin {

namespace {

constexpr const char* forest_magic = "dtwin-forest";
constexpr int forest_version = 1;

const char* kind_name(ForestKind k) { return k == ForestKind::regressor ? "regressor" : "classifier"; }

int resolved_mtry(const ForestConfig& config, ForestKind kind, std::size_t d) {
    if (config.features_per_split > 0) return std::min<int>(config.features_per_split, static_cast<int>(d));
    const double dd = static_cast<double>(d);
    const int m = kind == ForestKind::classifier ? static_cast<int>(std::ceil(std::sqrt(dd)))
                                                 : static_cast<int>(std::ceil(dd / 3.0));
    return std::clamp(m, 1, static_cast<int>(d));
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Dataset& data, const ForestConfig& config, ForestKind kind, int class_count, int mtry,
                Rng& rng)
        : data_(data), config_(config), kind_(kind), class_count_(class_count), mtry_(mtry), rng_(rng) {}

    Tree build(std::vector<std::uint32_t> rows) {
        grow(rows, 0);
        return std::move(tree_);
    }

private:
    double x(std::uint32_t r, int f) const { return data_.features[r * data_.cols() + static_cast<std::size_t>(f)]; }
    double y(std::uint32_t r) const { return data_.targets[r]; }

    double leaf_value(const std::vector<std::uint32_t>& rows) const {
        if (kind_ == ForestKind::regressor) {
            double s = 0.0;
            for (auto r : rows) s += y(r);
            return s / static_cast<double>(rows.size());
        }
        std::vector<std::size_t> counts(static_cast<std::size_t>(class_count_), 0);
        for (auto r : rows) ++counts[static_cast<std::size_t>(y(r))];
        return static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }

    bool pure(const std::vector<std::uint32_t>& rows) const {
        for (auto r : rows) {
            if (y(r) != y(rows.front())) return false;
        }
        return true;
    }

    /// Impurity-decrease gain written as sum(stat_child) - stat_parent, where stat is
    /// sum^2/n (regression) or sum_k count_k^2/n (classification).
    Split best_split_on(const std::vector<std::uint32_t>& rows, int f) const {
        Split best;
        const std::size_t n = rows.size();
        const auto min_leaf = static_cast<std::size_t>(std::max(1, config_.min_leaf));
        std::vector<std::pair<double, std::uint32_t>> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = {x(rows[i], f), rows[i]};
        std::sort(order.begin(), order.end());
        if (order.front().first == order.back().first) return best;

        const double nn = static_cast<double>(n);
        double floor = 1e-9;
        if (kind_ == ForestKind::regressor) {
            double total = 0.0, total_sq = 0.0;
            for (const auto& o : order) {
                total += y(o.second);
                total_sq += y(o.second) * y(o.second);
            }
            // Gains below round-off of the node's sum of squares are noise.
            floor = 1e-12 * total_sq;
            const double parent = total * total / nn;
            double left = 0.0;
            for (std::size_t i = 1; i < n; ++i) {
                left += y(order[i - 1].second);
                if (i < min_leaf || n - i < min_leaf) continue;
                if (!(order[i - 1].first < order[i].first)) continue;
                const double nl = static_cast<double>(i), nr = nn - nl;
                const double right = total - left;
                const double gain = left * left / nl + right * right / nr - parent;
                if (gain > best.gain) best = {f, threshold_between(order[i - 1].first, order[i].first), gain};
            }
        } else {
            const auto k = static_cast<std::size_t>(class_count_);
            std::vector<double> total(k, 0.0), left(k, 0.0);
            for (const auto& o : order) total[static_cast<std::size_t>(y(o.second))] += 1.0;
            double parent = 0.0;
            for (double c : total) parent += c * c;
            parent /= nn;
            // Running sums of squared counts on each side.
            double left_sq = 0.0, right_sq = parent * nn;
            for (std::size_t i = 1; i < n; ++i) {
                const auto c = static_cast<std::size_t>(y(order[i - 1].second));
                const double right_c = total[c] - left[c];
                left_sq += 2.0 * left[c] + 1.0;
                right_sq -= 2.0 * right_c - 1.0;
                left[c] += 1.0;
                if (i < min_leaf || n - i < min_leaf) continue;
                if (!(order[i - 1].first < order[i].first)) continue;
                const double nl = static_cast<double>(i), nr = nn - nl;
                const double gain = left_sq / nl + right_sq / nr - parent;
                if (gain > best.gain) best = {f, threshold_between(order[i - 1].first, order[i].first), gain};
            }
        }
        if (best.gain <= floor) best.feature = -1;
        return best;
    }

    static double threshold_between(double a, double b) {
        const double mid = a + 0.5 * (b - a);
        return (mid >= a && mid < b) ? mid : a;
    }

    Split choose_split(const std::vector<std::uint32_t>& rows) {
        const int d = static_cast<int>(data_.cols());
        std::vector<int> perm(static_cast<std::size_t>(d));
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = d - 1; i > 0; --i) {
            const auto j = static_cast<int>(uniform_index(rng_, static_cast<std::uint64_t>(i) + 1));
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
        }
        Split best;
        auto consider = [&](int begin, int end) {
            // Candidates visited by increasing feature index so equal gains keep the lowest.
            std::vector<int> batch(perm.begin() + begin, perm.begin() + end);
            std::sort(batch.begin(), batch.end());
            for (int f : batch) {
                const Split s = best_split_on(rows, f);
                if (s.feature >= 0 && (best.feature < 0 || s.gain > best.gain)) best = s;
            }
        };
        consider(0, mtry_);
        if (best.feature < 0 && mtry_ < d) consider(mtry_, d);
        return best;
    }

    int grow(const std::vector<std::uint32_t>& rows, int depth) {
        const int id = static_cast<int>(tree_.feature.size());
        tree_.feature.push_back(-1);
        tree_.threshold.push_back(0.0);
        tree_.left.push_back(-1);
        tree_.right.push_back(-1);
        tree_.value.push_back(leaf_value(rows));

        const auto min_leaf = static_cast<std::size_t>(std::max(1, config_.min_leaf));
        if (depth >= config_.max_depth || rows.size() < 2 * min_leaf || pure(rows)) return id;
        const Split s = choose_split(rows);
        if (s.feature < 0) return id;

        std::vector<std::uint32_t> lo, hi;
        for (auto r : rows) (x(r, s.feature) <= s.threshold ? lo : hi).push_back(r);
        tree_.feature[static_cast<std::size_t>(id)] = s.feature;
        tree_.threshold[static_cast<std::size_t>(id)] = s.threshold;
        const int l = grow(lo, depth + 1);
        const int r = grow(hi, depth + 1);
        tree_.left[static_cast<std::size_t>(id)] = l;
        tree_.right[static_cast<std::size_t>(id)] = r;
        return id;
    }

    const Dataset& data_;
    const ForestConfig& config_;
    ForestKind kind_;
    int class_count_;
    int mtry_;
    Rng& rng_;
    Tree tree_;
};

}  // namespace

void Dataset::add(std::span<const double> x, double y) {
    if (x.size() != cols()) throw ValidationError("dataset row has " + std::to_string(x.size()) + " features, expected " +
                                                  std::to_string(cols()));
    features.insert(features.end(), x.begin(), x.end());
    targets.push_back(y);
}

void Dataset::validate() const {
    if (cols() == 0) throw ValidationError("dataset has no features");
    if (features.size() != rows() * cols()) throw ValidationError("dataset feature matrix is not rectangular");
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (!std::isfinite(features[i])) {
            throw ValidationError("non-finite feature at row " + std::to_string(i / cols()) + ", column " +
                                  feature_names[i % cols()]);
        }
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!std::isfinite(targets[i])) throw ValidationError("non-finite target at row " + std::to_string(i));
    }
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() < 2) throw ValidationError(path.string() + ": need at least one feature and a target column");
    Dataset d;
    d.feature_names.assign(t.header.begin(), t.header.end() - 1);
    std::vector<double> row(d.cols());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& cells = t.rows[i];
        if (cells.size() != t.header.size()) {
            throw ParseError(path.string() + ": wrong column count", t.row_lines[i], 1);
        }
        double y = 0.0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            if (!parse_double(cells[c], v)) {
                throw ParseError(path.string() + ": bad number '" + cells[c] + "'", t.row_lines[i],
                                 static_cast<int>(c) + 1);
            }
            if (c + 1 < cells.size()) {
                row[c] = v;
            } else {
                y = v;
            }
        }
        d.add(row, y);
    }
    d.validate();
    return d;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data, const std::string& target_name) {
    std::string out;
    for (const auto& n : data.feature_names) out += csv_field(n) + ",";
    out += csv_field(target_name) + "\n";
    char buf[32];
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (double v : data.row(r)) {
            std::snprintf(buf, sizeof buf, "%.17g,", v);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g\n", data.targets[r]);
        out += buf;
    }
    write_text_file(path, out);
}

double Tree::predict(std::span<const double> x) const {
    int n = 0;
    while (feature[static_cast<std::size_t>(n)] >= 0) {
        const auto i = static_cast<std::size_t>(n);
        n = x[static_cast<std::size_t>(feature[i])] <= threshold[i] ? left[i] : right[i];
    }
    return value[static_cast<std::size_t>(n)];
}

double Forest::predict(std::span<const double> x) const {
    if (x.size() != feature_count()) {
        throw ValidationError("feature length " + std::to_string(x.size()) + " does not match forest (" +
                              std::to_string(feature_count()) + ")");
    }
    if (kind == ForestKind::classifier) return classify(x).first;
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x);
    return s / static_cast<double>(trees.size());
}

std::pair<int, double> Forest::classify(std::span<const double> x) const {
    if (x.size() != feature_count()) {
        throw ValidationError("feature length " + std::to_string(x.size()) + " does not match forest (" +
                              std::to_string(feature_count()) + ")");
    }
    if (kind != ForestKind::classifier) throw ValidationError("classify called on a regression forest");
    std::vector<int> votes(static_cast<std::size_t>(std::max(class_count, 1)), 0);
    for (const auto& t : trees) ++votes[static_cast<std::size_t>(t.predict(x))];
    const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
    return {static_cast<int>(best), static_cast<double>(votes[static_cast<std::size_t>(best)]) /
                                        static_cast<double>(trees.size())};
}

double r_squared(const std::vector<double>& truth, const std::vector<double>& predicted) {
    if (truth.empty() || truth.size() != predicted.size()) throw ValidationError("r_squared: size mismatch");
    const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

Forest train_forest(const Dataset& data, const ForestConfig& config, ForestKind kind, bool parallel) {
    data.validate();
    if (data.rows() < 10) throw ValidationError("training needs at least 10 records, got " + std::to_string(data.rows()));
    if (config.tree_count < 1 || config.max_depth < 0 || config.min_leaf < 1) {
        throw ValidationError("invalid forest config");
    }
    Forest forest;
    forest.kind = kind;
    forest.config = config;
    forest.feature_names = data.feature_names;
    if (kind == ForestKind::classifier) {
        int k = 0;
        for (double t : data.targets) {
            if (t < 0.0 || t != std::floor(t) || t > 1e6) {
                throw ValidationError("classification targets must be non-negative integers");
            }
            k = std::max(k, static_cast<int>(t) + 1);
        }
        forest.class_count = k;
    }
    const int mtry = resolved_mtry(config, kind, data.cols());
    const std::size_t n = data.rows();
    const int tree_count = config.tree_count;
    forest.trees.resize(static_cast<std::size_t>(tree_count));
    std::vector<std::vector<char>> in_bag(static_cast<std::size_t>(tree_count));

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int t = 0; t < tree_count; ++t) {
        Rng rng = make_rng(config.seed, static_cast<std::uint64_t>(t));
        std::vector<std::uint32_t> rows(n);
        auto& bag = in_bag[static_cast<std::size_t>(t)];
        bag.assign(n, 0);
        for (auto& r : rows) {
            r = static_cast<std::uint32_t>(uniform_index(rng, n));
            bag[r] = 1;
        }
        std::sort(rows.begin(), rows.end());
        TreeBuilder builder(data, config, kind, forest.class_count, mtry, rng);
        forest.trees[static_cast<std::size_t>(t)] = builder.build(std::move(rows));
    }

    // Out-of-bag estimate, accumulated in tree order.
    std::vector<double> truth, predicted;
    for (std::size_t r = 0; r < n; ++r) {
        const auto x = data.row(r);
        double sum = 0.0;
        int count = 0;
        std::vector<int> votes(static_cast<std::size_t>(std::max(forest.class_count, 1)), 0);
        for (int t = 0; t < tree_count; ++t) {
            if (in_bag[static_cast<std::size_t>(t)][r]) continue;
            const double p = forest.trees[static_cast<std::size_t>(t)].predict(x);
            sum += p;
            if (kind == ForestKind::classifier) ++votes[static_cast<std::size_t>(p)];
            ++count;
        }
        if (count == 0) continue;
        truth.push_back(data.targets[r]);
        if (kind == ForestKind::regressor) {
            predicted.push_back(sum / count);
        } else {
            predicted.push_back(static_cast<double>(std::max_element(votes.begin(), votes.end()) - votes.begin()));
        }
    }
    if (!truth.empty()) {
        if (kind == ForestKind::regressor) {
            forest.oob_score = r_squared(truth, predicted);
        } else {
            std::size_t hit = 0;
            for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == predicted[i];
            forest.oob_score = static_cast<double>(hit) / static_cast<double>(truth.size());
        }
    }
    return forest;
}

json forest_to_json(const Forest& forest) {
    json trees = json::array();
    for (const auto& t : forest.trees) {
        trees.push_back({{"feature", t.feature},
                         {"threshold", t.threshold},
                         {"left", t.left},
                         {"right", t.right},
                         {"value", t.value}});
    }
    return {{"magic", forest_magic},
            {"version", forest_version},
            {"kind", kind_name(forest.kind)},
            {"config",
             {{"tree_count", forest.config.tree_count},
              {"max_depth", forest.config.max_depth},
              {"min_leaf", forest.config.min_leaf},
              {"features_per_split", forest.config.features_per_split},
              {"seed", forest.config.seed}}},
            {"feature_names", forest.feature_names},
            {"class_count", forest.class_count},
            {"oob_score", forest.oob_score},
            {"trees", trees}};
}

Forest forest_from_json(const json& j) {
    if (!j.is_object() || !j.contains("magic") || j["magic"] != forest_magic) {
        throw ValidationError("not a forest file (bad magic header)");
    }
    if (!j.contains("version") || j["version"] != forest_version) {
        throw ValidationError("unsupported forest file version " + (j.contains("version") ? j["version"].dump() : "?") +
                              ", expected " + std::to_string(forest_version));
    }
    try {
        Forest f;
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "regressor") {
            f.kind = ForestKind::regressor;
        } else if (kind == "classifier") {
            f.kind = ForestKind::classifier;
        } else {
            throw ValidationError("unknown forest kind '" + kind + "'");
        }
        const auto& c = j.at("config");
        f.config.tree_count = c.at("tree_count").get<int>();
        f.config.max_depth = c.at("max_depth").get<int>();
        f.config.min_leaf = c.at("min_leaf").get<int>();
        f.config.features_per_split = c.at("features_per_split").get<int>();
        f.config.seed = c.at("seed").get<std::uint64_t>();
        f.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        f.class_count = j.at("class_count").get<int>();
        f.oob_score = j.at("oob_score").get<double>();
        for (const auto& tj : j.at("trees")) {
            Tree t;
            t.feature = tj.at("feature").get<std::vector<int>>();
            t.threshold = tj.at("threshold").get<std::vector<double>>();
            t.left = tj.at("left").get<std::vector<int>>();
            t.right = tj.at("right").get<std::vector<int>>();
            t.value = tj.at("value").get<std::vector<double>>();
            const auto n = t.feature.size();
            if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n || t.value.size() != n) {
                throw ValidationError("corrupt tree arrays");
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (t.feature[i] < 0) continue;
                const auto in_range = [&](int k) { return k > static_cast<int>(i) && k < static_cast<int>(n); };
                if (t.feature[i] >= static_cast<int>(f.feature_names.size()) || !in_range(t.left[i]) ||
                    !in_range(t.right[i]) || !std::isfinite(t.threshold[i])) {
                    throw ValidationError("corrupt tree node " + std::to_string(i));
                }
            }
            f.trees.push_back(std::move(t));
        }
        if (f.trees.empty()) throw ValidationError("forest has no trees");
        return f;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("corrupt forest file: ") + e.what());
    }
}

void save_forest(const Forest& forest, const std::filesystem::path& path) {
    write_json_file(path, forest_to_json(forest), false);
}

Forest load_forest(const std::filesystem::path& path) {
    try {
        return forest_from_json(read_json_file(path));
    } catch (const IoError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace dtwin
