#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dtwin/json_io.hpp"

namespace dtwin {

/// Row-major feature matrix with one target per row. Classification targets are
/// class indices 0..k-1 stored as doubles.
struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<double> features;
    std::vector<double> targets;

    std::size_t rows() const { return targets.size(); }
    std::size_t cols() const { return feature_names.size(); }
    std::span<const double> row(std::size_t i) const { return {features.data() + i * cols(), cols()}; }
    void add(std::span<const double> x, double y);
    /// Throws ValidationError on shape mismatch or non-finite values.
    void validate() const;
};

/// CSV with a header row; the last column is the target.
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data, const std::string& target_name);

enum class ForestKind { regressor, classifier };

struct ForestConfig {
    int tree_count = 100;
    int max_depth = 12;
    int min_leaf = 2;
    int features_per_split = 0;  // 0 picks ceil(sqrt(d)) or ceil(d/3) by kind
    std::uint64_t seed = 1;
};

/// Flat binary tree. feature < 0 marks a leaf whose prediction is `value`.
struct Tree {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<double> value;

    double predict(std::span<const double> x) const;
    std::size_t node_count() const { return feature.size(); }
};

struct Forest {
    ForestKind kind = ForestKind::regressor;
    ForestConfig config;
    std::vector<std::string> feature_names;
    int class_count = 0;
    double oob_score = 0.0;  // R^2 or accuracy on out-of-bag rows
    std::vector<Tree> trees;

    std::size_t feature_count() const { return feature_names.size(); }
    /// Mean of the tree outputs.
    double predict(std::span<const double> x) const;
    /// Majority class and the fraction of trees voting for it. Ties go to the lower class.
    std::pair<int, double> classify(std::span<const double> x) const;
};

/// Grows config.tree_count CART trees on seeded bootstraps. Each tree draws only
/// from make_rng(config.seed, tree index), so `parallel` changes nothing but speed.
Forest train_forest(const Dataset& data, const ForestConfig& config, ForestKind kind, bool parallel = true);

json forest_to_json(const Forest& forest);
Forest forest_from_json(const json& j);
void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

/// Coefficient of determination of predictions against targets.
double r_squared(const std::vector<double>& truth, const std::vector<double>& predicted);

}  // namespace dtwin
