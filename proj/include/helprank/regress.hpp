#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "helprank/features.hpp"
#include "helprank/folds.hpp"

namespace helprank {

// Product-moment correlation; NaN when either vector is constant (the
// coefficient is undefined there).
double pearson(std::span<const double> a, std::span<const double> b);

// Pearson over fractional (mid) ranks; ties receive average ranks.
double spearman(std::span<const double> a, std::span<const double> b);

std::vector<double> midranks(std::span<const double> values);

enum class ModelId { M1, M2, M3 };
enum class RegressorKind { linear, forest };

std::string to_string(ModelId id);
std::string to_string(RegressorKind kind);

// Nested feature subsets: M1 = {RAT, LEN, UGR}, M2 = M1 + {POL},
// M3 = all 11 variables.
struct ModelSpec {
    ModelId id;
    std::vector<std::size_t> feature_idx;  // indices into kFeatureColumns order

    static ModelSpec make(ModelId id);
    std::size_t dim() const { return feature_idx.size(); }
    std::vector<double> project(const ReviewFeatures& row) const;
};

struct LinearHyperparams {
    double epsilon = 0.0;
    double C = 1.0;           // loss/penalty trade-off; L2 weight is 1/(C*n)
    int epochs = 200;
    double lr0 = 0.05;
    double lr_decay = 0.02;   // eta_e = lr0 / (1 + lr_decay * e)
    bool standardize = false;
    std::uint64_t seed = 1;
};

struct LinearModel {
    ModelSpec spec;
    double bias = 0;
    std::vector<double> weights;
    // Standardization applied at training time, replayed at prediction time.
    std::vector<double> feat_mean, feat_scale;
    LinearHyperparams hp;
    std::vector<double> epoch_objective;  // (lambda/2)||w||^2 + mean eps-loss

    double predict(std::span<const double> x) const;
};

// Epsilon-insensitive loss + L2 penalty via per-sample subgradient descent
// with a seeded shuffle each epoch.
LinearModel train_linear(const std::vector<std::vector<double>>& X,
                         const std::vector<double>& y, const ModelSpec& spec,
                         const LinearHyperparams& hp);

struct ForestHyperparams {
    int n_trees = 100;
    int max_depth = -1;          // unlimited
    int min_samples_leaf = 2;
    int features_per_split = -1; // resolved to ceil(d/3)
    bool bootstrap = true;
    std::uint64_t seed = 1;
    int threads = 0;             // 0 = hardware concurrency
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1, right = -1;
    double value = 0;  // leaf mean
};

struct RegressionTree {
    std::vector<TreeNode> nodes;
    double predict(std::span<const double> x) const;
};

struct ForestModel {
    ModelSpec spec;
    std::vector<RegressionTree> trees;
    ForestHyperparams hp;
    // Per-tree-normalized impurity decrease, averaged across trees. Sums to
    // 1 when at least one split exists, all zeros otherwise.
    std::vector<double> importances;

    double predict(std::span<const double> x) const;
    // Clamped into [0,1) for use as a helpfulness value.
    double predict_helpfulness(std::span<const double> x, bool* clamped = nullptr) const;
};

// CART regression trees on bootstrap samples; splits minimize the summed
// child variance, with seeded feature subsampling per split.
ForestModel train_forest(const std::vector<std::vector<double>>& X,
                         const std::vector<double>& y, const ModelSpec& spec,
                         const ForestHyperparams& hp);

std::vector<double> feature_importance(const ForestModel& forest);

struct CorrelationRow {
    ModelId model;
    RegressorKind regressor;
    double pearson_r = 0;
    double spearman_r = 0;
};

struct StudyReport {
    std::vector<CorrelationRow> cv_correlations;
    struct Coefficients {
        ModelId model;
        double bias;
        std::vector<double> weights;           // aligned with spec order
        std::vector<double> permutation_p;     // empty unless requested
    };
    struct Importances {
        ModelId model;
        std::vector<double> values;  // aligned with spec order
    };
    std::vector<Coefficients> linear_coefficients;
    std::vector<Importances> forest_importances;
    // 12x12 Pearson matrix over the 11 variables + helpfulness.
    std::vector<std::vector<double>> variable_matrix;
    std::size_t n_reviews = 0;
    std::size_t folds = 0;
    std::uint64_t seed = 0;
};

struct StudyConfig {
    std::vector<ModelId> models = {ModelId::M1, ModelId::M2, ModelId::M3};
    std::vector<RegressorKind> regressors = {RegressorKind::linear, RegressorKind::forest};
    std::size_t folds = 5;
    std::uint64_t seed = 7;
    LinearHyperparams linear_hp;
    ForestHyperparams forest_hp;
    bool per_fold_average = false;  // default: pool out-of-fold predictions
    int permutation_tests = 0;      // >0 approximates coefficient significance
    // Strict leakage mode: rebuild features per fold from training reviews
    // only. Receives (train, test) row indices and returns the two feature
    // matrices in that order. Default slices the precomputed matrix.
    using FoldFeatureBuilder = std::function<std::pair<FeatureMatrix, FeatureMatrix>(
        const std::vector<std::size_t>&, const std::vector<std::size_t>&)>;
    std::optional<FoldFeatureBuilder> per_fold_features;
};

// Per model x regressor: k-fold CV with pooled out-of-fold predictions
// correlated against observed helpfulness, plus full-data coefficient and
// importance extraction and the inter-variable correlation matrix.
StudyReport run_study(const FeatureMatrix& features, const StudyConfig& config);

}  // namespace helprank
