#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "helprank/folds.hpp"
#include "helprank/recommend.hpp"

namespace helprank {

struct ErrorMetrics {
    double rmse = 0, mae = 0;
};

ErrorMetrics error_metrics(std::span<const double> predicted, std::span<const double> actual);

struct TopNMetrics {
    double precision = 0, recall = 0, f1 = 0;
};

// precision = |top-N ∩ relevant| / min(N, |recommended|),
// recall = |top-N ∩ relevant| / |relevant|; empty relevant set is the
// caller's skip case and raises DataError here.
TopNMetrics topn_metrics(std::span<const std::uint32_t> recommended,
                         const std::vector<std::uint32_t>& relevant, std::size_t n);

struct RankMetrics {
    double ap = 0;    // average precision over relevant hits
    double rr = 0;    // reciprocal rank of the first hit, 0 if none
    double ndcg = 0;  // log2 discount, graded gains
};

RankMetrics ranking_metrics(std::span<const std::uint32_t> recommended,
                            const std::vector<std::uint32_t>& relevant,
                            const std::map<std::uint32_t, double>& gains);

struct WilcoxonResult {
    double statistic = 0;     // smaller signed-rank sum, mid-rank ties
    double p_value = 1;       // two-sided
    std::size_t n_effective = 0;
    bool exact = false;
};

// Zero differences are dropped. Exact null distribution (tie-aware) for
// n_effective <= 15, normal approximation with tie correction above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

inline constexpr std::array<const char*, 8> kMetricNames = {
    "Precision", "Recall", "F1", "MAP", "MRR", "NDCG", "RMSE", "MAE"};

struct MetricValues {
    double precision = 0, recall = 0, f1 = 0;
    double map = 0, mrr = 0, ndcg = 0;
    double rmse = 0, mae = 0;

    double operator[](std::size_t i) const {
        const std::array<double, 8> v = {precision, recall, f1, map, mrr, ndcg, rmse, mae};
        return v[i];
    }
};

struct AlgorithmConfig {
    std::string name;
    FactorKind kind = FactorKind::plain_mf;
    MfHyperparams hp;
};

struct EvalConfig {
    std::size_t top_n = 10;
    double relevance_threshold = 4.0;  // test items rated >= this are relevant
    bool graded_gains = true;          // true rating as NDCG gain, else binary
    bool clamp_estimates = true;       // for RMSE/MAE
    double clamp_lo = 1.0, clamp_hi = 5.0;
    std::uint64_t seed = 7;
};

// Weights for the training observations of one fold; returned vector aligns
// with `train.observations`. Built per fold so the forest that predicts
// helpfulness never sees test votes.
using WeightProvider = std::function<HelpfulnessWeights(std::size_t fold,
                                                        const RatingMatrix& train)>;

struct PairComparison {
    std::size_t candidate = 0, baseline = 0;  // indices into algorithm list
    MetricValues rel_diff_pct;                // (A - B) / B * 100 per metric
    std::array<WilcoxonResult, 8> wilcoxon;
    std::array<bool, 8> significant{};        // p < 0.05
};

struct EvalReport {
    std::vector<std::string> algorithm_names;
    std::vector<MetricValues> values;               // pooled across folds
    std::vector<std::vector<MetricValues>> by_fold; // [fold][algorithm]
    std::vector<PairComparison> comparisons;        // each candidate vs last algorithm
    std::size_t skipped_users = 0;                  // empty relevant sets
    std::size_t folds = 0;
    EvalConfig config;
};

// Per fold: train every algorithm on the train split, score the test split;
// pool per-user rank metrics and per-observation errors across folds; run a
// Wilcoxon test per metric on the paired values against the baseline (the
// last algorithm in the list).
EvalReport compare_recommenders(const RatingMatrix& matrix, const FoldPlan& plan,
                                const std::vector<AlgorithmConfig>& algorithms,
                                const WeightProvider& weights, const EvalConfig& config);

}  // namespace helprank
