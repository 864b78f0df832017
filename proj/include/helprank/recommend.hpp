#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "helprank/corpus.hpp"
#include "helprank/features.hpp"
#include "helprank/regress.hpp"

namespace helprank {

struct RatingObservation {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    double rating = 0;       // [1, 5]
    std::string obs_id;      // review id; keys the epoch shuffle
};

// Sparse user-item rating matrix. At most one observation per (user, item)
// when built from a corpus (the latest review wins).
struct RatingMatrix {
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    std::unordered_map<std::string, std::uint32_t> user_index;
    std::unordered_map<std::string, std::uint32_t> item_index;
    std::vector<RatingObservation> observations;

    std::size_t n_users() const { return user_ids.size(); }
    std::size_t n_items() const { return item_ids.size(); }

    static RatingMatrix from_corpus(const Corpus& corpus);
    // Same user/item index space, observations restricted to `keep`.
    RatingMatrix subset(const std::vector<std::size_t>& keep) const;
};

// w in [0, 1] per observation, aligned with RatingMatrix::observations.
struct HelpfulnessWeights {
    std::vector<double> w;

    static HelpfulnessWeights ones(std::size_t n) { return {std::vector<double>(n, 1.0)}; }
    void validate(const RatingMatrix& matrix) const;
};

void write_weights_csv(const RatingMatrix& matrix, const HelpfulnessWeights& weights,
                       const std::string& path);
HelpfulnessWeights read_weights_csv(const RatingMatrix& matrix, const std::string& path);

// How ground-truth and model-estimated helpfulness combine: ground truth
// when votes exist and the model otherwise, or a plain average of the two.
enum class HybridMode { ground_truth_else_model, average };

double predicted_helpfulness(const RawReview& review, const ReviewFeatures& features,
                             const ForestModel& m3, LogBase base = LogBase::natural,
                             HybridMode mode = HybridMode::ground_truth_else_model);

enum class FactorKind { plain_mf, weighted_mf, svdpp };

std::string to_string(FactorKind kind);

struct MfHyperparams {
    int K = 50;
    double lambda = 0.02;
    double lr = 0.01;
    int epochs = 50;
    double init_sigma = 0.1;
    std::uint64_t seed = 1;
    bool biased = false;  // adds mu + b_u + b_i to the weighted/plain MF form
};

struct FactorModel {
    FactorKind kind = FactorKind::plain_mf;
    int K = 0;
    std::size_t n_users = 0, n_items = 0;
    std::vector<double> user_factors;  // K * n_users, row-major per user
    std::vector<double> item_factors;  // K * n_items
    std::vector<double> user_bias, item_bias;
    std::vector<double> implicit_factors;  // SVD++ y_j, K * n_items
    std::vector<double> user_profile;      // SVD++ u_x + |N|^(-1/2) sum y_j
    double global_mean = 0;
    std::vector<std::string> user_ids, item_ids;
    MfHyperparams hp;
    std::vector<double> epoch_objective;

    std::span<const double> user_vec(std::uint32_t u) const {
        return {user_factors.data() + std::size_t(u) * K, std::size_t(K)};
    }
    std::span<const double> item_vec(std::uint32_t i) const {
        return {item_factors.data() + std::size_t(i) * K, std::size_t(K)};
    }
};

// SGD on the weighted squared-error objective sum w*(R - u.i)^2 + L2: per
// observation, e = R - u.i, u += lr*(w*e*i - lambda*u), i += lr*(w*e*u -
// lambda*i). Zero-weight observations are skipped entirely so removing them
// reproduces the identical model. The per-epoch visit order is keyed on
// observation ids, not vector positions.
FactorModel train_weighted_mf(const RatingMatrix& matrix, const HelpfulnessWeights& weights,
                              const MfHyperparams& hp);

// Plain MF is the weighted form with unit weights.
FactorModel train_mf(const RatingMatrix& matrix, const MfHyperparams& hp);

// Koren's SVD++: r = mu + b_u + b_i + i . (u + |N(u)|^(-1/2) sum y_j).
FactorModel train_svdpp(const RatingMatrix& matrix, const MfHyperparams& hp);

struct EstimateDetail {
    double value = 0;
    bool fallback = false;  // unknown user/item
    bool clamped = false;
};

// Raw estimate; unknown users/items fall back to the global mean (SVD++) or
// the scale midpoint 3.0 (plain/weighted MF).
double estimate_rating(const FactorModel& model, std::uint32_t user, std::uint32_t item);
EstimateDetail estimate_rating_detail(const FactorModel& model, std::uint32_t user,
                                      std::uint32_t item, bool clamp = false,
                                      double lo = 1.0, double hi = 5.0);

// Candidates sorted by raw estimate descending, ties broken by external item
// id ascending. N caps the returned list.
std::vector<std::uint32_t> top_n(const FactorModel& model, std::uint32_t user,
                                 std::span<const std::uint32_t> candidates, std::size_t n);

// Deterministic ranking helper shared by top_n: order candidate positions by
// (score desc, id asc).
std::vector<std::size_t> rank_by_score(std::span<const double> scores,
                                       const std::vector<std::string>& tie_ids);

// JSON header line + labelled CSV factor blocks; loadable round-trip.
void save_factor_model(const FactorModel& model, const std::string& path);
FactorModel load_factor_model(const std::string& path);

}  // namespace helprank
