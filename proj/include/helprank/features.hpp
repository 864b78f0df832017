#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "helprank/corpus.hpp"
#include "helprank/text.hpp"

namespace helprank {

enum class LogBase { natural, base10 };

// log(x+1) / (1 + log(x+1)); maps [0, inf) into [0, 1), strictly increasing,
// squash(0) == 0. Natural log by default.
double squash(double x, LogBase base = LogBase::natural);

// squash of the total vote count (useful + funny + cool).
double perceived_helpfulness(const RawReview& review, LogBase base = LogBase::natural);

inline constexpr std::size_t kFeatureCount = 11;
inline constexpr std::array<const char*, kFeatureCount + 1> kFeatureColumns = {
    "rat",      "len",      "ugr",      "pol",      "coh",      "d_len_ru",
    "d_len_ri", "d_rat_ru", "d_rat_ri", "d_pol_ru", "d_pol_ri", "helpfulness"};

struct ReviewFeatures {
    double rat, len, ugr, pol, coh;
    double d_len_ru, d_len_ri, d_rat_ru, d_rat_ri, d_pol_ru, d_pol_ri;
    double helpfulness;

    std::array<double, kFeatureCount + 1> as_array() const {
        return {rat,      len,      ugr,      pol,      coh,      d_len_ru,
                d_len_ri, d_rat_ru, d_rat_ri, d_pol_ru, d_pol_ri, helpfulness};
    }
    double operator[](std::size_t i) const { return as_array()[i]; }
};

// Means of the already-normalized LEN/RAT/POL over one user's (or item's)
// reviews.
struct Aggregate {
    double mean_len = 0, mean_rat = 0, mean_pol = 0;
    std::size_t n = 0;
};

struct AggregateMaps {
    std::unordered_map<std::string, Aggregate> by_user;
    std::unordered_map<std::string, Aggregate> by_item;
};

struct FeatureConfig {
    LogBase log_base = LogBase::natural;
    TfIdfOptions tfidf;
    // Group means include the review being scored by default; leave-one-out
    // is offered for sensitivity checks.
    bool leave_one_out = false;
};

// Tokenization + polarity of every review, aligned with corpus order.
struct TextColumns {
    std::vector<std::vector<std::string>> tokens;
    std::vector<double> raw_length;  // whitespace word count
    std::vector<double> polarity;    // [1, 5]
};

struct TextPipeline {
    const Stopwords* stopwords = nullptr;
    const Lemmatizer* lemmatizer = nullptr;
    std::vector<const SentimentScorer*> scorers;
};

TextColumns analyze_text(const Corpus& corpus, const TextPipeline& pipeline);

struct FeatureMatrix {
    std::vector<std::string> review_ids;
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    std::vector<ReviewFeatures> rows;

    std::size_t size() const { return rows.size(); }
    std::vector<double> column(std::size_t feature_index) const;
    std::vector<double> helpfulness_column() const { return column(kFeatureCount); }
};

AggregateMaps compute_aggregates(const Corpus& corpus,
                                 const std::vector<double>& norm_len,
                                 const std::vector<double>& norm_rat,
                                 const std::vector<double>& norm_pol);

ReviewFeatures compute_feature_vector(const RawReview& review, double raw_length,
                                      double polarity15, double mean_tfidf,
                                      const AggregateMaps& aggregates,
                                      const FeatureConfig& config);

// Full pipeline over a corpus: TF/IDF index from the token columns, then
// aggregates, then one feature vector per review.
FeatureMatrix compute_features(const Corpus& corpus, const TextColumns& text,
                               const FeatureConfig& config = {});

// Strict leakage mode: the TF/IDF index and the user/item aggregates are
// built from the training rows only. Test-row deviations fall back to the
// training-wide means when their user or item never appears in training.
std::pair<FeatureMatrix, FeatureMatrix> compute_features_split(
    const Corpus& corpus, const TextColumns& text, const FeatureConfig& config,
    const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows);

// CSV: review_id,user_id,item_id,<11 features>,helpfulness. JSON mirrors the
// same schema. Feature values are written with round-trip precision.
void write_features_csv(const FeatureMatrix& matrix, const std::string& path);
void write_features_json(const FeatureMatrix& matrix, const std::string& path);
FeatureMatrix read_features_csv(const std::string& path);

}  // namespace helprank
