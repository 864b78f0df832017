#include "helprank/features.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helprank/errors.hpp"
#include "helprank/report.hpp"

namespace helprank {

double squash(double x, LogBase base) {
    if (!(x >= 0)) throw NumericError("squash: argument must be >= 0");
    const double l = base == LogBase::natural ? std::log1p(x) : std::log10(x + 1.0);
    return l / (1.0 + l);
}

double perceived_helpfulness(const RawReview& review, LogBase base) {
    return squash(static_cast<double>(review.total_votes()), base);
}

TextColumns analyze_text(const Corpus& corpus, const TextPipeline& pipeline) {
    if (!pipeline.stopwords || !pipeline.lemmatizer)
        throw ConfigError("analyze_text: stopwords and lemmatizer required");
    if (pipeline.scorers.empty())
        throw ConfigError("analyze_text: at least one sentiment scorer required");
    TextColumns columns;
    columns.tokens.resize(corpus.size());
    columns.raw_length.resize(corpus.size());
    columns.polarity.resize(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const RawReview& r = corpus.reviews[i];
        TokenizeResult t = tokenize(r.text, *pipeline.stopwords, *pipeline.lemmatizer);
        columns.tokens[i] = std::move(t.tokens);
        columns.raw_length[i] = static_cast<double>(t.raw_word_count);
        // Sentiment runs on the raw text; token lists feed TF/IDF only.
        columns.polarity[i] = polarity(r.text, pipeline.scorers);
    }
    return columns;
}

AggregateMaps compute_aggregates(const Corpus& corpus,
                                 const std::vector<double>& norm_len,
                                 const std::vector<double>& norm_rat,
                                 const std::vector<double>& norm_pol) {
    if (norm_len.size() != corpus.size() || norm_rat.size() != corpus.size() ||
        norm_pol.size() != corpus.size())
        throw DataError("compute_aggregates: columns misaligned with corpus");
    AggregateMaps maps;
    auto accumulate = [&](const std::vector<std::string>& order,
                          const std::unordered_map<std::string, std::vector<std::size_t>>& index,
                          std::unordered_map<std::string, Aggregate>& out) {
        for (const std::string& key : order) {
            const auto& rows = index.at(key);
            Aggregate agg;
            agg.n = rows.size();
            for (std::size_t i : rows) {
                agg.mean_len += norm_len[i];
                agg.mean_rat += norm_rat[i];
                agg.mean_pol += norm_pol[i];
            }
            const double n = static_cast<double>(rows.size());
            agg.mean_len /= n;
            agg.mean_rat /= n;
            agg.mean_pol /= n;
            out.emplace(key, agg);
        }
    };
    accumulate(corpus.users, corpus.by_user, maps.by_user);
    accumulate(corpus.items, corpus.by_item, maps.by_item);
    return maps;
}

namespace {

// Mean used for the deviation term. Leave-one-out removes the review's own
// contribution; a singleton group falls back to the review itself so its
// deviation is 0 rather than undefined.
double deviation_mean(const Aggregate& agg, double own, double agg_mean, bool leave_one_out) {
    if (!leave_one_out) return agg_mean;
    if (agg.n <= 1) return own;
    return (agg_mean * static_cast<double>(agg.n) - own) / static_cast<double>(agg.n - 1);
}

}  // namespace

ReviewFeatures compute_feature_vector(const RawReview& review, double raw_length,
                                      double polarity15, double mean_tfidf,
                                      const AggregateMaps& aggregates,
                                      const FeatureConfig& config) {
    const auto uit = aggregates.by_user.find(review.user_id);
    const auto iit = aggregates.by_item.find(review.item_id);
    if (uit == aggregates.by_user.end())
        throw DataError("compute_feature_vector: no aggregate for user " + review.user_id);
    if (iit == aggregates.by_item.end())
        throw DataError("compute_feature_vector: no aggregate for item " + review.item_id);
    const Aggregate& ua = uit->second;
    const Aggregate& ia = iit->second;
    const LogBase base = config.log_base;

    ReviewFeatures f{};
    f.rat = squash(static_cast<double>(review.stars), base);
    f.len = squash(raw_length, base);
    f.ugr = squash(mean_tfidf, base);
    f.pol = squash(polarity15, base);
    f.coh = squash(1.0 - std::abs(f.rat - f.pol), base);

    // Deviations are taken on the normalized values, not on the raw ones.
    auto delta = [&](double own, const Aggregate& agg, double mean) {
        return squash(std::abs(own - deviation_mean(agg, own, mean, config.leave_one_out)), base);
    };
    f.d_len_ru = delta(f.len, ua, ua.mean_len);
    f.d_len_ri = delta(f.len, ia, ia.mean_len);
    f.d_rat_ru = delta(f.rat, ua, ua.mean_rat);
    f.d_rat_ri = delta(f.rat, ia, ia.mean_rat);
    f.d_pol_ru = delta(f.pol, ua, ua.mean_pol);
    f.d_pol_ri = delta(f.pol, ia, ia.mean_pol);

    f.helpfulness = perceived_helpfulness(review, base);
    return f;
}

FeatureMatrix compute_features(const Corpus& corpus, const TextColumns& text,
                               const FeatureConfig& config) {
    if (text.tokens.size() != corpus.size())
        throw DataError("compute_features: text columns misaligned with corpus");

    std::vector<std::string> doc_items;
    if (config.tfidf.universe == DocUniverse::per_item) {
        doc_items.reserve(corpus.size());
        for (const RawReview& r : corpus.reviews) doc_items.push_back(r.item_id);
    }
    const TfIdfIndex index = TfIdfIndex::build(text.tokens, doc_items, config.tfidf);

    std::vector<double> norm_len(corpus.size()), norm_rat(corpus.size()), norm_pol(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        norm_len[i] = squash(text.raw_length[i], config.log_base);
        norm_rat[i] = squash(static_cast<double>(corpus.reviews[i].stars), config.log_base);
        norm_pol[i] = squash(text.polarity[i], config.log_base);
    }
    const AggregateMaps aggregates = compute_aggregates(corpus, norm_len, norm_rat, norm_pol);

    FeatureMatrix matrix;
    matrix.rows.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const RawReview& r = corpus.reviews[i];
        const double ugr = index.mean_tfidf(text.tokens[i], r.item_id);
        matrix.rows.push_back(compute_feature_vector(r, text.raw_length[i], text.polarity[i],
                                                     ugr, aggregates, config));
        matrix.review_ids.push_back(r.review_id);
        matrix.user_ids.push_back(r.user_id);
        matrix.item_ids.push_back(r.item_id);
    }
    return matrix;
}

std::pair<FeatureMatrix, FeatureMatrix> compute_features_split(
    const Corpus& corpus, const TextColumns& text, const FeatureConfig& config,
    const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows) {
    if (text.tokens.size() != corpus.size())
        throw DataError("compute_features_split: text columns misaligned with corpus");
    if (train_rows.empty()) throw DataError("compute_features_split: empty training split");

    std::vector<std::vector<std::string>> train_docs;
    std::vector<std::string> train_doc_items;
    train_docs.reserve(train_rows.size());
    for (std::size_t i : train_rows) {
        train_docs.push_back(text.tokens[i]);
        if (config.tfidf.universe == DocUniverse::per_item)
            train_doc_items.push_back(corpus.reviews[i].item_id);
    }
    const TfIdfIndex index = TfIdfIndex::build(train_docs, train_doc_items, config.tfidf);

    std::vector<double> norm_len(corpus.size()), norm_rat(corpus.size()), norm_pol(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        norm_len[i] = squash(text.raw_length[i], config.log_base);
        norm_rat[i] = squash(static_cast<double>(corpus.reviews[i].stars), config.log_base);
        norm_pol[i] = squash(text.polarity[i], config.log_base);
    }

    AggregateMaps aggregates;
    Aggregate global;
    for (std::size_t i : train_rows) {
        const RawReview& r = corpus.reviews[i];
        for (Aggregate* agg : {&aggregates.by_user[r.user_id], &aggregates.by_item[r.item_id],
                               &global}) {
            agg->mean_len += norm_len[i];
            agg->mean_rat += norm_rat[i];
            agg->mean_pol += norm_pol[i];
            ++agg->n;
        }
    }
    auto finish = [](Aggregate& agg) {
        const double n = static_cast<double>(agg.n);
        agg.mean_len /= n;
        agg.mean_rat /= n;
        agg.mean_pol /= n;
    };
    for (auto& [key, agg] : aggregates.by_user) finish(agg);
    for (auto& [key, agg] : aggregates.by_item) finish(agg);
    finish(global);

    auto build_rows = [&](const std::vector<std::size_t>& rows, bool allow_fallback) {
        FeatureMatrix matrix;
        matrix.rows.reserve(rows.size());
        AggregateMaps local = aggregates;  // shared lookups plus fallbacks
        for (std::size_t i : rows) {
            const RawReview& r = corpus.reviews[i];
            if (allow_fallback) {
                local.by_user.try_emplace(r.user_id, global);
                local.by_item.try_emplace(r.item_id, global);
            }
            const double ugr = index.mean_tfidf(text.tokens[i], r.item_id);
            matrix.rows.push_back(compute_feature_vector(r, text.raw_length[i],
                                                         text.polarity[i], ugr, local, config));
            matrix.review_ids.push_back(r.review_id);
            matrix.user_ids.push_back(r.user_id);
            matrix.item_ids.push_back(r.item_id);
        }
        return matrix;
    };
    return {build_rows(train_rows, false), build_rows(test_rows, true)};
}

std::vector<double> FeatureMatrix::column(std::size_t feature_index) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const ReviewFeatures& r : rows) out.push_back(r[feature_index]);
    return out;
}

namespace {

std::string fmt_roundtrip(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_features_csv(const FeatureMatrix& matrix, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "review_id,user_id,item_id";
    for (const char* col : kFeatureColumns) out << ',' << col;
    out << '\n';
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        out << csv_escape(matrix.review_ids[i]) << ',' << csv_escape(matrix.user_ids[i]) << ','
            << csv_escape(matrix.item_ids[i]);
        for (double v : matrix.rows[i].as_array()) out << ',' << fmt_roundtrip(v);
        out << '\n';
    }
}

void write_features_json(const FeatureMatrix& matrix, const std::string& path) {
    nlohmann::json doc = nlohmann::json::array();
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        nlohmann::json row;
        row["review_id"] = matrix.review_ids[i];
        row["user_id"] = matrix.user_ids[i];
        row["item_id"] = matrix.item_ids[i];
        const auto values = matrix.rows[i].as_array();
        for (std::size_t j = 0; j < values.size(); ++j) row[kFeatureColumns[j]] = values[j];
        doc.push_back(std::move(row));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << doc.dump(2) << '\n';
}

FeatureMatrix read_features_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    FeatureMatrix matrix;
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty feature file");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        // Feature files written by this toolkit never quote id fields.
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 3 + kFeatureColumns.size())
            throw DataError(path + ":" + std::to_string(line_no) + ": bad column count");
        matrix.review_ids.push_back(cells[0]);
        matrix.user_ids.push_back(cells[1]);
        matrix.item_ids.push_back(cells[2]);
        ReviewFeatures f{};
        double* fields[] = {&f.rat,      &f.len,      &f.ugr,      &f.pol,
                            &f.coh,      &f.d_len_ru, &f.d_len_ri, &f.d_rat_ru,
                            &f.d_rat_ri, &f.d_pol_ru, &f.d_pol_ri, &f.helpfulness};
        for (std::size_t j = 0; j < 12; ++j) *fields[j] = std::stod(cells[3 + j]);
        matrix.rows.push_back(f);
    }
    return matrix;
}

}  // namespace helprank
