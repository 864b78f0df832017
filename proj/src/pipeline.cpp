#include "helprank/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "helprank/errors.hpp"
#include "helprank/report.hpp"

namespace helprank {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path ensure_out(const PipelineConfig& cfg) {
    fs::path out(cfg.out_dir);
    fs::create_directories(out);
    return out;
}

FeatureConfig feature_config(const PipelineConfig& cfg) {
    FeatureConfig fc;
    fc.log_base = cfg.log_base;
    fc.tfidf.formula = cfg.idf_formula;
    fc.tfidf.universe = cfg.doc_universe;
    fc.leave_one_out = cfg.leave_one_out;
    return fc;
}

StudyConfig study_config(const PipelineConfig& cfg) {
    StudyConfig sc;
    sc.models = cfg.models;
    sc.folds = cfg.folds;
    sc.seed = cfg.seed;
    sc.linear_hp = cfg.linear_hp;
    sc.forest_hp = cfg.forest_hp;
    sc.permutation_tests = cfg.permutation_tests;
    return sc;
}

ForestModel train_m3_forest(const FeatureMatrix& features,
                            const std::vector<std::size_t>& rows,
                            const ForestHyperparams& hp) {
    const ModelSpec spec = ModelSpec::make(ModelId::M3);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    X.reserve(rows.size());
    y.reserve(rows.size());
    for (std::size_t i : rows) {
        X.push_back(spec.project(features.rows[i]));
        y.push_back(features.rows[i].helpfulness);
    }
    return train_forest(X, y, spec, hp);
}

// Hybrid helpfulness per observation, with the forest supplied by the
// caller (full-data or per-fold depending on the stage).
HelpfulnessWeights weights_for(const RatingMatrix& matrix, const Corpus& corpus,
                               const FeatureMatrix& features, const ForestModel& m3,
                               LogBase base, HybridMode mode, std::size_t* warned) {
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < features.size(); ++i) row_of[features.review_ids[i]] = i;
    std::unordered_map<std::string, std::size_t> review_of;
    for (std::size_t i = 0; i < corpus.size(); ++i) review_of[corpus.reviews[i].review_id] = i;

    HelpfulnessWeights weights;
    weights.w.reserve(matrix.observations.size());
    for (const RatingObservation& obs : matrix.observations) {
        const auto rit = review_of.find(obs.obs_id);
        const auto fit = row_of.find(obs.obs_id);
        if (rit == review_of.end() || fit == row_of.end()) {
            // Rating without a linked review: neutral weight.
            if (warned) ++*warned;
            weights.w.push_back(1.0);
            continue;
        }
        const RawReview& review = corpus.reviews[rit->second];
        if (review.text.empty() && review.total_votes() == 0) {
            if (warned) ++*warned;
            weights.w.push_back(1.0);
            continue;
        }
        weights.w.push_back(
            predicted_helpfulness(review, features.rows[fit->second], m3, base, mode));
    }
    return weights;
}

std::string count_summary(const Corpus& corpus) {
    std::ostringstream os;
    os << corpus.size() << " reviews, " << corpus.users.size() << " users, "
       << corpus.items.size() << " items";
    return os.str();
}

}  // namespace

Corpus load_and_filter(const PipelineConfig& cfg, LoadLog* log) {
    cfg.validate_paths();
    Corpus corpus = load_corpus(cfg.reviews_path, cfg.format, cfg.malformed, log);
    if (cfg.tags.empty()) return corpus;
    const std::vector<RawItem> items = load_items(cfg.items_path, cfg.format, cfg.malformed, log);
    return filter_corpus(corpus, items, cfg.tag_set(), cfg.min_reviews_per_user);
}

TextColumns analyze_with_config(const Corpus& corpus, const PipelineConfig& cfg,
                                Stopwords* stopwords_out, LexiconScorer* scorer_out) {
    Stopwords stopwords = load_stopwords(cfg.stopwords_path);
    LexiconScorer scorer = LexiconScorer::from_file(cfg.lexicon_path);
    DictionarySuffixLemmatizer lemmatizer;
    TextPipeline pipeline;
    pipeline.stopwords = &stopwords;
    pipeline.lemmatizer = &lemmatizer;
    pipeline.scorers = {&scorer};
    TextColumns columns = analyze_text(corpus, pipeline);
    if (stopwords_out) *stopwords_out = std::move(stopwords);
    if (scorer_out) *scorer_out = std::move(scorer);
    return columns;
}

std::string stage_ingest(const PipelineConfig& cfg) {
    const fs::path out = ensure_out(cfg);
    LoadLog log;
    const Corpus corpus = load_and_filter(cfg, &log);
    save_corpus(corpus, (out / "corpus.jsonl").string());

    json summary;
    summary["parsed_records"] = log.parsed;
    summary["kept_reviews"] = corpus.size();
    summary["users"] = corpus.users.size();
    summary["items"] = corpus.items.size();
    summary["skipped"] = json::array();
    for (const SkippedRecord& s : log.skipped)
        summary["skipped"].push_back({{"line", s.line}, {"reason", s.reason}});
    std::ofstream sf(out / "ingest_summary.json", std::ios::binary);
    sf << summary.dump(2) << '\n';

    std::ostringstream os;
    os << "ingest: " << count_summary(corpus) << " -> " << (out / "corpus.jsonl").string();
    if (!log.skipped.empty()) os << " (" << log.skipped.size() << " records skipped)";
    return os.str();
}

std::string stage_stats(const PipelineConfig& cfg) {
    const fs::path out = ensure_out(cfg);
    const Corpus corpus = load_and_filter(cfg);
    if (corpus.empty()) throw DataError("stats: corpus is empty after filtering");
    const TextColumns columns = analyze_with_config(corpus, cfg);
    const StatsReport report = descriptive_stats(
        corpus, TextStatsColumns{columns.raw_length, columns.polarity}, cfg.std_formula);
    const HeaderKv header = cfg.echo();
    write_stats_csv(report, header, (out / "stats.csv").string());
    write_stats_json(report, header, (out / "stats.json").string());
    std::ostringstream os;
    os << "stats: " << report.rows.size() << " variables over " << count_summary(corpus)
       << " -> " << (out / "stats.csv").string();
    return os.str();
}

std::string stage_features(const PipelineConfig& cfg) {
    const fs::path out = ensure_out(cfg);
    const Corpus corpus = load_and_filter(cfg);
    if (corpus.empty()) throw DataError("features: corpus is empty after filtering");
    const TextColumns columns = analyze_with_config(corpus, cfg);
    const FeatureMatrix features = compute_features(corpus, columns, feature_config(cfg));
    write_features_csv(features, (out / "features.csv").string());
    write_features_json(features, (out / "features.json").string());
    std::ostringstream os;
    os << "features: " << features.size() << " rows x " << (kFeatureCount + 1)
       << " columns -> " << (out / "features.csv").string();
    return os.str();
}

std::string stage_study(const PipelineConfig& cfg) {
    const fs::path out = ensure_out(cfg);
    const Corpus corpus = load_and_filter(cfg);
    if (corpus.empty()) throw DataError("study: corpus is empty after filtering");
    const TextColumns columns = analyze_with_config(corpus, cfg);
    const FeatureConfig fc = feature_config(cfg);
    const FeatureMatrix features = compute_features(corpus, columns, fc);
    StudyConfig sc = study_config(cfg);
    sc.per_fold_average = cfg.per_fold_average;
    if (cfg.per_fold_features)
        sc.per_fold_features = [&corpus, &columns, fc](const std::vector<std::size_t>& train,
                                                       const std::vector<std::size_t>& test) {
            return compute_features_split(corpus, columns, fc, train, test);
        };
    const StudyReport report = run_study(features, sc);
    const HeaderKv header = cfg.echo();
    write_study_correlations_csv(report, header, (out / "study_correlations.csv").string());
    write_study_coefficients_csv(report, header, (out / "study_coefficients.csv").string());
    write_study_importances_csv(report, header, (out / "study_importances.csv").string());
    write_study_variable_matrix_csv(report, header,
                                    (out / "study_variable_matrix.csv").string());
    write_study_json(report, header, (out / "study.json").string());
    std::ostringstream os;
    os << "study: " << report.cv_correlations.size() << " model/regressor rows over "
       << report.n_reviews << " reviews -> " << (out / "study.json").string();
    return os.str();
}

std::string stage_train_helpfulness(const PipelineConfig& cfg) {
    const fs::path out = ensure_out(cfg);
    const Corpus corpus = load_and_filter(cfg);
    if (corpus.empty()) throw DataError("train-helpfulness: corpus is empty after filtering");
    const TextColumns columns = analyze_with_config(corpus, cfg);
    const FeatureMatrix features = compute_features(corpus, columns, feature_config(cfg));

    std::vector<std::size_t> all(features.size());
    std::iota(all.begin(), all.end(), 0);
    ForestHyperparams hp = cfg.forest_hp;
    hp.seed = mix_seed(cfg.seed, 0x6833 /* "h3" */);
    const ForestModel m3 = train_m3_forest(features, all, hp);

    const RatingMatrix matrix = RatingMatrix::from_corpus(corpus);
    std::size_t warned = 0;
    const HelpfulnessWeights weights =
        weights_for(matrix, corpus, features, m3, cfg.log_base, cfg.hybrid_mode, &warned);
    write_weights_csv(matrix, weights, (out / "weights.csv").string());

    // Model dump: flat node arrays per tree, for inspection and reuse.
    json dump;
    dump["model"] = "M3_forest";
    dump["hyperparams"] = {{"n_trees", hp.n_trees},
                           {"max_depth", hp.max_depth},
                           {"min_samples_leaf", hp.min_samples_leaf},
                           {"features_per_split", hp.features_per_split},
                           {"bootstrap", hp.bootstrap},
                           {"seed", hp.seed}};
    json importances = json::object();
    for (std::size_t j = 0; j < m3.importances.size(); ++j)
        importances[kFeatureColumns[m3.spec.feature_idx[j]]] = round6(m3.importances[j]);
    dump["importances"] = importances;
    dump["trees"] = json::array();
    for (const RegressionTree& tree : m3.trees) {
        json nodes = json::array();
        for (const TreeNode& nd : tree.nodes)
            nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
        dump["trees"].push_back(std::move(nodes));
    }
    std::ofstream mf(out / "m3_forest.json", std::ios::binary);
    mf << dump.dump() << '\n';

    std::ostringstream os;
    os << "train-helpfulness: M3 forest on " << features.size() << " reviews, weights for "
       << matrix.observations.size() << " observations -> " << (out / "weights.csv").string();
    if (warned) os << " (" << warned << " observations defaulted to weight 1.0)";
    return os.str();
}

std::string stage_recommend(const PipelineConfig& cfg) {
    const fs::path out = ensure_out(cfg);
    const Corpus corpus = load_and_filter(cfg);
    if (corpus.empty()) throw DataError("recommend: corpus is empty after filtering");
    const RatingMatrix matrix = RatingMatrix::from_corpus(corpus);

    FactorModel model;
    if (cfg.algorithm == "svd_helpfulness") {
        const TextColumns columns = analyze_with_config(corpus, cfg);
        const FeatureMatrix features = compute_features(corpus, columns, feature_config(cfg));
        std::vector<std::size_t> all(features.size());
        std::iota(all.begin(), all.end(), 0);
        ForestHyperparams fhp = cfg.forest_hp;
        fhp.seed = mix_seed(cfg.seed, 0x6833);
        const ForestModel m3 = train_m3_forest(features, all, fhp);
        const HelpfulnessWeights weights =
            weights_for(matrix, corpus, features, m3, cfg.log_base, cfg.hybrid_mode, nullptr);
        model = train_weighted_mf(matrix, weights, cfg.mf_hp);
    } else if (cfg.algorithm == "mf") {
        model = train_mf(matrix, cfg.mf_hp);
    } else if (cfg.algorithm == "svdpp") {
        model = train_svdpp(matrix, cfg.svdpp_hp);
    } else {
        throw ConfigError("recommend.algorithm must be svd_helpfulness, mf or svdpp");
    }
    save_factor_model(model, (out / "factor_model.txt").string());

    // Top-N over each user's unrated items.
    std::vector<std::vector<bool>> rated(matrix.n_users(),
                                         std::vector<bool>(matrix.n_items(), false));
    for (const RatingObservation& obs : matrix.observations) rated[obs.user][obs.item] = true;
    std::ofstream tf(out / "top_n.csv", std::ios::binary);
    if (!tf) throw DataError("cannot write top_n.csv");
    tf << "user_id,rank,item_id,estimate\n";
    for (std::uint32_t u = 0; u < matrix.n_users(); ++u) {
        std::vector<std::uint32_t> candidates;
        for (std::uint32_t i = 0; i < matrix.n_items(); ++i)
            if (!rated[u][i]) candidates.push_back(i);
        if (candidates.empty()) continue;
        const std::vector<std::uint32_t> ranked = top_n(model, u, candidates, cfg.top_n);
        for (std::size_t r = 0; r < ranked.size(); ++r)
            tf << matrix.user_ids[u] << ',' << (r + 1) << ',' << matrix.item_ids[ranked[r]]
               << ',' << fmt6(estimate_rating(model, u, ranked[r])) << '\n';
    }

    std::ostringstream os;
    os << "recommend: " << cfg.algorithm << " trained on " << matrix.observations.size()
       << " ratings (" << matrix.n_users() << " users x " << matrix.n_items()
       << " items) -> " << (out / "top_n.csv").string();
    return os.str();
}

std::string stage_evaluate(const PipelineConfig& cfg) {
    const fs::path out = ensure_out(cfg);
    const Corpus corpus = load_and_filter(cfg);
    if (corpus.empty()) throw DataError("evaluate: corpus is empty after filtering");
    const TextColumns columns = analyze_with_config(corpus, cfg);
    const FeatureMatrix features = compute_features(corpus, columns, feature_config(cfg));
    const RatingMatrix matrix = RatingMatrix::from_corpus(corpus);
    const FoldPlan plan = make_fold_plan(matrix.observations.size(), cfg.folds, cfg.eval.seed);

    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < features.size(); ++i) row_of[features.review_ids[i]] = i;

    // Per-fold forest trained on training reviews only, so helpfulness
    // ground truth never leaks from the test split.
    WeightProvider provider = [&](std::size_t fold, const RatingMatrix& train) {
        std::vector<std::size_t> train_rows;
        train_rows.reserve(train.observations.size());
        for (const RatingObservation& obs : train.observations) {
            const auto it = row_of.find(obs.obs_id);
            if (it != row_of.end()) train_rows.push_back(it->second);
        }
        ForestHyperparams hp = cfg.forest_hp;
        hp.seed = mix_seed(cfg.eval.seed, 0x6833, fold);
        const ForestModel m3 = train_m3_forest(features, train_rows, hp);
        return weights_for(train, corpus, features, m3, cfg.log_base, cfg.hybrid_mode, nullptr);
    };

    std::vector<AlgorithmConfig> algorithms;
    algorithms.push_back({"SVD_Helpfulness", FactorKind::weighted_mf, cfg.mf_hp});
    algorithms.push_back({"SVDpp", FactorKind::svdpp, cfg.svdpp_hp});

    const EvalReport report = compare_recommenders(matrix, plan, algorithms, provider, cfg.eval);
    const HeaderKv header = cfg.echo();
    write_eval_csv(report, header, (out / "eval_report.csv").string());
    write_eval_json(report, header, (out / "eval_report.json").string());

    std::ostringstream os;
    os << "evaluate: " << report.algorithm_names[0] << " vs " << report.algorithm_names[1]
       << " over " << plan.k << " folds ("
       << matrix.observations.size() << " ratings) -> " << (out / "eval_report.csv").string();
    return os.str();
}

std::string stage_report(const PipelineConfig& cfg, const std::string& json_path) {
    const fs::path out = ensure_out(cfg);
    reemit_report(json_path, out.string());
    return "report: re-emitted " + json_path + " -> " + out.string();
}

}  // namespace helprank
