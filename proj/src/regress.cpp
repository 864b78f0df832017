#include "helprank/regress.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <thread>

#include "helprank/errors.hpp"
#include "helprank/rng.hpp"

namespace helprank {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("pearson: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw DataError("pearson: need at least 2 points");
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return kNaN;  // undefined for a constant vector
    return sab / std::sqrt(saa * sbb);
}

std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("spearman: length mismatch");
    const std::vector<double> ra = midranks(a);
    const std::vector<double> rb = midranks(b);
    return pearson(ra, rb);
}

std::string to_string(ModelId id) {
    switch (id) {
        case ModelId::M1: return "M1";
        case ModelId::M2: return "M2";
        case ModelId::M3: return "M3";
    }
    return "?";
}

std::string to_string(RegressorKind kind) {
    return kind == RegressorKind::linear ? "linear" : "forest";
}

ModelSpec ModelSpec::make(ModelId id) {
    ModelSpec spec;
    spec.id = id;
    switch (id) {
        case ModelId::M1: spec.feature_idx = {0, 1, 2}; break;           // RAT, LEN, UGR
        case ModelId::M2: spec.feature_idx = {0, 1, 2, 3}; break;        // + POL
        case ModelId::M3:
            spec.feature_idx = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};       // all 11
            break;
    }
    return spec;
}

std::vector<double> ModelSpec::project(const ReviewFeatures& row) const {
    std::vector<double> x;
    x.reserve(feature_idx.size());
    for (std::size_t j : feature_idx) x.push_back(row[j]);
    return x;
}

// ---------------------------------------------------------------------------
// Linear epsilon-insensitive regression (subgradient SGD)

double LinearModel::predict(std::span<const double> x) const {
    if (x.size() != weights.size()) throw DataError("LinearModel::predict: dimension mismatch");
    double acc = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        double v = x[j];
        if (!feat_mean.empty()) v = (v - feat_mean[j]) / feat_scale[j];
        acc += weights[j] * v;
    }
    return acc;
}

LinearModel train_linear(const std::vector<std::vector<double>>& X,
                         const std::vector<double>& y, const ModelSpec& spec,
                         const LinearHyperparams& hp) {
    const std::size_t n = X.size();
    if (n == 0) throw DataError("train_linear: no rows");
    if (y.size() != n) throw DataError("train_linear: X/y mismatch");
    const std::size_t d = spec.dim();
    for (const auto& row : X)
        if (row.size() != d) throw DataError("train_linear: row dimension mismatch");
    for (double v : y)
        if (!std::isfinite(v)) throw NumericError("train_linear: non-finite target");

    LinearModel model;
    model.spec = spec;
    model.hp = hp;
    model.weights.assign(d, 0.0);

    std::vector<std::vector<double>> Xs;
    const std::vector<std::vector<double>>* data = &X;
    if (hp.standardize) {
        model.feat_mean.assign(d, 0.0);
        model.feat_scale.assign(d, 1.0);
        for (const auto& row : X)
            for (std::size_t j = 0; j < d; ++j) model.feat_mean[j] += row[j];
        for (std::size_t j = 0; j < d; ++j) model.feat_mean[j] /= static_cast<double>(n);
        std::vector<double> var(d, 0.0);
        for (const auto& row : X)
            for (std::size_t j = 0; j < d; ++j) {
                const double c = row[j] - model.feat_mean[j];
                var[j] += c * c;
            }
        for (std::size_t j = 0; j < d; ++j) {
            const double s = std::sqrt(var[j] / static_cast<double>(n));
            model.feat_scale[j] = s > 0 ? s : 1.0;
        }
        Xs.resize(n, std::vector<double>(d));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                Xs[i][j] = (X[i][j] - model.feat_mean[j]) / model.feat_scale[j];
        data = &Xs;
    }

    // Pegasos-style objective: (lambda/2)||w||^2 + mean eps-insensitive loss,
    // lambda = 1/(C n) matching the usual C-scaled SVR formulation.
    const double lambda = 1.0 / (hp.C * static_cast<double>(n));
    double bias = 0;
    std::vector<double>& w = model.weights;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(hp.seed, 0x7376 /* "sv" */));

    auto objective = [&]() {
        double reg = 0;
        for (double wj : w) reg += wj * wj;
        double loss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double pred = bias;
            for (std::size_t j = 0; j < d; ++j) pred += w[j] * (*data)[i][j];
            loss += std::max(0.0, std::abs(y[i] - pred) - hp.epsilon);
        }
        return 0.5 * lambda * reg + loss / static_cast<double>(n);
    };

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        const double eta = hp.lr0 / (1.0 + hp.lr_decay * static_cast<double>(epoch));
        rng.shuffle(order);
        for (std::size_t i : order) {
            double pred = bias;
            for (std::size_t j = 0; j < d; ++j) pred += w[j] * (*data)[i][j];
            const double err = y[i] - pred;
            const double shrink = 1.0 - eta * lambda;
            for (double& wj : w) wj *= shrink;
            if (std::abs(err) > hp.epsilon) {
                const double step = err > 0 ? eta : -eta;
                for (std::size_t j = 0; j < d; ++j) w[j] += step * (*data)[i][j];
                bias += step;
            }
        }
        for (double wj : w)
            if (!std::isfinite(wj)) throw NumericError("train_linear: diverged at epoch " +
                                                       std::to_string(epoch));
        model.epoch_objective.push_back(objective());
    }
    model.bias = bias;
    return model;
}

// ---------------------------------------------------------------------------
// Random forest regression (CART)

double RegressionTree::predict(std::span<const double> x) const {
    int node = 0;
    for (;;) {
        const TreeNode& nd = nodes[node];
        if (nd.feature < 0) return nd.value;
        node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
}

namespace {

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0;
    double decrease = 0;  // SSE(parent) - SSE(left) - SSE(right)
};

struct TreeBuilder {
    const std::vector<std::vector<double>>& X;
    const std::vector<double>& y;
    std::size_t dim;
    const ForestHyperparams& hp;
    std::size_t features_per_split;
    Rng rng;
    RegressionTree tree;
    std::vector<double> importance;  // SSE decrease accumulated per feature

    TreeBuilder(const std::vector<std::vector<double>>& X_, const std::vector<double>& y_,
                std::size_t dim_, const ForestHyperparams& hp_, std::size_t fps,
                std::uint64_t seed)
        : X(X_), y(y_), dim(dim_), hp(hp_), features_per_split(fps), rng(seed),
          importance(dim_, 0.0) {}

    SplitChoice best_split_on(std::size_t feature, const std::vector<std::size_t>& idx,
                              double parent_sse) const {
        const std::size_t n = idx.size();
        std::vector<std::pair<double, double>> pts(n);  // (x, y) sorted by x
        for (std::size_t k = 0; k < n; ++k)
            pts[k] = {X[idx[k]][feature], y[idx[k]]};
        std::sort(pts.begin(), pts.end());

        SplitChoice best;
        best.feature = feature;
        double sum_left = 0, sumsq_left = 0;
        double sum_total = 0, sumsq_total = 0;
        for (const auto& [xv, yv] : pts) {
            sum_total += yv;
            sumsq_total += yv * yv;
        }
        const std::size_t min_leaf = static_cast<std::size_t>(hp.min_samples_leaf);
        for (std::size_t p = 1; p < n; ++p) {
            const double yv = pts[p - 1].second;
            sum_left += yv;
            sumsq_left += yv * yv;
            if (pts[p - 1].first == pts[p].first) continue;  // no boundary here
            if (p < min_leaf || n - p < min_leaf) continue;
            const double nl = static_cast<double>(p), nr = static_cast<double>(n - p);
            const double sse_l = sumsq_left - sum_left * sum_left / nl;
            const double sum_r = sum_total - sum_left;
            const double sse_r = (sumsq_total - sumsq_left) - sum_r * sum_r / nr;
            const double decrease = parent_sse - sse_l - sse_r;
            if (decrease > best.decrease) {
                best.found = true;
                best.decrease = decrease;
                // The midpoint of two one-ulp-apart values can round up to
                // the right value, which would route the whole node left;
                // fall back to the left value so x <= threshold keeps the
                // intended partition.
                double thr = 0.5 * (pts[p - 1].first + pts[p].first);
                if (thr >= pts[p].first) thr = pts[p - 1].first;
                best.threshold = thr;
            }
        }
        return best;
    }

    int build(std::vector<std::size_t> idx, int depth) {
        const std::size_t n = idx.size();
        double sum = 0, sumsq = 0;
        for (std::size_t i : idx) {
            sum += y[i];
            sumsq += y[i] * y[i];
        }
        const double mean = sum / static_cast<double>(n);
        const double sse = std::max(0.0, sumsq - sum * sum / static_cast<double>(n));

        auto make_leaf = [&]() {
            TreeNode leaf;
            leaf.value = mean;
            tree.nodes.push_back(leaf);
            return static_cast<int>(tree.nodes.size() - 1);
        };
        if (n < 2 * static_cast<std::size_t>(hp.min_samples_leaf)) return make_leaf();
        if (hp.max_depth >= 0 && depth >= hp.max_depth) return make_leaf();
        if (sse <= 1e-24) return make_leaf();

        // Seeded feature subsample; if none of the sampled features admits a
        // valid split, widen to the full feature set before giving up.
        std::vector<std::size_t> candidates(dim);
        std::iota(candidates.begin(), candidates.end(), 0);
        rng.shuffle(candidates);
        SplitChoice best;
        for (std::size_t k = 0; k < features_per_split; ++k) {
            const SplitChoice c = best_split_on(candidates[k], idx, sse);
            if (c.found && (!best.found || c.decrease > best.decrease)) best = c;
        }
        if (!best.found) {
            for (std::size_t k = features_per_split; k < dim; ++k) {
                const SplitChoice c = best_split_on(candidates[k], idx, sse);
                if (c.found && (!best.found || c.decrease > best.decrease)) best = c;
            }
        }
        if (!best.found) return make_leaf();

        std::vector<std::size_t> left, right;
        for (std::size_t i : idx) {
            (X[i][best.feature] <= best.threshold ? left : right).push_back(i);
        }
        if (left.empty() || right.empty()) return make_leaf();

        importance[best.feature] += best.decrease;
        idx.clear();
        idx.shrink_to_fit();

        TreeNode node;
        node.feature = static_cast<int>(best.feature);
        node.threshold = best.threshold;
        tree.nodes.push_back(node);
        const int self = static_cast<int>(tree.nodes.size() - 1);
        const int l = build(std::move(left), depth + 1);
        const int r = build(std::move(right), depth + 1);
        tree.nodes[self].left = l;
        tree.nodes[self].right = r;
        return self;
    }
};

}  // namespace

ForestModel train_forest(const std::vector<std::vector<double>>& X,
                         const std::vector<double>& y, const ModelSpec& spec,
                         const ForestHyperparams& hp) {
    const std::size_t n = X.size();
    if (n == 0) throw DataError("train_forest: no rows");
    if (y.size() != n) throw DataError("train_forest: X/y mismatch");
    const std::size_t d = spec.dim();
    for (const auto& row : X)
        if (row.size() != d) throw DataError("train_forest: row dimension mismatch");
    for (double v : y)
        if (!std::isfinite(v)) throw NumericError("train_forest: non-finite target");
    if (hp.n_trees < 1) throw ConfigError("train_forest: n_trees must be >= 1");

    const std::size_t fps = hp.features_per_split > 0
                                ? std::min<std::size_t>(hp.features_per_split, d)
                                : (d + 2) / 3;  // ceil(d/3), regression convention

    ForestModel model;
    model.spec = spec;
    model.hp = hp;
    model.trees.resize(hp.n_trees);
    std::vector<std::vector<double>> per_tree_importance(hp.n_trees);

    auto build_tree = [&](int t) {
        // Per-tree RNG stream derived from (seed, tree); parallel build order
        // cannot change results.
        TreeBuilder builder(X, y, d, hp, fps, mix_seed(hp.seed, 0x74726565 /* "tree" */, t));
        std::vector<std::size_t> sample(n);
        if (hp.bootstrap) {
            for (std::size_t i = 0; i < n; ++i)
                sample[i] = static_cast<std::size_t>(builder.rng.next_below(n));
        } else {
            std::iota(sample.begin(), sample.end(), 0);
        }
        builder.build(std::move(sample), 0);
        model.trees[t] = std::move(builder.tree);
        // Normalize per tree so each tree contributes equally.
        double total = 0;
        for (double v : builder.importance) total += v;
        if (total > 0)
            for (double& v : builder.importance) v /= total;
        per_tree_importance[t] = std::move(builder.importance);
    };

    unsigned workers = hp.threads > 0 ? static_cast<unsigned>(hp.threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(hp.n_trees));
    if (workers <= 1) {
        for (int t = 0; t < hp.n_trees; ++t) build_tree(t);
    } else {
        std::vector<std::future<void>> futures;
        for (unsigned wkr = 0; wkr < workers; ++wkr) {
            futures.push_back(std::async(std::launch::async, [&, wkr] {
                for (int t = static_cast<int>(wkr); t < hp.n_trees;
                     t += static_cast<int>(workers))
                    build_tree(t);
            }));
        }
        for (auto& f : futures) f.get();
    }

    model.importances.assign(d, 0.0);
    for (const auto& imp : per_tree_importance)
        for (std::size_t j = 0; j < d; ++j) model.importances[j] += imp[j];
    double total = 0;
    for (double v : model.importances) total += v;
    if (total > 0)
        for (double& v : model.importances) v /= total;
    // else: no split anywhere (constant target); all-zero importances stand.
    return model;
}

double ForestModel::predict(std::span<const double> x) const {
    if (x.size() != spec.dim()) throw DataError("ForestModel::predict: dimension mismatch");
    double sum = 0;
    for (const RegressionTree& t : trees) sum += t.predict(x);
    return sum / static_cast<double>(trees.size());
}

double ForestModel::predict_helpfulness(std::span<const double> x, bool* clamped) const {
    const double raw = predict(x);
    const double hi = std::nextafter(1.0, 0.0);
    const double v = std::clamp(raw, 0.0, hi);
    if (clamped) *clamped = v != raw;
    return v;
}

std::vector<double> feature_importance(const ForestModel& forest) { return forest.importances; }

// ---------------------------------------------------------------------------
// Study harness

namespace {

std::vector<std::vector<double>> project_rows(const FeatureMatrix& features,
                                              const ModelSpec& spec,
                                              const std::vector<std::size_t>& rows) {
    std::vector<std::vector<double>> X;
    X.reserve(rows.size());
    for (std::size_t i : rows) X.push_back(spec.project(features.rows[i]));
    return X;
}

std::vector<double> gather(const std::vector<double>& v, const std::vector<std::size_t>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t i : rows) out.push_back(v[i]);
    return out;
}

}  // namespace

StudyReport run_study(const FeatureMatrix& features, const StudyConfig& config) {
    const std::size_t n = features.size();
    if (config.folds < 2) throw ConfigError("run_study: folds must be >= 2");
    if (n < config.folds) throw DataError("run_study: fewer reviews than folds");

    StudyReport report;
    report.n_reviews = n;
    report.folds = config.folds;
    report.seed = config.seed;

    const std::vector<double> y = features.helpfulness_column();
    const FoldPlan plan = make_fold_plan(n, config.folds, config.seed);
    for (std::size_t f = 0; f < config.folds; ++f)
        if (plan.test_indices(f).size() < 2) throw DataError("run_study: fold with < 2 samples");

    for (ModelId model_id : config.models) {
        const ModelSpec spec = ModelSpec::make(model_id);
        for (RegressorKind reg : config.regressors) {
            std::vector<double> pooled_pred(n, 0.0);
            std::vector<double> fold_pearson, fold_spearman;
            for (std::size_t fold = 0; fold < config.folds; ++fold) {
                const std::vector<std::size_t> train = plan.train_indices(fold);
                const std::vector<std::size_t> test = plan.test_indices(fold);

                FeatureMatrix train_feats, test_feats;
                const FeatureMatrix* train_src = &features;
                const FeatureMatrix* test_src = &features;
                std::vector<std::size_t> train_rows = train, test_rows = test;
                if (config.per_fold_features) {
                    std::tie(train_feats, test_feats) = (*config.per_fold_features)(train, test);
                    train_src = &train_feats;
                    test_src = &test_feats;
                    train_rows.resize(train_feats.size());
                    std::iota(train_rows.begin(), train_rows.end(), 0);
                    test_rows.resize(test_feats.size());
                    std::iota(test_rows.begin(), test_rows.end(), 0);
                }
                const auto X_train = project_rows(*train_src, spec, train_rows);
                const auto y_train = gather(train_src->helpfulness_column(), train_rows);
                const auto X_test = project_rows(*test_src, spec, test_rows);

                const std::uint64_t fold_seed =
                    mix_seed(config.seed, static_cast<std::uint64_t>(model_id) * 16 +
                                              static_cast<std::uint64_t>(reg) * 4,
                             fold);
                std::vector<double> pred(test.size());
                if (reg == RegressorKind::linear) {
                    LinearHyperparams hp = config.linear_hp;
                    hp.seed = fold_seed;
                    const LinearModel m = train_linear(X_train, y_train, spec, hp);
                    for (std::size_t k = 0; k < X_test.size(); ++k) pred[k] = m.predict(X_test[k]);
                } else {
                    ForestHyperparams hp = config.forest_hp;
                    hp.seed = fold_seed;
                    const ForestModel m = train_forest(X_train, y_train, spec, hp);
                    for (std::size_t k = 0; k < X_test.size(); ++k) pred[k] = m.predict(X_test[k]);
                }
                for (std::size_t k = 0; k < test.size(); ++k) pooled_pred[test[k]] = pred[k];
                if (config.per_fold_average) {
                    const auto y_test = gather(y, test);
                    fold_pearson.push_back(pearson(pred, y_test));
                    fold_spearman.push_back(spearman(pred, y_test));
                }
            }
            CorrelationRow row;
            row.model = model_id;
            row.regressor = reg;
            if (config.per_fold_average) {
                double sp = 0, ss = 0;
                for (double v : fold_pearson) sp += v;
                for (double v : fold_spearman) ss += v;
                row.pearson_r = sp / static_cast<double>(fold_pearson.size());
                row.spearman_r = ss / static_cast<double>(fold_spearman.size());
            } else {
                row.pearson_r = pearson(pooled_pred, y);
                row.spearman_r = spearman(pooled_pred, y);
            }
            report.cv_correlations.push_back(row);
        }
    }

    // Full-data fits for the coefficient / importance tables.
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (ModelId model_id : config.models) {
        const ModelSpec spec = ModelSpec::make(model_id);
        const auto X = project_rows(features, spec, all);
        const bool wants_linear =
            std::find(config.regressors.begin(), config.regressors.end(),
                      RegressorKind::linear) != config.regressors.end();
        const bool wants_forest =
            std::find(config.regressors.begin(), config.regressors.end(),
                      RegressorKind::forest) != config.regressors.end();
        if (wants_linear) {
            LinearHyperparams hp = config.linear_hp;
            hp.seed = mix_seed(config.seed, static_cast<std::uint64_t>(model_id), 0xf17);
            const LinearModel m = train_linear(X, y, spec, hp);
            StudyReport::Coefficients coeffs;
            coeffs.model = model_id;
            coeffs.bias = m.bias;
            coeffs.weights = m.weights;
            if (config.permutation_tests > 0) {
                // Permutation significance: how often a shuffled target gives
                // an equally large |coefficient|.
                std::vector<std::size_t> exceed(spec.dim(), 0);
                Rng rng(mix_seed(config.seed, 0x9e77, static_cast<std::uint64_t>(model_id)));
                std::vector<double> y_perm = y;
                for (int it = 0; it < config.permutation_tests; ++it) {
                    rng.shuffle(y_perm);
                    LinearHyperparams php = hp;
                    php.seed = mix_seed(hp.seed, 0x3141, it);
                    const LinearModel pm = train_linear(X, y_perm, spec, php);
                    for (std::size_t j = 0; j < spec.dim(); ++j)
                        if (std::abs(pm.weights[j]) >= std::abs(m.weights[j])) ++exceed[j];
                }
                coeffs.permutation_p.resize(spec.dim());
                for (std::size_t j = 0; j < spec.dim(); ++j)
                    coeffs.permutation_p[j] = (static_cast<double>(exceed[j]) + 1.0) /
                                              (static_cast<double>(config.permutation_tests) + 1.0);
            }
            report.linear_coefficients.push_back(std::move(coeffs));
        }
        if (wants_forest) {
            ForestHyperparams hp = config.forest_hp;
            hp.seed = mix_seed(config.seed, static_cast<std::uint64_t>(model_id), 0xf02);
            const ForestModel m = train_forest(X, y, spec, hp);
            report.forest_importances.push_back({model_id, m.importances});
        }
    }

    // Inter-variable Pearson matrix over the 11 features + helpfulness.
    const std::size_t vars = kFeatureCount + 1;
    report.variable_matrix.assign(vars, std::vector<double>(vars, 1.0));
    std::vector<std::vector<double>> cols(vars);
    for (std::size_t j = 0; j < vars; ++j) cols[j] = features.column(j);
    for (std::size_t a = 0; a < vars; ++a)
        for (std::size_t b = a + 1; b < vars; ++b) {
            const double r = pearson(cols[a], cols[b]);
            report.variable_matrix[a][b] = r;
            report.variable_matrix[b][a] = r;
        }
    return report;
}

}  // namespace helprank
