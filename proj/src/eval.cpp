#include "helprank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "helprank/errors.hpp"

namespace helprank {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ErrorMetrics error_metrics(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.size() != actual.size()) throw DataError("error_metrics: length mismatch");
    if (predicted.empty()) throw DataError("error_metrics: empty input");
    double se = 0, ae = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double e = predicted[i] - actual[i];
        se += e * e;
        ae += std::abs(e);
    }
    const double n = static_cast<double>(predicted.size());
    return {std::sqrt(se / n), ae / n};
}

TopNMetrics topn_metrics(std::span<const std::uint32_t> recommended,
                         const std::vector<std::uint32_t>& relevant, std::size_t n) {
    if (n < 1) throw ConfigError("topn_metrics: N must be >= 1");
    if (relevant.empty()) throw DataError("topn_metrics: empty relevant set");
    const std::size_t depth = std::min(n, recommended.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < depth; ++i)
        if (std::find(relevant.begin(), relevant.end(), recommended[i]) != relevant.end())
            ++hits;
    TopNMetrics m;
    m.precision = depth == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(depth);
    m.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
    m.f1 = (m.precision + m.recall) > 0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

RankMetrics ranking_metrics(std::span<const std::uint32_t> recommended,
                            const std::vector<std::uint32_t>& relevant,
                            const std::map<std::uint32_t, double>& gains) {
    if (relevant.empty()) throw DataError("ranking_metrics: empty relevant set");
    RankMetrics m;

    std::size_t hits = 0;
    double ap = 0;
    for (std::size_t i = 0; i < recommended.size(); ++i) {
        const bool hit =
            std::find(relevant.begin(), relevant.end(), recommended[i]) != relevant.end();
        if (!hit) continue;
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(i + 1);
        if (hits == 1) m.rr = 1.0 / static_cast<double>(i + 1);
    }
    m.ap = ap / static_cast<double>(relevant.size());

    // DCG with log2(rank+1) discount; ideal ranking sorts the same gain
    // multiset descending.
    double dcg = 0;
    std::vector<double> gain_values;
    gain_values.reserve(recommended.size());
    for (std::size_t i = 0; i < recommended.size(); ++i) {
        const auto it = gains.find(recommended[i]);
        const double g = it == gains.end() ? 0.0 : it->second;
        gain_values.push_back(g);
        dcg += g / std::log2(static_cast<double>(i + 2));
    }
    std::sort(gain_values.begin(), gain_values.end(), std::greater<>());
    double idcg = 0;
    for (std::size_t i = 0; i < gain_values.size(); ++i)
        idcg += gain_values[i] / std::log2(static_cast<double>(i + 2));
    m.ndcg = idcg > 0 ? dcg / idcg : 0.0;
    return m;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("wilcoxon: length mismatch");
    if (a.empty()) throw DataError("wilcoxon: empty input");

    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) throw DataError("wilcoxon: all differences zero");
    const std::size_t n = diffs.size();

    std::vector<double> abs_d(n);
    for (std::size_t i = 0; i < n; ++i) abs_d[i] = std::abs(diffs[i]);

    // Mid-ranks of |d|, identical to the Spearman tie convention.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return abs_d[x] < abs_d[y]; });
    std::vector<double> ranks(n);
    std::vector<std::size_t> tie_sizes;
    {
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
            const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
            for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
            tie_sizes.push_back(j - i + 1);
            i = j + 1;
        }
    }

    double w_plus = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (diffs[i] > 0) w_plus += ranks[i];
    const double total = static_cast<double>(n) * static_cast<double>(n + 1) / 2.0;
    const double w_minus = total - w_plus;

    WilcoxonResult result;
    result.statistic = std::min(w_plus, w_minus);
    result.n_effective = n;

    if (n <= 15) {
        // Exact tie-aware null: DP over doubled ranks (mid-ranks are
        // half-integers) counting sign assignments by their W+ value.
        result.exact = true;
        std::vector<long> r2(n);
        long max_sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            r2[i] = std::lround(2.0 * ranks[i]);
            max_sum += r2[i];
        }
        std::vector<double> counts(static_cast<std::size_t>(max_sum) + 1, 0.0);
        counts[0] = 1.0;
        long reached = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (long s = reached; s >= 0; --s)
                if (counts[s] > 0) counts[s + r2[i]] += counts[s];
            reached += r2[i];
        }
        const double denom = std::pow(2.0, static_cast<double>(n));
        const long w_min2 = std::lround(2.0 * result.statistic);
        double tail_low = 0, tail_high = 0;
        for (long s = 0; s <= max_sum; ++s) {
            if (s <= w_min2) tail_low += counts[s];
            if (s >= max_sum - w_min2) tail_high += counts[s];
        }
        result.p_value = std::min(1.0, (tail_low + tail_high) / denom);
    } else {
        // Normal approximation with tie correction.
        const double nn = static_cast<double>(n);
        const double mean = nn * (nn + 1.0) / 4.0;
        double tie_term = 0;
        for (std::size_t t : tie_sizes) {
            const double td = static_cast<double>(t);
            tie_term += td * td * td - td;
        }
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
        if (var <= 0) {
            result.p_value = 1.0;
        } else {
            const double z = (result.statistic - mean) / std::sqrt(var);
            result.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
        }
    }
    return result;
}

namespace {

MetricValues pool_metrics(const std::vector<std::array<double, 6>>& rank_rows,
                          const std::vector<double>& sq_err,
                          const std::vector<double>& abs_err) {
    MetricValues v;
    if (!rank_rows.empty()) {
        double acc[6] = {0, 0, 0, 0, 0, 0};
        for (const auto& row : rank_rows)
            for (int j = 0; j < 6; ++j) acc[j] += row[j];
        const double n = static_cast<double>(rank_rows.size());
        v.precision = acc[0] / n;
        v.recall = acc[1] / n;
        v.f1 = acc[2] / n;
        v.map = acc[3] / n;
        v.mrr = acc[4] / n;
        v.ndcg = acc[5] / n;
    }
    if (!sq_err.empty()) {
        double se = 0, ae = 0;
        for (double e : sq_err) se += e;
        for (double e : abs_err) ae += e;
        v.rmse = std::sqrt(se / static_cast<double>(sq_err.size()));
        v.mae = ae / static_cast<double>(abs_err.size());
    }
    return v;
}

}  // namespace

EvalReport compare_recommenders(const RatingMatrix& matrix, const FoldPlan& plan,
                                const std::vector<AlgorithmConfig>& algorithms,
                                const WeightProvider& weights, const EvalConfig& config) {
    if (algorithms.size() < 2) throw ConfigError("compare_recommenders: need >= 2 algorithms");
    if (plan.assignment.size() != matrix.observations.size())
        throw DataError("compare_recommenders: fold plan does not cover the rating matrix");

    const std::size_t n_alg = algorithms.size();
    EvalReport report;
    report.config = config;
    report.folds = plan.k;
    for (const auto& a : algorithms) report.algorithm_names.push_back(a.name);

    // Paired samples aligned across algorithms: one row per (fold, user)
    // for the rank metrics, one row per test observation for the errors.
    std::vector<std::vector<std::array<double, 6>>> rank_rows(n_alg);
    std::vector<std::vector<double>> sq_err(n_alg), abs_err(n_alg);
    report.by_fold.resize(plan.k, std::vector<MetricValues>(n_alg));

    for (std::size_t fold = 0; fold < plan.k; ++fold) {
        const std::vector<std::size_t> train_idx = plan.train_indices(fold);
        const std::vector<std::size_t> test_idx = plan.test_indices(fold);
        if (train_idx.empty() || test_idx.empty())
            throw DataError("compare_recommenders: empty fold " + std::to_string(fold));
        const RatingMatrix train = matrix.subset(train_idx);

        // Test observations grouped per user, deterministic order.
        std::map<std::uint32_t, std::vector<std::size_t>> by_user;
        for (std::size_t i : test_idx) by_user[matrix.observations[i].user].push_back(i);

        std::vector<std::vector<std::array<double, 6>>> fold_rank(n_alg);
        std::vector<std::vector<double>> fold_sq(n_alg), fold_abs(n_alg);

        for (std::size_t ai = 0; ai < n_alg; ++ai) {
            const AlgorithmConfig& alg = algorithms[ai];
            MfHyperparams hp = alg.hp;
            hp.seed = mix_seed(alg.hp.seed, 0xe7a1, fold);

            FactorModel model;
            try {
                switch (alg.kind) {
                    case FactorKind::weighted_mf: {
                        HelpfulnessWeights w = weights(fold, train);
                        w.validate(train);
                        model = train_weighted_mf(train, w, hp);
                        break;
                    }
                    case FactorKind::plain_mf:
                        model = train_mf(train, hp);
                        break;
                    case FactorKind::svdpp:
                        model = train_svdpp(train, hp);
                        break;
                }
            } catch (const std::exception& e) {
                throw NumericError("fold " + std::to_string(fold) + ", algorithm " + alg.name +
                                   ": " + e.what());
            }

            for (const auto& [user, obs_list] : by_user) {
                std::vector<std::uint32_t> candidates;
                std::vector<double> scores;
                std::vector<std::string> tie_ids;
                std::vector<std::uint32_t> relevant;
                std::map<std::uint32_t, double> gains;
                for (std::size_t oi : obs_list) {
                    const RatingObservation& obs = matrix.observations[oi];
                    candidates.push_back(obs.item);
                    scores.push_back(estimate_rating(model, user, obs.item));
                    tie_ids.push_back(matrix.item_ids[obs.item]);
                    const bool rel = obs.rating >= config.relevance_threshold;
                    if (rel) relevant.push_back(obs.item);
                    gains[obs.item] = config.graded_gains ? obs.rating : (rel ? 1.0 : 0.0);

                    const EstimateDetail est = estimate_rating_detail(
                        model, user, obs.item, config.clamp_estimates, config.clamp_lo,
                        config.clamp_hi);
                    const double err = est.value - obs.rating;
                    fold_sq[ai].push_back(err * err);
                    fold_abs[ai].push_back(std::abs(err));
                }
                if (relevant.empty()) {
                    if (ai == 0) ++report.skipped_users;
                    continue;
                }
                std::vector<std::uint32_t> ranked;
                for (std::size_t pos : rank_by_score(scores, tie_ids))
                    ranked.push_back(candidates[pos]);
                const TopNMetrics t = topn_metrics(ranked, relevant, config.top_n);
                const RankMetrics r = ranking_metrics(ranked, relevant, gains);
                fold_rank[ai].push_back({t.precision, t.recall, t.f1, r.ap, r.rr, r.ndcg});
            }
        }

        for (std::size_t ai = 0; ai < n_alg; ++ai) {
            report.by_fold[fold][ai] = pool_metrics(fold_rank[ai], fold_sq[ai], fold_abs[ai]);
            rank_rows[ai].insert(rank_rows[ai].end(), fold_rank[ai].begin(), fold_rank[ai].end());
            sq_err[ai].insert(sq_err[ai].end(), fold_sq[ai].begin(), fold_sq[ai].end());
            abs_err[ai].insert(abs_err[ai].end(), fold_abs[ai].begin(), fold_abs[ai].end());
        }
    }

    for (std::size_t ai = 0; ai < n_alg; ++ai)
        report.values.push_back(pool_metrics(rank_rows[ai], sq_err[ai], abs_err[ai]));

    const std::size_t baseline = n_alg - 1;
    for (std::size_t ai = 0; ai < n_alg; ++ai) {
        if (ai == baseline) continue;
        PairComparison cmp;
        cmp.candidate = ai;
        cmp.baseline = baseline;
        const MetricValues& a = report.values[ai];
        const MetricValues& b = report.values[baseline];
        auto rel = [](double x, double y) { return y != 0 ? (x - y) / y * 100.0 : kNaN; };
        cmp.rel_diff_pct.precision = rel(a.precision, b.precision);
        cmp.rel_diff_pct.recall = rel(a.recall, b.recall);
        cmp.rel_diff_pct.f1 = rel(a.f1, b.f1);
        cmp.rel_diff_pct.map = rel(a.map, b.map);
        cmp.rel_diff_pct.mrr = rel(a.mrr, b.mrr);
        cmp.rel_diff_pct.ndcg = rel(a.ndcg, b.ndcg);
        cmp.rel_diff_pct.rmse = rel(a.rmse, b.rmse);
        cmp.rel_diff_pct.mae = rel(a.mae, b.mae);

        // Paired columns for the six rank metrics, then squared / absolute
        // errors for RMSE / MAE.
        for (std::size_t metric = 0; metric < 8; ++metric) {
            std::vector<double> xs, ys;
            if (metric < 6) {
                xs.reserve(rank_rows[ai].size());
                ys.reserve(rank_rows[baseline].size());
                for (const auto& row : rank_rows[ai]) xs.push_back(row[metric]);
                for (const auto& row : rank_rows[baseline]) ys.push_back(row[metric]);
            } else if (metric == 6) {
                xs = sq_err[ai];
                ys = sq_err[baseline];
            } else {
                xs = abs_err[ai];
                ys = abs_err[baseline];
            }
            WilcoxonResult w;
            if (xs.empty() || xs.size() != ys.size()) {
                w.p_value = kNaN;
            } else {
                try {
                    w = wilcoxon_signed_rank(xs, ys);
                } catch (const DataError&) {
                    // Identical algorithms: degenerate test, non-significant.
                    w.p_value = kNaN;
                    w.n_effective = 0;
                }
            }
            cmp.wilcoxon[metric] = w;
            cmp.significant[metric] = std::isfinite(w.p_value) && w.p_value < 0.05;
        }
        report.comparisons.push_back(std::move(cmp));
    }
    return report;
}

}  // namespace helprank
