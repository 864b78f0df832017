#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "helprank/errors.hpp"
#include "helprank/recommend.hpp"
#include "helprank/rng.hpp"

using namespace helprank;

namespace {

RatingMatrix make_matrix(std::size_t n_users, std::size_t n_items,
                         const std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>& obs) {
    RatingMatrix m;
    for (std::size_t u = 0; u < n_users; ++u) {
        m.user_ids.push_back("u" + std::to_string(u));
        m.user_index[m.user_ids.back()] = static_cast<std::uint32_t>(u);
    }
    for (std::size_t i = 0; i < n_items; ++i) {
        m.item_ids.push_back("i" + std::to_string(i));
        m.item_index[m.item_ids.back()] = static_cast<std::uint32_t>(i);
    }
    std::size_t id = 0;
    for (const auto& [u, i, r] : obs)
        m.observations.push_back({u, i, r, "obs" + std::to_string(id++)});
    return m;
}

// Exactly factorizable rank-1 matrix with entries in a sensible range.
RatingMatrix rank_one_matrix(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> a(n), b(n);
    for (double& v : a) v = 1.0 + rng.next_double();
    for (double& v : b) v = 1.0 + rng.next_double();
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> obs;
    for (std::uint32_t u = 0; u < n; ++u)
        for (std::uint32_t i = 0; i < n; ++i)
            obs.emplace_back(u, i, a[u] * b[i]);
    return make_matrix(n, n, obs);
}

double train_rmse(const FactorModel& model, const RatingMatrix& matrix) {
    double se = 0;
    for (const RatingObservation& obs : matrix.observations) {
        const double e = obs.rating - estimate_rating(model, obs.user, obs.item);
        se += e * e;
    }
    return std::sqrt(se / static_cast<double>(matrix.observations.size()));
}

}  // namespace

TEST_CASE("RatingMatrix::from_corpus dedupes (user,item), latest review wins") {
    std::vector<RawReview> reviews;
    RawReview a;
    a.review_id = "r1";
    a.user_id = "u";
    a.item_id = "i";
    a.stars = 2;
    a.text = "first";
    RawReview b = a;
    b.review_id = "r2";
    b.stars = 5;
    b.text = "revised";
    reviews = {a, b};
    const Corpus corpus = Corpus::from_reviews(reviews);
    const RatingMatrix m = RatingMatrix::from_corpus(corpus);
    REQUIRE(m.observations.size() == 1);
    CHECK(m.observations[0].rating == doctest::Approx(5.0));
    CHECK(m.observations[0].obs_id == "r2");
}

TEST_CASE("weight-neutrality: all-ones weighted MF equals plain MF bit-exactly") {
    const RatingMatrix m = rank_one_matrix(8, 5);
    MfHyperparams hp;
    hp.K = 3;
    hp.lambda = 0.01;
    hp.lr = 0.02;
    hp.epochs = 25;
    hp.seed = 42;
    const FactorModel plain = train_mf(m, hp);
    const FactorModel weighted =
        train_weighted_mf(m, HelpfulnessWeights::ones(m.observations.size()), hp);
    REQUIRE(plain.epoch_objective.size() == weighted.epoch_objective.size());
    for (std::size_t e = 0; e < plain.epoch_objective.size(); ++e)
        CHECK(plain.epoch_objective[e] == weighted.epoch_objective[e]);
    for (std::size_t k = 0; k < plain.user_factors.size(); ++k)
        CHECK(plain.user_factors[k] == weighted.user_factors[k]);
}

TEST_CASE("rank-1 noiseless matrix: training RMSE < 1e-3 with K=1, lambda=0") {
    const RatingMatrix m = rank_one_matrix(15, 9);
    MfHyperparams hp;
    hp.K = 1;
    hp.lambda = 0.0;
    hp.lr = 0.02;
    hp.epochs = 500;
    hp.seed = 1;
    const FactorModel model = train_mf(m, hp);
    CHECK(train_rmse(model, m) < 1e-3);
}

TEST_CASE("zero-weight observations are elided exactly") {
    const std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> obs = {
        {0, 0, 4.0}, {0, 1, 2.0}, {1, 0, 5.0}, {1, 1, 3.0}, {2, 2, 1.0}, {2, 0, 4.0}};
    RatingMatrix full = make_matrix(3, 3, obs);
    HelpfulnessWeights weights;
    weights.w = {1.0, 0.0, 0.8, 0.0, 0.5, 1.0};

    // Matrix with the zero-weight observations removed, ids preserved.
    RatingMatrix reduced = full.subset({0, 2, 4, 5});
    HelpfulnessWeights reduced_weights;
    reduced_weights.w = {1.0, 0.8, 0.5, 1.0};

    MfHyperparams hp;
    hp.K = 2;
    hp.lambda = 0.05;
    hp.lr = 0.03;
    hp.epochs = 40;
    hp.seed = 17;
    const FactorModel a = train_weighted_mf(full, weights, hp);
    const FactorModel b = train_weighted_mf(reduced, reduced_weights, hp);
    for (std::size_t k = 0; k < a.user_factors.size(); ++k)
        CHECK(a.user_factors[k] == b.user_factors[k]);
    for (std::size_t k = 0; k < a.item_factors.size(); ++k)
        CHECK(a.item_factors[k] == b.item_factors[k]);
}

TEST_CASE("weighted objective is non-increasing under a small learning rate") {
    const RatingMatrix m = rank_one_matrix(10, 3);
    HelpfulnessWeights w = HelpfulnessWeights::ones(m.observations.size());
    Rng rng(8);
    for (double& v : w.w) v = 0.2 + 0.8 * rng.next_double();
    MfHyperparams hp;
    hp.K = 2;
    hp.lambda = 0.01;
    hp.lr = 0.002;
    hp.epochs = 60;
    hp.seed = 4;
    const FactorModel model = train_weighted_mf(m, w, hp);
    for (std::size_t e = 1; e < model.epoch_objective.size(); ++e)
        CHECK(model.epoch_objective[e] <= model.epoch_objective[e - 1] + 1e-6);
}

TEST_CASE("doubling a weight behaves like duplicating the observation") {
    // Identical objectives, different SGD visit patterns: final test RMSE
    // must agree within 2%.
    Rng rng(19);
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> train_obs, test_obs;
    std::vector<double> a(12), b(12);
    for (double& v : a) v = 1.2 + rng.next_double();
    for (double& v : b) v = 1.2 + rng.next_double();
    for (std::uint32_t u = 0; u < 12; ++u)
        for (std::uint32_t i = 0; i < 12; ++i) {
            if (rng.next_double() < 0.25) test_obs.emplace_back(u, i, a[u] * b[i]);
            else train_obs.emplace_back(u, i, a[u] * b[i]);
        }

    RatingMatrix doubled = make_matrix(12, 12, train_obs);
    HelpfulnessWeights dw;
    dw.w.assign(doubled.observations.size(), 0.5);
    dw.w[0] = 1.0;  // doubled weight

    RatingMatrix duplicated = make_matrix(12, 12, train_obs);
    RatingObservation dup = duplicated.observations[0];
    dup.obs_id = "obs_dup";
    duplicated.observations.push_back(dup);
    HelpfulnessWeights pw;
    pw.w.assign(duplicated.observations.size(), 0.5);

    MfHyperparams hp;
    hp.K = 2;
    hp.lambda = 0.02;
    hp.lr = 0.01;
    hp.epochs = 300;
    hp.seed = 6;
    const FactorModel ma = train_weighted_mf(doubled, dw, hp);
    const FactorModel mb = train_weighted_mf(duplicated, pw, hp);

    const RatingMatrix test = make_matrix(12, 12, test_obs);
    const double ra = train_rmse(ma, test);
    const double rb = train_rmse(mb, test);
    CHECK(std::abs(ra - rb) / rb < 0.02);
}

TEST_CASE("svdpp: degenerate single observation converges to its rating") {
    const RatingMatrix m = make_matrix(1, 1, {{0, 0, 4.0}});
    MfHyperparams hp;
    hp.K = 2;
    hp.lambda = 0.0;
    hp.lr = 0.05;
    hp.epochs = 200;
    hp.seed = 2;
    const FactorModel model = train_svdpp(m, hp);
    CHECK(estimate_rating(model, 0, 0) == doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("svdpp: constant ratings collapse onto the global mean") {
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> obs;
    for (std::uint32_t u = 0; u < 6; ++u)
        for (std::uint32_t i = 0; i < 6; ++i) obs.emplace_back(u, i, 3.0);
    const RatingMatrix m = make_matrix(6, 6, obs);
    MfHyperparams hp;
    hp.K = 2;
    hp.lambda = 0.05;
    hp.lr = 0.01;
    hp.epochs = 100;
    hp.seed = 3;
    const FactorModel model = train_svdpp(m, hp);
    CHECK(model.global_mean == doctest::Approx(3.0));
    for (std::uint32_t u = 0; u < 6; ++u)
        for (std::uint32_t i = 0; i < 6; ++i)
            CHECK(estimate_rating(model, u, i) == doctest::Approx(3.0).epsilon(0.02));
    for (double bias : model.user_bias) CHECK(std::abs(bias) < 0.05);
}

TEST_CASE("svdpp beats unbiased MF on planted-bias data") {
    Rng rng(29);
    std::vector<double> user_bias(20), item_bias(20), a(20), b(20);
    for (double& v : user_bias) v = rng.next_normal(0, 0.6);
    for (double& v : item_bias) v = rng.next_normal(0, 0.6);
    for (double& v : a) v = rng.next_normal(0, 0.5);
    for (double& v : b) v = rng.next_normal(0, 0.5);
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> train_obs, test_obs;
    for (std::uint32_t u = 0; u < 20; ++u)
        for (std::uint32_t i = 0; i < 20; ++i) {
            const double r = std::clamp(3.2 + user_bias[u] + item_bias[i] + a[u] * b[i], 1.0, 5.0);
            if (rng.next_double() < 0.2) test_obs.emplace_back(u, i, r);
            else train_obs.emplace_back(u, i, r);
        }
    const RatingMatrix train = make_matrix(20, 20, train_obs);
    const RatingMatrix test = make_matrix(20, 20, test_obs);
    MfHyperparams hp;
    hp.K = 4;
    hp.lambda = 0.05;
    hp.lr = 0.01;
    hp.epochs = 120;
    hp.seed = 10;
    const FactorModel svdpp = train_svdpp(train, hp);
    const FactorModel mf = train_mf(train, hp);
    CHECK(train_rmse(svdpp, test) < train_rmse(mf, test));
}

TEST_CASE("estimate_rating: fallbacks and clamping") {
    const RatingMatrix m = make_matrix(2, 2, {{0, 0, 4.0}, {1, 1, 2.0}});
    MfHyperparams hp;
    hp.K = 2;
    hp.epochs = 5;
    hp.seed = 1;
    const FactorModel mf = train_mf(m, hp);
    const EstimateDetail unknown = estimate_rating_detail(mf, 9, 0);
    CHECK(unknown.fallback);
    CHECK(unknown.value == doctest::Approx(3.0));

    const FactorModel spp = train_svdpp(m, hp);
    const EstimateDetail unknown2 = estimate_rating_detail(spp, 0, 9);
    CHECK(unknown2.fallback);
    CHECK(unknown2.value == doctest::Approx(spp.global_mean));

    // Zero factors pre-clamp 0, post-clamp 1.
    FactorModel zero;
    zero.kind = FactorKind::plain_mf;
    zero.K = 2;
    zero.n_users = 1;
    zero.n_items = 1;
    zero.user_factors = {0, 0};
    zero.item_factors = {0, 0};
    zero.user_ids = {"u"};
    zero.item_ids = {"i"};
    CHECK(estimate_rating(zero, 0, 0) == doctest::Approx(0.0));
    const EstimateDetail clamped = estimate_rating_detail(zero, 0, 0, true);
    CHECK(clamped.value == doctest::Approx(1.0));
    CHECK(clamped.clamped);
}

TEST_CASE("top_n: ordering, ties and caps") {
    FactorModel model;
    model.kind = FactorKind::plain_mf;
    model.K = 1;
    model.n_users = 1;
    model.n_items = 4;
    model.user_factors = {1.0};
    model.item_factors = {2.0, 3.0, 2.0, 1.0};  // i0 and i2 tie
    model.user_ids = {"u"};
    model.item_ids = {"i0", "i1", "i2", "i3"};

    const std::vector<std::uint32_t> candidates = {0, 1, 2, 3};
    const auto full = top_n(model, 0, candidates, 10);
    REQUIRE(full.size() == 4);
    CHECK(full[0] == 1);
    CHECK(full[1] == 0);  // tie with i2 broken by id: "i0" < "i2"
    CHECK(full[2] == 2);
    CHECK(full[3] == 3);

    const auto top2 = top_n(model, 0, candidates, 2);
    REQUIRE(top2.size() == 2);
    CHECK(top2[0] == 1);

    CHECK_THROWS_AS(top_n(model, 0, std::vector<std::uint32_t>{}, 3), DataError);
}

TEST_CASE("rank_by_score: invariant under strictly increasing transforms") {
    Rng rng(15);
    std::vector<double> scores(20);
    for (double& s : scores) s = rng.next_double() * 4;
    scores[3] = scores[11];  // force one tie
    std::vector<std::string> ids;
    for (int i = 0; i < 20; ++i) ids.push_back("item" + std::to_string(i));
    const auto base = rank_by_score(scores, ids);
    std::vector<double> transformed = scores;
    for (double& s : transformed) s = std::exp(s) + 7.0;
    CHECK(rank_by_score(transformed, ids) == base);
}

TEST_CASE("divergence aborts with a numeric error") {
    const RatingMatrix m = rank_one_matrix(6, 2);
    MfHyperparams hp;
    hp.K = 2;
    hp.lr = 50.0;  // absurd step size
    hp.epochs = 50;
    hp.seed = 1;
    CHECK_THROWS_AS(train_mf(m, hp), NumericError);
    CHECK_THROWS_AS(train_svdpp(m, hp), NumericError);
}

TEST_CASE("determinism: same seed, same factors; different seed differs") {
    const RatingMatrix m = rank_one_matrix(6, 13);
    MfHyperparams hp;
    hp.K = 2;
    hp.epochs = 10;
    hp.seed = 100;
    const FactorModel a = train_mf(m, hp);
    const FactorModel b = train_mf(m, hp);
    CHECK(a.user_factors == b.user_factors);
    CHECK(a.item_factors == b.item_factors);
    hp.seed = 101;
    const FactorModel c = train_mf(m, hp);
    CHECK(a.user_factors != c.user_factors);
}

TEST_CASE("factor model save/load round trip") {
    const RatingMatrix m = rank_one_matrix(5, 21);
    MfHyperparams hp;
    hp.K = 3;
    hp.epochs = 15;
    hp.seed = 31;
    const FactorModel svdpp = train_svdpp(m, hp);
    const auto path = std::filesystem::temp_directory_path() / "helprank_model.txt";
    save_factor_model(svdpp, path.string());
    const FactorModel loaded = load_factor_model(path.string());
    CHECK(loaded.kind == FactorKind::svdpp);
    CHECK(loaded.K == svdpp.K);
    CHECK(loaded.global_mean == doctest::Approx(svdpp.global_mean));
    REQUIRE(loaded.user_profile.size() == svdpp.user_profile.size());
    for (std::uint32_t u = 0; u < 5; ++u)
        for (std::uint32_t i = 0; i < 5; ++i)
            CHECK(estimate_rating(loaded, u, i) ==
                  doctest::Approx(estimate_rating(svdpp, u, i)).epsilon(1e-12));
}

TEST_CASE("weights: validation and CSV round trip") {
    const RatingMatrix m = make_matrix(2, 2, {{0, 0, 4.0}, {1, 1, 2.0}, {0, 1, 3.0}});
    HelpfulnessWeights w;
    w.w = {0.2, 0.9, 1.0};
    const auto path = std::filesystem::temp_directory_path() / "helprank_weights.csv";
    write_weights_csv(m, w, path.string());
    const HelpfulnessWeights loaded = read_weights_csv(m, path.string());
    CHECK(loaded.w == w.w);

    HelpfulnessWeights bad;
    bad.w = {0.5, 1.5, 0.0};
    CHECK_THROWS_AS(bad.validate(m), DataError);
    HelpfulnessWeights short_w;
    short_w.w = {0.5};
    CHECK_THROWS_AS(short_w.validate(m), DataError);
}

TEST_CASE("predicted_helpfulness: ground truth wins, fallback uses the forest") {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    Rng rng(41);
    const ModelSpec spec = ModelSpec::make(ModelId::M3);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> row(11);
        for (double& v : row) v = rng.next_double() * 0.8;
        X.push_back(row);
        y.push_back(0.5 * row[0] + 0.1);
    }
    ForestHyperparams fhp;
    fhp.n_trees = 10;
    fhp.seed = 3;
    const ForestModel m3 = train_forest(X, y, spec, fhp);

    RawReview voted;
    voted.review_id = "r";
    voted.user_id = "u";
    voted.item_id = "i";
    voted.stars = 4;
    voted.votes_useful = 1;
    voted.votes_cool = 2;
    ReviewFeatures f{};
    f.rat = 0.5;
    CHECK(predicted_helpfulness(voted, f, m3) == doctest::Approx(squash(3.0)));

    RawReview unvoted = voted;
    unvoted.votes_useful = unvoted.votes_cool = 0;
    const double pred = predicted_helpfulness(unvoted, f, m3);
    CHECK(pred == doctest::Approx(m3.predict_helpfulness(spec.project(f))));
    CHECK(pred >= 0.0);
    CHECK(pred < 1.0);

    // Config-only alternative: plain average of both measures.
    const double avg = predicted_helpfulness(voted, f, m3, LogBase::natural,
                                             HybridMode::average);
    CHECK(avg == doctest::Approx(0.5 * (squash(3.0) +
                                        m3.predict_helpfulness(spec.project(f)))));
}
