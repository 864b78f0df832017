#include "helprank/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "helprank/errors.hpp"
#include "helprank/rng.hpp"

namespace helprank {

std::string to_string(FactorKind kind) {
    switch (kind) {
        case FactorKind::plain_mf: return "mf";
        case FactorKind::weighted_mf: return "weighted_mf";
        case FactorKind::svdpp: return "svdpp";
    }
    return "?";
}

RatingMatrix RatingMatrix::from_corpus(const Corpus& corpus) {
    RatingMatrix m;
    // One observation per (user, item); a later review of the same pair
    // replaces the earlier one (files are ordered oldest-first).
    std::unordered_map<std::uint64_t, std::size_t> slot;
    for (const RawReview& r : corpus.reviews) {
        auto [uit, unew] = m.user_index.try_emplace(
            r.user_id, static_cast<std::uint32_t>(m.user_ids.size()));
        if (unew) m.user_ids.push_back(r.user_id);
        auto [iit, inew] = m.item_index.try_emplace(
            r.item_id, static_cast<std::uint32_t>(m.item_ids.size()));
        if (inew) m.item_ids.push_back(r.item_id);

        RatingObservation obs;
        obs.user = uit->second;
        obs.item = iit->second;
        obs.rating = static_cast<double>(r.stars);
        obs.obs_id = r.review_id;

        const std::uint64_t key = (static_cast<std::uint64_t>(obs.user) << 32) | obs.item;
        auto [sit, fresh] = slot.try_emplace(key, m.observations.size());
        if (fresh)
            m.observations.push_back(std::move(obs));
        else
            m.observations[sit->second] = std::move(obs);
    }
    return m;
}

RatingMatrix RatingMatrix::subset(const std::vector<std::size_t>& keep) const {
    RatingMatrix m;
    m.user_ids = user_ids;
    m.item_ids = item_ids;
    m.user_index = user_index;
    m.item_index = item_index;
    m.observations.reserve(keep.size());
    for (std::size_t i : keep) m.observations.push_back(observations[i]);
    return m;
}

void HelpfulnessWeights::validate(const RatingMatrix& matrix) const {
    if (w.size() != matrix.observations.size())
        throw DataError("HelpfulnessWeights: domain does not match observation set");
    for (double v : w)
        if (!(v >= 0.0 && v <= 1.0))
            throw DataError("HelpfulnessWeights: weight outside [0,1]");
}

void write_weights_csv(const RatingMatrix& matrix, const HelpfulnessWeights& weights,
                       const std::string& path) {
    weights.validate(matrix);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "user_id,item_id,weight\n";
    char buf[64];
    for (std::size_t i = 0; i < matrix.observations.size(); ++i) {
        const RatingObservation& obs = matrix.observations[i];
        std::snprintf(buf, sizeof buf, "%.17g", weights.w[i]);
        out << matrix.user_ids[obs.user] << ',' << matrix.item_ids[obs.item] << ',' << buf
            << '\n';
    }
}

HelpfulnessWeights read_weights_csv(const RatingMatrix& matrix, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::unordered_map<std::uint64_t, double> by_pair;
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty weight file");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string user, item, weight;
        if (!std::getline(ss, user, ',') || !std::getline(ss, item, ',') ||
            !std::getline(ss, weight))
            throw DataError(path + ":" + std::to_string(line_no) + ": expected 3 columns");
        const auto uit = matrix.user_index.find(user);
        const auto iit = matrix.item_index.find(item);
        if (uit == matrix.user_index.end() || iit == matrix.item_index.end())
            throw DataError(path + ":" + std::to_string(line_no) + ": unknown user/item pair");
        by_pair[(static_cast<std::uint64_t>(uit->second) << 32) | iit->second] =
            std::stod(weight);
    }
    HelpfulnessWeights weights;
    weights.w.reserve(matrix.observations.size());
    for (const RatingObservation& obs : matrix.observations) {
        const auto it =
            by_pair.find((static_cast<std::uint64_t>(obs.user) << 32) | obs.item);
        if (it == by_pair.end())
            throw DataError(path + ": missing weight for observation " + obs.obs_id);
        weights.w.push_back(it->second);
    }
    weights.validate(matrix);
    return weights;
}

double predicted_helpfulness(const RawReview& review, const ReviewFeatures& features,
                             const ForestModel& m3, LogBase base, HybridMode mode) {
    if (mode == HybridMode::average) {
        const std::vector<double> x = m3.spec.project(features);
        return 0.5 * (perceived_helpfulness(review, base) + m3.predict_helpfulness(x));
    }
    if (review.total_votes() > 0) return perceived_helpfulness(review, base);
    const std::vector<double> x = m3.spec.project(features);
    return m3.predict_helpfulness(x);
}

namespace {

// Per-epoch visit order keyed on observation ids: removing an observation
// never reorders the remaining ones.
std::vector<std::size_t> epoch_order(const RatingMatrix& matrix, std::uint64_t seed,
                                     int epoch) {
    const std::size_t n = matrix.observations.size();
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& id = matrix.observations[i].obs_id;
        const std::uint64_t id_hash =
            id.empty() ? (static_cast<std::uint64_t>(matrix.observations[i].user) << 32 |
                          matrix.observations[i].item)
                       : fnv1a64(id);
        keyed[i] = {mix_seed(seed, static_cast<std::uint64_t>(epoch) + 1, id_hash), i};
    }
    std::sort(keyed.begin(), keyed.end(),
              [&](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first < b.first;
                  return matrix.observations[a.second].obs_id <
                         matrix.observations[b.second].obs_id;
              });
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = keyed[i].second;
    return order;
}

void init_factors(std::vector<double>& factors, std::size_t count, int K, double sigma,
                  Rng& rng) {
    factors.resize(count * static_cast<std::size_t>(K));
    for (double& v : factors) v = rng.next_normal(0.0, sigma);
}

double dot(const double* a, const double* b, int K) {
    double s = 0;
    for (int k = 0; k < K; ++k) s += a[k] * b[k];
    return s;
}

void check_finite(const std::vector<double>& v, const char* what, int epoch) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError(std::string("matrix factorization diverged (") + what +
                               ", epoch " + std::to_string(epoch) + "); lower the learning rate");
}

double frob_sq(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

FactorModel train_weighted_mf(const RatingMatrix& matrix, const HelpfulnessWeights& weights,
                              const MfHyperparams& hp) {
    if (matrix.observations.empty()) throw DataError("train_weighted_mf: zero observations");
    if (hp.K < 1) throw ConfigError("train_weighted_mf: K must be >= 1");
    if (hp.lambda < 0) throw ConfigError("train_weighted_mf: lambda must be >= 0");
    weights.validate(matrix);

    FactorModel model;
    model.kind = FactorKind::weighted_mf;
    model.K = hp.K;
    model.n_users = matrix.n_users();
    model.n_items = matrix.n_items();
    model.user_ids = matrix.user_ids;
    model.item_ids = matrix.item_ids;
    model.hp = hp;

    Rng rng(mix_seed(hp.seed, 0x6d66 /* "mf" */));
    init_factors(model.user_factors, model.n_users, hp.K, hp.init_sigma, rng);
    init_factors(model.item_factors, model.n_items, hp.K, hp.init_sigma, rng);
    if (hp.biased) {
        model.user_bias.assign(model.n_users, 0.0);
        model.item_bias.assign(model.n_items, 0.0);
        double sum = 0;
        for (const auto& o : matrix.observations) sum += o.rating;
        model.global_mean = sum / static_cast<double>(matrix.observations.size());
    }

    const int K = hp.K;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        for (std::size_t i : epoch_order(matrix, hp.seed, epoch)) {
            const double w = weights.w[i];
            if (w == 0.0) continue;  // no gradient contribution; skip entirely
            const RatingObservation& obs = matrix.observations[i];
            double* u = model.user_factors.data() + std::size_t(obs.user) * K;
            double* v = model.item_factors.data() + std::size_t(obs.item) * K;
            double pred = dot(u, v, K);
            if (hp.biased)
                pred += model.global_mean + model.user_bias[obs.user] + model.item_bias[obs.item];
            const double e = obs.rating - pred;
            for (int k = 0; k < K; ++k) {
                const double uk = u[k];
                u[k] += hp.lr * (w * e * v[k] - hp.lambda * uk);
                v[k] += hp.lr * (w * e * uk - hp.lambda * v[k]);
            }
            if (hp.biased) {
                model.user_bias[obs.user] +=
                    hp.lr * (w * e - hp.lambda * model.user_bias[obs.user]);
                model.item_bias[obs.item] +=
                    hp.lr * (w * e - hp.lambda * model.item_bias[obs.item]);
            }
        }
        check_finite(model.user_factors, "user factors", epoch);
        check_finite(model.item_factors, "item factors", epoch);

        double obj = 0;
        for (std::size_t i = 0; i < matrix.observations.size(); ++i) {
            const RatingObservation& obs = matrix.observations[i];
            double pred = dot(model.user_factors.data() + std::size_t(obs.user) * K,
                              model.item_factors.data() + std::size_t(obs.item) * K, K);
            if (hp.biased)
                pred += model.global_mean + model.user_bias[obs.user] + model.item_bias[obs.item];
            const double e = obs.rating - pred;
            obj += weights.w[i] * e * e;
        }
        obj += hp.lambda * (frob_sq(model.user_factors) + frob_sq(model.item_factors));
        model.epoch_objective.push_back(obj);
    }
    return model;
}

FactorModel train_mf(const RatingMatrix& matrix, const MfHyperparams& hp) {
    FactorModel model =
        train_weighted_mf(matrix, HelpfulnessWeights::ones(matrix.observations.size()), hp);
    model.kind = FactorKind::plain_mf;
    return model;
}

FactorModel train_svdpp(const RatingMatrix& matrix, const MfHyperparams& hp) {
    if (matrix.observations.empty()) throw DataError("train_svdpp: zero observations");
    if (hp.K < 1) throw ConfigError("train_svdpp: K must be >= 1");

    FactorModel model;
    model.kind = FactorKind::svdpp;
    model.K = hp.K;
    model.n_users = matrix.n_users();
    model.n_items = matrix.n_items();
    model.user_ids = matrix.user_ids;
    model.item_ids = matrix.item_ids;
    model.hp = hp;

    Rng rng(mix_seed(hp.seed, 0x737070 /* "spp" */));
    init_factors(model.user_factors, model.n_users, hp.K, hp.init_sigma, rng);
    init_factors(model.item_factors, model.n_items, hp.K, hp.init_sigma, rng);
    init_factors(model.implicit_factors, model.n_items, hp.K, hp.init_sigma, rng);
    model.user_bias.assign(model.n_users, 0.0);
    model.item_bias.assign(model.n_items, 0.0);

    double sum = 0;
    for (const auto& o : matrix.observations) sum += o.rating;
    model.global_mean = sum / static_cast<double>(matrix.observations.size());

    // N(u): items rated by u in the training set.
    std::vector<std::vector<std::uint32_t>> rated_by(model.n_users);
    for (const auto& o : matrix.observations) rated_by[o.user].push_back(o.item);

    const int K = hp.K;
    std::vector<double> implicit_sum(K), v_old(K);
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        for (std::size_t i : epoch_order(matrix, hp.seed, epoch)) {
            const RatingObservation& obs = matrix.observations[i];
            const auto& nu = rated_by[obs.user];
            const double norm = 1.0 / std::sqrt(static_cast<double>(nu.size()));
            std::fill(implicit_sum.begin(), implicit_sum.end(), 0.0);
            for (std::uint32_t j : nu) {
                const double* yj = model.implicit_factors.data() + std::size_t(j) * K;
                for (int k = 0; k < K; ++k) implicit_sum[k] += yj[k];
            }
            double* u = model.user_factors.data() + std::size_t(obs.user) * K;
            double* v = model.item_factors.data() + std::size_t(obs.item) * K;
            double pred = model.global_mean + model.user_bias[obs.user] +
                          model.item_bias[obs.item];
            for (int k = 0; k < K; ++k) pred += v[k] * (u[k] + norm * implicit_sum[k]);
            const double e = obs.rating - pred;

            model.user_bias[obs.user] += hp.lr * (e - hp.lambda * model.user_bias[obs.user]);
            model.item_bias[obs.item] += hp.lr * (e - hp.lambda * model.item_bias[obs.item]);
            for (int k = 0; k < K; ++k) {
                const double uk = u[k], vk = v[k];
                v_old[k] = vk;
                u[k] += hp.lr * (e * vk - hp.lambda * uk);
                v[k] += hp.lr * (e * (uk + norm * implicit_sum[k]) - hp.lambda * vk);
            }
            const double scale = hp.lr * e * norm;
            for (std::uint32_t j : nu) {
                double* yj = model.implicit_factors.data() + std::size_t(j) * K;
                for (int k = 0; k < K; ++k)
                    yj[k] += scale * v_old[k] - hp.lr * hp.lambda * yj[k];
            }
        }
        check_finite(model.user_factors, "user factors", epoch);
        check_finite(model.item_factors, "item factors", epoch);
        check_finite(model.implicit_factors, "implicit factors", epoch);

        // Objective over the training set, for the convergence monitor.
        double obj = 0;
        for (const auto& obs : matrix.observations) {
            const auto& nu = rated_by[obs.user];
            const double norm = 1.0 / std::sqrt(static_cast<double>(nu.size()));
            std::fill(implicit_sum.begin(), implicit_sum.end(), 0.0);
            for (std::uint32_t j : nu) {
                const double* yj = model.implicit_factors.data() + std::size_t(j) * K;
                for (int k = 0; k < K; ++k) implicit_sum[k] += yj[k];
            }
            const double* u = model.user_factors.data() + std::size_t(obs.user) * K;
            const double* v = model.item_factors.data() + std::size_t(obs.item) * K;
            double pred = model.global_mean + model.user_bias[obs.user] +
                          model.item_bias[obs.item];
            for (int k = 0; k < K; ++k) pred += v[k] * (u[k] + norm * implicit_sum[k]);
            const double e = obs.rating - pred;
            obj += e * e;
        }
        obj += hp.lambda * (frob_sq(model.user_factors) + frob_sq(model.item_factors) +
                            frob_sq(model.implicit_factors) + frob_sq(model.user_bias) +
                            frob_sq(model.item_bias));
        model.epoch_objective.push_back(obj);
    }

    // Cache u + |N|^(-1/2) sum y_j per user so estimation needs no N(u).
    model.user_profile = model.user_factors;
    for (std::size_t ux = 0; ux < model.n_users; ++ux) {
        const auto& nu = rated_by[ux];
        if (nu.empty()) continue;
        const double norm = 1.0 / std::sqrt(static_cast<double>(nu.size()));
        double* p = model.user_profile.data() + ux * K;
        for (std::uint32_t j : nu) {
            const double* yj = model.implicit_factors.data() + std::size_t(j) * K;
            for (int k = 0; k < K; ++k) p[k] += norm * yj[k];
        }
    }
    return model;
}

double estimate_rating(const FactorModel& model, std::uint32_t user, std::uint32_t item) {
    return estimate_rating_detail(model, user, item).value;
}

EstimateDetail estimate_rating_detail(const FactorModel& model, std::uint32_t user,
                                      std::uint32_t item, bool clamp, double lo, double hi) {
    EstimateDetail detail;
    if (user >= model.n_users || item >= model.n_items) {
        detail.fallback = true;
        detail.value = model.kind == FactorKind::svdpp ? model.global_mean : 3.0;
    } else if (model.kind == FactorKind::svdpp) {
        detail.value = model.global_mean + model.user_bias[user] + model.item_bias[item] +
                       dot(model.user_profile.data() + std::size_t(user) * model.K,
                           model.item_factors.data() + std::size_t(item) * model.K, model.K);
    } else {
        detail.value = dot(model.user_factors.data() + std::size_t(user) * model.K,
                           model.item_factors.data() + std::size_t(item) * model.K, model.K);
        if (model.hp.biased)
            detail.value += model.global_mean + model.user_bias[user] + model.item_bias[item];
    }
    if (clamp) {
        const double clamped = std::clamp(detail.value, lo, hi);
        detail.clamped = clamped != detail.value;
        detail.value = clamped;
    }
    return detail;
}

std::vector<std::size_t> rank_by_score(std::span<const double> scores,
                                       const std::vector<std::string>& tie_ids) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return tie_ids[a] < tie_ids[b];
    });
    return order;
}

std::vector<std::uint32_t> top_n(const FactorModel& model, std::uint32_t user,
                                 std::span<const std::uint32_t> candidates, std::size_t n) {
    if (n < 1) throw ConfigError("top_n: N must be >= 1");
    if (candidates.empty()) throw DataError("top_n: empty candidate set");
    std::vector<double> scores(candidates.size());
    std::vector<std::string> ids(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        scores[i] = estimate_rating(model, user, candidates[i]);
        ids[i] = model.item_ids[candidates[i]];
    }
    const std::vector<std::size_t> order = rank_by_score(scores, ids);
    std::vector<std::uint32_t> out;
    out.reserve(std::min(n, candidates.size()));
    for (std::size_t i = 0; i < order.size() && out.size() < n; ++i)
        out.push_back(candidates[order[i]]);
    return out;
}

namespace {

void write_block(std::ofstream& out, const char* label, const std::vector<double>& data,
                 std::size_t rows, int cols) {
    out << "# " << label << ' ' << rows << 'x' << cols << '\n';
    char buf[32];
    for (std::size_t r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", data[r * cols + c]);
            out << (c ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace

void save_factor_model(const FactorModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    nlohmann::json header;
    header["kind"] = to_string(model.kind);
    header["K"] = model.K;
    header["n_users"] = model.n_users;
    header["n_items"] = model.n_items;
    header["global_mean"] = model.global_mean;
    header["hyperparams"] = {{"K", model.hp.K},          {"lambda", model.hp.lambda},
                             {"lr", model.hp.lr},        {"epochs", model.hp.epochs},
                             {"seed", model.hp.seed},    {"init_sigma", model.hp.init_sigma},
                             {"biased", model.hp.biased}};
    header["user_ids"] = model.user_ids;
    header["item_ids"] = model.item_ids;
    out << header.dump() << '\n';
    write_block(out, "user_factors", model.user_factors, model.n_users, model.K);
    write_block(out, "item_factors", model.item_factors, model.n_items, model.K);
    if (!model.user_bias.empty()) {
        write_block(out, "user_bias", model.user_bias, model.n_users, 1);
        write_block(out, "item_bias", model.item_bias, model.n_items, 1);
    }
    if (!model.implicit_factors.empty())
        write_block(out, "implicit_factors", model.implicit_factors, model.n_items, model.K);
    if (!model.user_profile.empty())
        write_block(out, "user_profile", model.user_profile, model.n_users, model.K);
}

FactorModel load_factor_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty model file");
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded()) throw DataError(path + ": bad model header");

    FactorModel model;
    const std::string kind = header.at("kind").get<std::string>();
    model.kind = kind == "svdpp" ? FactorKind::svdpp
                 : kind == "weighted_mf" ? FactorKind::weighted_mf
                                         : FactorKind::plain_mf;
    model.K = header.at("K").get<int>();
    model.n_users = header.at("n_users").get<std::size_t>();
    model.n_items = header.at("n_items").get<std::size_t>();
    model.global_mean = header.at("global_mean").get<double>();
    const auto& hp = header.at("hyperparams");
    model.hp.K = hp.at("K").get<int>();
    model.hp.lambda = hp.at("lambda").get<double>();
    model.hp.lr = hp.at("lr").get<double>();
    model.hp.epochs = hp.at("epochs").get<int>();
    model.hp.seed = hp.at("seed").get<std::uint64_t>();
    model.hp.init_sigma = hp.at("init_sigma").get<double>();
    model.hp.biased = hp.at("biased").get<bool>();
    model.user_ids = header.at("user_ids").get<std::vector<std::string>>();
    model.item_ids = header.at("item_ids").get<std::vector<std::string>>();

    auto read_block = [&](const char* label, std::vector<double>& dest, std::size_t rows,
                          int cols) {
        if (!std::getline(in, line)) throw DataError(path + ": missing block " + label);
        std::istringstream tag(line);
        std::string hash, name;
        tag >> hash >> name;
        if (hash != "#" || name != label)
            throw DataError(path + ": expected block " + label + ", got " + line);
        dest.resize(rows * static_cast<std::size_t>(cols));
        for (std::size_t r = 0; r < rows; ++r) {
            if (!std::getline(in, line)) throw DataError(path + ": truncated block " + label);
            std::stringstream ss(line);
            std::string cell;
            for (int c = 0; c < cols; ++c) {
                if (!std::getline(ss, cell, ',')) throw DataError(path + ": short row in " + label);
                dest[r * cols + c] = std::stod(cell);
            }
        }
    };
    read_block("user_factors", model.user_factors, model.n_users, model.K);
    read_block("item_factors", model.item_factors, model.n_items, model.K);
    if (model.kind == FactorKind::svdpp || model.hp.biased) {
        read_block("user_bias", model.user_bias, model.n_users, 1);
        read_block("item_bias", model.item_bias, model.n_items, 1);
    }
    if (model.kind == FactorKind::svdpp) {
        read_block("implicit_factors", model.implicit_factors, model.n_items, model.K);
        read_block("user_profile", model.user_profile, model.n_users, model.K);
    }
    return model;
}

}  // namespace helprank
