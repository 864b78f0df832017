#include "helprank/config.hpp"

#include <filesystem>
#include <fstream>

#include "helprank/errors.hpp"

namespace helprank {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& raw, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : raw) {
        if (c == sep) {
            const std::string t = trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    const std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

class KvReader {
  public:
    explicit KvReader(const std::map<std::string, std::string>& kv) : kv_(kv) {}

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string str(const std::string& key, const std::string& fallback = "") const {
        const auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }
    template <class T>
    T num(const std::string& key, T fallback) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            if constexpr (std::is_floating_point_v<T>)
                return static_cast<T>(std::stod(it->second));
            else if constexpr (std::is_signed_v<T>)
                return static_cast<T>(std::stoll(it->second));
            else
                return static_cast<T>(std::stoull(it->second));
        } catch (...) {
            throw ConfigError("bad numeric value for " + key + ": " + it->second);
        }
    }
    bool flag(const std::string& key, bool fallback) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        const std::string& v = it->second;
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("bad boolean value for " + key + ": " + v);
    }

  private:
    const std::map<std::string, std::string>& kv_;
};

}  // namespace

std::map<std::string, std::string> parse_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(path + ":" + std::to_string(line_no) + ": unterminated section");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        kv[(section.empty() ? key : section + "." + key)] = trim(t.substr(eq + 1));
    }
    return kv;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    return from_map(parse_ini(path));
}

PipelineConfig PipelineConfig::from_map(const std::map<std::string, std::string>& kv) {
    KvReader r(kv);
    PipelineConfig cfg;

    cfg.reviews_path = r.str("data.reviews");
    cfg.items_path = r.str("data.items");
    const std::string format = r.str("data.format", "json-lines");
    if (format == "json-lines") cfg.format = InputFormat::json_lines;
    else if (format == "csv") cfg.format = InputFormat::csv;
    else throw ConfigError("data.format must be json-lines or csv, got " + format);
    const std::string policy = r.str("data.malformed", "skip-and-log");
    if (policy == "skip-and-log") cfg.malformed = MalformedPolicy::skip_and_log;
    else if (policy == "fail-fast") cfg.malformed = MalformedPolicy::fail_fast;
    else throw ConfigError("data.malformed must be skip-and-log or fail-fast");

    cfg.tags = split_list(r.str("filter.tags"), ';');
    cfg.min_reviews_per_user = r.num<std::size_t>("filter.min_reviews_per_user", 10);

    cfg.stopwords_path = r.str("text.stopwords", "data/stopwords.txt");
    cfg.lexicon_path = r.str("text.lexicon", "data/lexicon.txt");

    const std::string base = r.str("features.log_base", "natural");
    if (base == "natural" || base == "e") cfg.log_base = LogBase::natural;
    else if (base == "10" || base == "base10") cfg.log_base = LogBase::base10;
    else throw ConfigError("features.log_base must be natural or 10");
    const std::string idf = r.str("features.idf", "ln");
    if (idf == "ln") cfg.idf_formula = IdfFormula::ln_n_over_df;
    else if (idf == "smoothed") cfg.idf_formula = IdfFormula::smoothed;
    else throw ConfigError("features.idf must be ln or smoothed");
    const std::string universe = r.str("features.idf_universe", "corpus");
    if (universe == "corpus") cfg.doc_universe = DocUniverse::corpus_wide;
    else if (universe == "item") cfg.doc_universe = DocUniverse::per_item;
    else throw ConfigError("features.idf_universe must be corpus or item");
    cfg.leave_one_out = r.flag("features.leave_one_out", false);

    const std::string stdf = r.str("stats.std", "population");
    if (stdf == "population") cfg.std_formula = StdFormula::population;
    else if (stdf == "sample") cfg.std_formula = StdFormula::sample;
    else throw ConfigError("stats.std must be population or sample");

    if (r.has("study.models")) {
        cfg.models.clear();
        for (const std::string& name : split_list(r.str("study.models"), ',')) {
            if (name == "M1") cfg.models.push_back(ModelId::M1);
            else if (name == "M2") cfg.models.push_back(ModelId::M2);
            else if (name == "M3") cfg.models.push_back(ModelId::M3);
            else throw ConfigError("study.models entries must be M1, M2 or M3, got " + name);
        }
        if (cfg.models.empty()) throw ConfigError("study.models must name at least one model");
    }
    cfg.folds = r.num<std::size_t>("study.folds", 5);
    cfg.seed = r.num<std::uint64_t>("study.seed", 7);
    cfg.linear_hp.epsilon = r.num<double>("study.svr_epsilon", 0.0);
    cfg.linear_hp.C = r.num<double>("study.svr_c", 1.0);
    cfg.linear_hp.epochs = r.num<int>("study.svr_epochs", 200);
    cfg.linear_hp.lr0 = r.num<double>("study.svr_lr", 0.05);
    cfg.linear_hp.lr_decay = r.num<double>("study.svr_lr_decay", 0.02);
    cfg.linear_hp.standardize = r.flag("study.svr_standardize", false);
    cfg.forest_hp.n_trees = r.num<int>("study.forest_trees", 100);
    cfg.forest_hp.max_depth = r.num<int>("study.forest_max_depth", -1);
    cfg.forest_hp.min_samples_leaf = r.num<int>("study.forest_min_leaf", 2);
    cfg.forest_hp.features_per_split = r.num<int>("study.forest_features_per_split", -1);
    cfg.forest_hp.threads = r.num<int>("study.forest_threads", 0);
    cfg.permutation_tests = r.num<int>("study.permutation_tests", 0);
    cfg.per_fold_average = r.flag("study.per_fold_average", false);
    cfg.per_fold_features = r.flag("study.per_fold_features", false);

    cfg.mf_hp.K = r.num<int>("recommend.k", 50);
    cfg.mf_hp.lambda = r.num<double>("recommend.lambda", 0.02);
    cfg.mf_hp.lr = r.num<double>("recommend.lr", 0.01);
    cfg.mf_hp.epochs = r.num<int>("recommend.epochs", 50);
    cfg.mf_hp.init_sigma = r.num<double>("recommend.init_sigma", 0.1);
    cfg.mf_hp.biased = r.flag("recommend.biased", false);
    cfg.mf_hp.seed = r.num<std::uint64_t>("recommend.seed", 7);
    cfg.svdpp_hp = cfg.mf_hp;
    cfg.svdpp_hp.biased = false;
    cfg.svdpp_hp.lambda = r.num<double>("recommend.svdpp_lambda", cfg.mf_hp.lambda);
    cfg.svdpp_hp.epochs = r.num<int>("recommend.svdpp_epochs", cfg.mf_hp.epochs);
    cfg.algorithm = r.str("recommend.algorithm", "svd_helpfulness");
    const std::string hybrid = r.str("recommend.helpfulness_mode", "hybrid");
    if (hybrid == "hybrid") cfg.hybrid_mode = HybridMode::ground_truth_else_model;
    else if (hybrid == "average") cfg.hybrid_mode = HybridMode::average;
    else throw ConfigError("recommend.helpfulness_mode must be hybrid or average");
    cfg.top_n = r.num<std::size_t>("recommend.top_n", 10);

    cfg.eval.top_n = r.num<std::size_t>("eval.top_n", 10);
    cfg.eval.relevance_threshold = r.num<double>("eval.relevance_threshold", 4.0);
    cfg.eval.graded_gains = r.flag("eval.graded_gains", true);
    cfg.eval.clamp_estimates = r.flag("eval.clamp", true);
    cfg.eval.seed = r.num<std::uint64_t>("eval.seed", cfg.seed);

    cfg.out_dir = r.str("output.dir", "out");

    // Unknown keys are configuration mistakes, not silent no-ops.
    static const std::unordered_set<std::string> known = {
        "data.reviews", "data.items", "data.format", "data.malformed",
        "filter.tags", "filter.min_reviews_per_user",
        "text.stopwords", "text.lexicon",
        "features.log_base", "features.idf", "features.idf_universe",
        "features.leave_one_out",
        "stats.std",
        "study.models", "study.folds", "study.seed", "study.svr_epsilon", "study.svr_c",
        "study.svr_epochs", "study.svr_lr", "study.svr_lr_decay",
        "study.svr_standardize", "study.forest_trees", "study.forest_max_depth",
        "study.forest_min_leaf", "study.forest_features_per_split",
        "study.forest_threads", "study.permutation_tests",
        "study.per_fold_average", "study.per_fold_features",
        "recommend.k", "recommend.lambda", "recommend.lr", "recommend.epochs",
        "recommend.init_sigma", "recommend.biased", "recommend.seed",
        "recommend.svdpp_lambda", "recommend.svdpp_epochs",
        "recommend.algorithm", "recommend.helpfulness_mode", "recommend.top_n",
        "eval.top_n", "eval.relevance_threshold", "eval.graded_gains",
        "eval.clamp", "eval.seed",
        "output.dir",
    };
    for (const auto& [key, value] : kv)
        if (!known.count(key)) throw ConfigError("unknown config key: " + key);
    return cfg;
}

void PipelineConfig::validate_paths() const {
    namespace fs = std::filesystem;
    auto require = [](const std::string& path, const char* what) {
        if (path.empty()) throw ConfigError(std::string(what) + " path not configured");
        if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
    };
    require(reviews_path, "review file");
    if (!tags.empty()) require(items_path, "item file");
    require(stopwords_path, "stopword file");
    require(lexicon_path, "lexicon file");
}

std::unordered_set<std::string> PipelineConfig::tag_set() const {
    return {tags.begin(), tags.end()};
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::echo() const {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("reviews", reviews_path);
    if (!items_path.empty()) kv.emplace_back("items", items_path);
    kv.emplace_back("format", format == InputFormat::json_lines ? "json-lines" : "csv");
    if (!tags.empty()) {
        std::string joined;
        for (const std::string& t : tags) {
            if (!joined.empty()) joined += ';';
            joined += t;
        }
        kv.emplace_back("tags", joined);
        kv.emplace_back("min_reviews_per_user", std::to_string(min_reviews_per_user));
    }
    kv.emplace_back("log_base", log_base == LogBase::natural ? "natural" : "10");
    kv.emplace_back("idf", idf_formula == IdfFormula::ln_n_over_df ? "ln" : "smoothed");
    kv.emplace_back("idf_universe",
                    doc_universe == DocUniverse::corpus_wide ? "corpus" : "item");
    kv.emplace_back("std", std_formula == StdFormula::population ? "population" : "sample");
    kv.emplace_back("folds", std::to_string(folds));
    kv.emplace_back("seed", std::to_string(seed));
    return kv;
}

}  // namespace helprank
