#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "helprank/corpus.hpp"
#include "helprank/eval.hpp"
#include "helprank/features.hpp"
#include "helprank/regress.hpp"

namespace helprank {

// Flat "[section]" + "key = value" text. Values keep inner whitespace;
// full-line comments start with '#' or ';'. Keys are addressed as
// "section.key".
std::map<std::string, std::string> parse_ini(const std::string& path);

struct PipelineConfig {
    // [data]
    std::string reviews_path;
    std::string items_path;
    InputFormat format = InputFormat::json_lines;
    MalformedPolicy malformed = MalformedPolicy::skip_and_log;

    // [filter]
    std::vector<std::string> tags;          // empty = no filtering pass
    std::size_t min_reviews_per_user = 10;

    // [text]
    std::string stopwords_path;
    std::string lexicon_path;

    // [features]
    LogBase log_base = LogBase::natural;
    IdfFormula idf_formula = IdfFormula::ln_n_over_df;
    DocUniverse doc_universe = DocUniverse::corpus_wide;
    bool leave_one_out = false;

    // [stats]
    StdFormula std_formula = StdFormula::population;

    // [study]
    std::vector<ModelId> models = {ModelId::M1, ModelId::M2, ModelId::M3};
    std::size_t folds = 5;
    std::uint64_t seed = 7;  // fixed default; never wall-clock
    LinearHyperparams linear_hp;
    ForestHyperparams forest_hp;
    int permutation_tests = 0;
    bool per_fold_average = false;   // average per-fold correlations instead of pooling
    bool per_fold_features = false;  // rebuild TF/IDF + aggregates per training fold

    // [recommend]
    MfHyperparams mf_hp;          // weighted / plain MF
    MfHyperparams svdpp_hp;
    std::string algorithm = "svd_helpfulness";  // recommend subcommand
    HybridMode hybrid_mode = HybridMode::ground_truth_else_model;
    std::size_t top_n = 10;

    // [eval]
    EvalConfig eval;

    // [output]
    std::string out_dir = "out";

    static PipelineConfig from_file(const std::string& path);
    static PipelineConfig from_map(const std::map<std::string, std::string>& kv);

    // Throws ConfigError when referenced paths are missing.
    void validate_paths() const;
    std::unordered_set<std::string> tag_set() const;
    // Echoed into every report header.
    std::vector<std::pair<std::string, std::string>> echo() const;
};

}  // namespace helprank
