#include "helprank/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "helprank/errors.hpp"
#include "helprank/features.hpp"

namespace helprank {

using nlohmann::json;

std::string fmt6(double v) {
    if (std::isnan(v)) return "";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

double round6(double v) {
    if (std::isnan(v)) return v;
    return std::round(v * 1e6) / 1e6;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    return out;
}

void write_header(std::ofstream& out, const HeaderKv& header) {
    for (const auto& [k, v] : header) out << "# " << k << " = " << v << '\n';
}

json header_to_json(const HeaderKv& header) {
    json h = json::object();
    for (const auto& [k, v] : header) h[k] = v;
    return h;
}

json nan_safe(double v) {
    if (std::isnan(v)) return nullptr;
    return round6(v);
}

void dump_json(const json& doc, const std::string& path) {
    std::ofstream out = open_out(path);
    out << doc.dump(2) << '\n';
}

}  // namespace

void write_stats_csv(const StatsReport& report, const HeaderKv& header, const std::string& path) {
    std::ofstream out = open_out(path);
    write_header(out, header);
    out << "variable,count,min,max,mean,std,median\n";
    for (const StatsRow& row : report.rows) {
        out << csv_escape(row.variable) << ',' << row.count << ',' << fmt6(row.min) << ','
            << fmt6(row.max) << ',' << fmt6(row.mean) << ',' << fmt6(row.std) << ','
            << fmt6(row.median) << '\n';
    }
}

void write_stats_json(const StatsReport& report, const HeaderKv& header, const std::string& path) {
    json doc;
    doc["type"] = "stats";
    doc["config"] = header_to_json(header);
    doc["rows"] = json::array();
    for (const StatsRow& row : report.rows) {
        doc["rows"].push_back({{"variable", row.variable},
                               {"count", row.count},
                               {"min", nan_safe(row.min)},
                               {"max", nan_safe(row.max)},
                               {"mean", nan_safe(row.mean)},
                               {"std", nan_safe(row.std)},
                               {"median", nan_safe(row.median)}});
    }
    dump_json(doc, path);
}

void write_study_correlations_csv(const StudyReport& report, const HeaderKv& header,
                                  const std::string& path) {
    std::ofstream out = open_out(path);
    write_header(out, header);
    out << "model,regressor,pearson,spearman\n";
    for (const CorrelationRow& row : report.cv_correlations)
        out << to_string(row.model) << ',' << to_string(row.regressor) << ','
            << fmt6(row.pearson_r) << ',' << fmt6(row.spearman_r) << '\n';
}

namespace {

// Wide block: one row per variable, one column per model; variables outside
// a model's subset stay blank.
void write_wide_table(std::ofstream& out, const std::vector<ModelId>& models,
                      const std::vector<std::vector<double>>& per_model_values,
                      const std::vector<std::vector<std::size_t>>& per_model_idx,
                      const std::vector<double>* biases) {
    out << "variable";
    for (ModelId m : models) out << ',' << to_string(m);
    out << '\n';
    if (biases) {
        out << "(bias)";
        for (std::size_t m = 0; m < models.size(); ++m) out << ',' << fmt6((*biases)[m]);
        out << '\n';
    }
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        out << kFeatureColumns[j];
        for (std::size_t m = 0; m < models.size(); ++m) {
            out << ',';
            const auto& idx = per_model_idx[m];
            for (std::size_t k = 0; k < idx.size(); ++k) {
                if (idx[k] == j) {
                    out << fmt6(per_model_values[m][k]);
                    break;
                }
            }
        }
        out << '\n';
    }
}

}  // namespace

void write_study_coefficients_csv(const StudyReport& report, const HeaderKv& header,
                                  const std::string& path) {
    std::ofstream out = open_out(path);
    write_header(out, header);
    std::vector<ModelId> models;
    std::vector<std::vector<double>> values;
    std::vector<std::vector<std::size_t>> idx;
    std::vector<double> biases;
    for (const auto& c : report.linear_coefficients) {
        models.push_back(c.model);
        values.push_back(c.weights);
        idx.push_back(ModelSpec::make(c.model).feature_idx);
        biases.push_back(c.bias);
    }
    write_wide_table(out, models, values, idx, &biases);
}

void write_study_importances_csv(const StudyReport& report, const HeaderKv& header,
                                 const std::string& path) {
    std::ofstream out = open_out(path);
    write_header(out, header);
    std::vector<ModelId> models;
    std::vector<std::vector<double>> values;
    std::vector<std::vector<std::size_t>> idx;
    for (const auto& imp : report.forest_importances) {
        models.push_back(imp.model);
        values.push_back(imp.values);
        idx.push_back(ModelSpec::make(imp.model).feature_idx);
    }
    write_wide_table(out, models, values, idx, nullptr);
}

void write_study_variable_matrix_csv(const StudyReport& report, const HeaderKv& header,
                                     const std::string& path) {
    std::ofstream out = open_out(path);
    write_header(out, header);
    out << "variable";
    for (const char* name : kFeatureColumns) out << ',' << name;
    out << '\n';
    for (std::size_t a = 0; a < report.variable_matrix.size(); ++a) {
        out << kFeatureColumns[a];
        for (double v : report.variable_matrix[a]) out << ',' << fmt6(v);
        out << '\n';
    }
}

void write_study_json(const StudyReport& report, const HeaderKv& header,
                      const std::string& path) {
    json doc;
    doc["type"] = "study";
    doc["config"] = header_to_json(header);
    doc["n_reviews"] = report.n_reviews;
    doc["folds"] = report.folds;
    doc["seed"] = report.seed;
    doc["cv_correlations"] = json::array();
    for (const CorrelationRow& row : report.cv_correlations)
        doc["cv_correlations"].push_back({{"model", to_string(row.model)},
                                          {"regressor", to_string(row.regressor)},
                                          {"pearson", nan_safe(row.pearson_r)},
                                          {"spearman", nan_safe(row.spearman_r)}});
    doc["linear_coefficients"] = json::array();
    for (const auto& c : report.linear_coefficients) {
        json entry;
        entry["model"] = to_string(c.model);
        entry["bias"] = round6(c.bias);
        const ModelSpec spec = ModelSpec::make(c.model);
        json weights = json::object();
        for (std::size_t k = 0; k < c.weights.size(); ++k)
            weights[kFeatureColumns[spec.feature_idx[k]]] = round6(c.weights[k]);
        entry["weights"] = std::move(weights);
        if (!c.permutation_p.empty()) {
            json pvals = json::object();
            for (std::size_t k = 0; k < c.permutation_p.size(); ++k)
                pvals[kFeatureColumns[spec.feature_idx[k]]] = round6(c.permutation_p[k]);
            entry["permutation_p"] = std::move(pvals);
        }
        doc["linear_coefficients"].push_back(std::move(entry));
    }
    doc["forest_importances"] = json::array();
    for (const auto& imp : report.forest_importances) {
        json entry;
        entry["model"] = to_string(imp.model);
        const ModelSpec spec = ModelSpec::make(imp.model);
        json values = json::object();
        for (std::size_t k = 0; k < imp.values.size(); ++k)
            values[kFeatureColumns[spec.feature_idx[k]]] = round6(imp.values[k]);
        entry["importances"] = std::move(values);
        doc["forest_importances"].push_back(std::move(entry));
    }
    doc["variable_matrix"] = json::array();
    for (const auto& row : report.variable_matrix) {
        json r = json::array();
        for (double v : row) r.push_back(nan_safe(v));
        doc["variable_matrix"].push_back(std::move(r));
    }
    dump_json(doc, path);
}

void write_eval_csv(const EvalReport& report, const HeaderKv& header, const std::string& path) {
    std::ofstream out = open_out(path);
    write_header(out, header);
    out << "metric";
    for (const std::string& name : report.algorithm_names) out << ',' << csv_escape(name);
    for (const auto& cmp : report.comparisons) {
        const std::string& cand = report.algorithm_names[cmp.candidate];
        out << ',' << csv_escape(cand + "_rel_diff_pct") << ',' << csv_escape(cand + "_wilcoxon_p")
            << ',' << csv_escape(cand + "_significant");
    }
    out << '\n';
    for (std::size_t metric = 0; metric < kMetricNames.size(); ++metric) {
        out << kMetricNames[metric];
        for (const MetricValues& v : report.values) out << ',' << fmt6(v[metric]);
        for (const auto& cmp : report.comparisons) {
            out << ',' << fmt6(cmp.rel_diff_pct[metric]) << ','
                << fmt6(cmp.wilcoxon[metric].p_value) << ','
                << (cmp.significant[metric] ? "yes" : "no");
        }
        out << '\n';
    }
    out << "# skipped_users = " << report.skipped_users << '\n';
}

void write_eval_json(const EvalReport& report, const HeaderKv& header, const std::string& path) {
    json doc;
    doc["type"] = "eval";
    doc["config"] = header_to_json(header);
    doc["algorithms"] = report.algorithm_names;
    doc["skipped_users"] = report.skipped_users;
    doc["folds"] = report.folds;
    doc["values"] = json::object();
    for (std::size_t ai = 0; ai < report.values.size(); ++ai) {
        json entry = json::object();
        for (std::size_t metric = 0; metric < kMetricNames.size(); ++metric)
            entry[kMetricNames[metric]] = nan_safe(report.values[ai][metric]);
        doc["values"][report.algorithm_names[ai]] = std::move(entry);
    }
    doc["by_fold"] = json::array();
    for (const auto& fold : report.by_fold) {
        json fentry = json::object();
        for (std::size_t ai = 0; ai < fold.size(); ++ai) {
            json entry = json::object();
            for (std::size_t metric = 0; metric < kMetricNames.size(); ++metric)
                entry[kMetricNames[metric]] = nan_safe(fold[ai][metric]);
            fentry[report.algorithm_names[ai]] = std::move(entry);
        }
        doc["by_fold"].push_back(std::move(fentry));
    }
    doc["comparisons"] = json::array();
    for (const auto& cmp : report.comparisons) {
        json entry;
        entry["candidate"] = report.algorithm_names[cmp.candidate];
        entry["baseline"] = report.algorithm_names[cmp.baseline];
        json rel = json::object(), wil = json::object(), sig = json::object();
        for (std::size_t metric = 0; metric < kMetricNames.size(); ++metric) {
            rel[kMetricNames[metric]] = nan_safe(cmp.rel_diff_pct[metric]);
            wil[kMetricNames[metric]] = nan_safe(cmp.wilcoxon[metric].p_value);
            sig[kMetricNames[metric]] = cmp.significant[metric];
        }
        entry["rel_diff_pct"] = std::move(rel);
        entry["wilcoxon_p"] = std::move(wil);
        entry["significant"] = std::move(sig);
        doc["comparisons"].push_back(std::move(entry));
    }
    dump_json(doc, path);
}

void reemit_report(const std::string& json_path, const std::string& dest_dir) {
    std::ifstream in(json_path);
    if (!in) throw DataError("cannot open " + json_path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw DataError(json_path + ": " + e.what());
    }
    const std::string type = doc.value("type", "");
    const std::filesystem::path dest(dest_dir);
    std::filesystem::create_directories(dest);
    HeaderKv header;
    if (doc.contains("config") && doc["config"].is_object())
        for (const auto& [k, v] : doc["config"].items())
            header.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());

    auto num = [](const json& v) { return v.is_null() ? NAN : v.get<double>(); };

    if (type == "stats") {
        StatsReport report;
        for (const auto& row : doc["rows"]) {
            StatsRow r;
            r.variable = row.at("variable").get<std::string>();
            r.count = row.at("count").get<std::size_t>();
            r.min = num(row.at("min"));
            r.max = num(row.at("max"));
            r.mean = num(row.at("mean"));
            r.std = num(row.at("std"));
            r.median = num(row.at("median"));
            report.rows.push_back(std::move(r));
        }
        write_stats_csv(report, header, (dest / "stats.csv").string());
    } else if (type == "study") {
        StudyReport report;
        report.n_reviews = doc.value("n_reviews", std::size_t{0});
        report.folds = doc.value("folds", std::size_t{0});
        report.seed = doc.value("seed", std::uint64_t{0});
        auto model_of = [](const std::string& s) {
            return s == "M1" ? ModelId::M1 : s == "M2" ? ModelId::M2 : ModelId::M3;
        };
        for (const auto& row : doc["cv_correlations"]) {
            CorrelationRow r;
            r.model = model_of(row.at("model").get<std::string>());
            r.regressor = row.at("regressor").get<std::string>() == "linear"
                              ? RegressorKind::linear
                              : RegressorKind::forest;
            r.pearson_r = num(row.at("pearson"));
            r.spearman_r = num(row.at("spearman"));
            report.cv_correlations.push_back(r);
        }
        write_study_correlations_csv(report, header,
                                     (dest / "study_correlations.csv").string());
    } else if (type == "eval") {
        // Value grid only; fold breakdown stays in the JSON document.
        std::ofstream out = open_out((dest / "eval_report.csv").string());
        write_header(out, header);
        out << "metric";
        for (const auto& name : doc["algorithms"]) out << ',' << name.get<std::string>();
        out << '\n';
        for (const char* metric : kMetricNames) {
            out << metric;
            for (const auto& name : doc["algorithms"]) {
                const auto& v = doc["values"][name.get<std::string>()][metric];
                out << ',' << (v.is_null() ? "" : fmt6(v.get<double>()));
            }
            out << '\n';
        }
    } else {
        throw DataError(json_path + ": unknown report type '" + type + "'");
    }
}

}  // namespace helprank
