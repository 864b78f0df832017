#pragma once

#include <string>
#include <utility>
#include <vector>

#include "helprank/corpus.hpp"
#include "helprank/eval.hpp"
#include "helprank/regress.hpp"

namespace helprank {

// Fixed 6-decimal formatting shared by the CSV and JSON emitters so both
// formats parse back to identical values. NaN renders as an empty cell.
std::string fmt6(double v);
double round6(double v);

std::string csv_escape(const std::string& field);

using HeaderKv = std::vector<std::pair<std::string, std::string>>;

void write_stats_csv(const StatsReport& report, const HeaderKv& header, const std::string& path);
void write_stats_json(const StatsReport& report, const HeaderKv& header, const std::string& path);

// One file per table analogue + a combined JSON document.
void write_study_correlations_csv(const StudyReport& report, const HeaderKv& header,
                                  const std::string& path);
void write_study_coefficients_csv(const StudyReport& report, const HeaderKv& header,
                                  const std::string& path);
void write_study_importances_csv(const StudyReport& report, const HeaderKv& header,
                                 const std::string& path);
void write_study_variable_matrix_csv(const StudyReport& report, const HeaderKv& header,
                                     const std::string& path);
void write_study_json(const StudyReport& report, const HeaderKv& header, const std::string& path);

void write_eval_csv(const EvalReport& report, const HeaderKv& header, const std::string& path);
void write_eval_json(const EvalReport& report, const HeaderKv& header, const std::string& path);

// `report` subcommand: re-emit a stored JSON report (stats / study / eval)
// as CSV next to `dest`.
void reemit_report(const std::string& json_path, const std::string& dest_dir);

}  // namespace helprank
