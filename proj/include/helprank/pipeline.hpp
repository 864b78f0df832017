#pragma once

#include <string>

#include "helprank/config.hpp"

namespace helprank {

// Stage entry points behind the CLI subcommands. Every stage recomputes from
// the configured inputs (stages never mutate them) and writes its artifacts
// into cfg.out_dir. All return a one-line human summary.
std::string stage_ingest(const PipelineConfig& cfg);
std::string stage_stats(const PipelineConfig& cfg);
std::string stage_features(const PipelineConfig& cfg);
std::string stage_study(const PipelineConfig& cfg);
std::string stage_train_helpfulness(const PipelineConfig& cfg);
std::string stage_recommend(const PipelineConfig& cfg);
std::string stage_evaluate(const PipelineConfig& cfg);
std::string stage_report(const PipelineConfig& cfg, const std::string& json_path);

// Shared helpers (also used by tests).
Corpus load_and_filter(const PipelineConfig& cfg, LoadLog* log = nullptr);
TextColumns analyze_with_config(const Corpus& corpus, const PipelineConfig& cfg,
                                Stopwords* stopwords_out = nullptr,
                                LexiconScorer* scorer_out = nullptr);

}  // namespace helprank
