#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace helprank {

struct RawReview {
    std::string review_id;
    std::string user_id;
    std::string item_id;
    int stars = 0;  // in {1..5}
    std::string text;
    long votes_useful = 0;
    long votes_funny = 0;
    long votes_cool = 0;
    std::optional<std::string> date;  // ISO-8601, when present

    long total_votes() const { return votes_useful + votes_funny + votes_cool; }
};

struct RawItem {
    std::string item_id;
    std::unordered_set<std::string> category_tags;
};

// Immutable after construction; `users`/`items` keep first-appearance order
// so every iteration over them is deterministic.
struct Corpus {
    std::vector<RawReview> reviews;
    std::vector<std::string> users;
    std::vector<std::string> items;
    std::unordered_map<std::string, std::vector<std::size_t>> by_user;
    std::unordered_map<std::string, std::vector<std::size_t>> by_item;

    std::size_t size() const { return reviews.size(); }
    bool empty() const { return reviews.empty(); }

    static Corpus from_reviews(std::vector<RawReview> reviews);
};

enum class InputFormat { json_lines, csv };
enum class MalformedPolicy { skip_and_log, fail_fast };

struct SkippedRecord {
    std::size_t line;  // 1-based line number in the source file
    std::string reason;
};

struct LoadLog {
    std::size_t parsed = 0;
    std::vector<SkippedRecord> skipped;
};

// Readers accept the Yelp academic-dataset JSON-lines schema (review_id,
// user_id, business_id, stars, text, useful, funny, cool, optional date)
// and a generic CSV with the same column names.
Corpus load_corpus(const std::string& review_path, InputFormat format,
                   MalformedPolicy policy = MalformedPolicy::skip_and_log,
                   LoadLog* log = nullptr);

std::vector<RawItem> load_items(const std::string& item_path, InputFormat format,
                                MalformedPolicy policy = MalformedPolicy::skip_and_log,
                                LoadLog* log = nullptr);

// Writes the corpus back out as JSON-lines in the reader schema. Ids, stars,
// votes and text round-trip bit-exactly.
void save_corpus(const Corpus& corpus, const std::string& path);

// Two-pass filter: keep reviews whose item carries at least one of `tags`
// (items with no surviving review disappear), then drop all reviews by users
// with fewer than `min_reviews_per_user` remaining reviews. Applied once,
// not to fixpoint, so the result can contain items whose review count fell
// below any threshold after the user pass.
Corpus filter_corpus(const Corpus& corpus, const std::vector<RawItem>& items,
                     const std::unordered_set<std::string>& tags,
                     std::size_t min_reviews_per_user);

enum class StdFormula {
    population,  // divisor n
    sample       // divisor n-1; groups with n < 2 are skipped
};

struct StatsRow {
    std::string variable;
    std::size_t count = 0;
    // NaN marks cells intentionally left blank (count-only rows).
    double min, max, mean, std, median;
};

struct StatsReport {
    std::vector<StatsRow> rows;
    const StatsRow* find(const std::string& variable) const;
};

// Per-review text columns feeding the length/polarity rows. Aligned with
// corpus review order; polarity is on the [1,5] scale.
struct TextStatsColumns {
    std::vector<double> length;
    std::vector<double> polarity;
};

StatsReport descriptive_stats(const Corpus& corpus,
                              const std::optional<TextStatsColumns>& text = std::nullopt,
                              StdFormula formula = StdFormula::population);

}  // namespace helprank
