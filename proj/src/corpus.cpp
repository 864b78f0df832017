#include "helprank/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "helprank/errors.hpp"

namespace helprank {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using nlohmann::json;

// RFC-4180-ish reader: quoted fields may contain commas, escaped quotes and
// newlines. Returns one record per row plus the 1-based line it started on.
struct CsvRecord {
    std::vector<std::string> fields;
    std::size_t line = 0;
};

std::vector<CsvRecord> read_csv(std::istream& in) {
    std::vector<CsvRecord> records;
    std::string field;
    CsvRecord current;
    std::size_t line = 1;
    current.line = 1;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in.get()) != EOF) {
        const char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line;
                field.push_back(ch);
            }
            any = true;
            continue;
        }
        switch (ch) {
            case '"':
                in_quotes = true;
                any = true;
                break;
            case ',':
                current.fields.push_back(std::move(field));
                field.clear();
                any = true;
                break;
            case '\r':
                break;
            case '\n':
                current.fields.push_back(std::move(field));
                field.clear();
                records.push_back(std::move(current));
                current = CsvRecord{};
                ++line;
                current.line = line;
                any = false;
                break;
            default:
                field.push_back(ch);
                any = true;
        }
    }
    if (any || !field.empty() || !current.fields.empty()) {
        current.fields.push_back(std::move(field));
        records.push_back(std::move(current));
    }
    return records;
}

void report_bad(const std::string& path, std::size_t line, const std::string& reason,
                MalformedPolicy policy, LoadLog* log) {
    if (policy == MalformedPolicy::fail_fast)
        throw DataError(path + ":" + std::to_string(line) + ": " + reason);
    if (log) log->skipped.push_back({line, reason});
}

bool json_to_long(const json& v, long& out) {
    if (v.is_number_integer()) {
        out = v.get<long>();
        return true;
    }
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d != std::floor(d)) return false;
        out = static_cast<long>(d);
        return true;
    }
    return false;
}

// Accepts flat `useful`/`funny`/`cool` (current dumps) or the nested
// `votes` object of the older academic datasets.
bool extract_votes(const json& obj, RawReview& r, std::string& err) {
    const json* source = &obj;
    if (obj.contains("votes") && obj["votes"].is_object()) source = &obj["votes"];
    long u = 0, f = 0, c = 0;
    if (source->contains("useful") && !json_to_long((*source)["useful"], u)) {
        err = "non-integer useful count";
        return false;
    }
    if (source->contains("funny") && !json_to_long((*source)["funny"], f)) {
        err = "non-integer funny count";
        return false;
    }
    if (source->contains("cool") && !json_to_long((*source)["cool"], c)) {
        err = "non-integer cool count";
        return false;
    }
    if (u < 0 || f < 0 || c < 0) {
        err = "negative vote count";
        return false;
    }
    r.votes_useful = u;
    r.votes_funny = f;
    r.votes_cool = c;
    return true;
}

bool parse_review_json(const json& obj, RawReview& r, std::string& err) {
    if (!obj.is_object()) {
        err = "not a JSON object";
        return false;
    }
    auto get_string = [&](const char* key, const char* alt, std::string& out) {
        const char* k = obj.contains(key) ? key : alt;
        if (!k || !obj.contains(k) || !obj[k].is_string()) return false;
        out = obj[k].get<std::string>();
        return !out.empty();
    };
    if (!get_string("review_id", nullptr, r.review_id)) {
        err = "missing review_id";
        return false;
    }
    if (!get_string("user_id", nullptr, r.user_id)) {
        err = "missing user_id";
        return false;
    }
    if (!get_string("business_id", "item_id", r.item_id)) {
        err = "missing business_id/item_id";
        return false;
    }
    long stars = 0;
    if (!obj.contains("stars") || !json_to_long(obj["stars"], stars) || stars < 1 || stars > 5) {
        err = "stars outside {1..5}";
        return false;
    }
    r.stars = static_cast<int>(stars);
    if (!obj.contains("text") || !obj["text"].is_string()) {
        err = "missing text";
        return false;
    }
    r.text = obj["text"].get<std::string>();
    if (!extract_votes(obj, r, err)) return false;
    if (obj.contains("date") && obj["date"].is_string())
        r.date = obj["date"].get<std::string>();
    return true;
}

long parse_long_field(const std::string& s, bool& ok) {
    ok = false;
    if (s.empty()) return 0;
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(s, &pos);
    } catch (...) {
        return 0;
    }
    ok = pos == s.size();
    return v;
}

std::vector<std::string> split_tags(const std::string& raw) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        const auto b = cur.find_first_not_of(" \t");
        if (b == std::string::npos) {
            cur.clear();
            return;
        }
        const auto e = cur.find_last_not_of(" \t");
        out.push_back(cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (char ch : raw) {
        if (ch == ';' || ch == ',') {
            flush();
        } else {
            cur.push_back(ch);
        }
    }
    flush();
    return out;
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

}  // namespace

Corpus Corpus::from_reviews(std::vector<RawReview> reviews) {
    Corpus c;
    c.reviews = std::move(reviews);
    for (std::size_t i = 0; i < c.reviews.size(); ++i) {
        const RawReview& r = c.reviews[i];
        auto [uit, unew] = c.by_user.try_emplace(r.user_id);
        if (unew) c.users.push_back(r.user_id);
        uit->second.push_back(i);
        auto [iit, inew] = c.by_item.try_emplace(r.item_id);
        if (inew) c.items.push_back(r.item_id);
        iit->second.push_back(i);
    }
    return c;
}

Corpus load_corpus(const std::string& review_path, InputFormat format,
                   MalformedPolicy policy, LoadLog* log) {
    std::ifstream in = open_or_throw(review_path);
    std::vector<RawReview> reviews;
    std::unordered_set<std::string> seen_ids;

    auto accept = [&](RawReview&& r, std::size_t line) {
        if (!seen_ids.insert(r.review_id).second) {
            report_bad(review_path, line, "duplicate review_id " + r.review_id, policy, log);
            return;
        }
        reviews.push_back(std::move(r));
        if (log) ++log->parsed;
    };

    if (format == InputFormat::json_lines) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json obj = json::parse(line, nullptr, false);
            if (obj.is_discarded()) {
                report_bad(review_path, line_no, "invalid JSON", policy, log);
                continue;
            }
            RawReview r;
            std::string err;
            if (!parse_review_json(obj, r, err)) {
                report_bad(review_path, line_no, err, policy, log);
                continue;
            }
            accept(std::move(r), line_no);
        }
    } else {
        auto records = read_csv(in);
        if (records.empty()) return Corpus{};
        std::unordered_map<std::string, std::size_t> col;
        for (std::size_t i = 0; i < records[0].fields.size(); ++i) col[records[0].fields[i]] = i;
        auto col_of = [&](const char* a, const char* b = nullptr) -> long {
            auto it = col.find(a);
            if (it != col.end()) return static_cast<long>(it->second);
            if (b) {
                it = col.find(b);
                if (it != col.end()) return static_cast<long>(it->second);
            }
            return -1;
        };
        const long c_rid = col_of("review_id"), c_uid = col_of("user_id"),
                   c_iid = col_of("business_id", "item_id"), c_stars = col_of("stars"),
                   c_text = col_of("text"), c_useful = col_of("useful"),
                   c_funny = col_of("funny"), c_cool = col_of("cool"), c_date = col_of("date");
        if (c_rid < 0 || c_uid < 0 || c_iid < 0 || c_stars < 0 || c_text < 0)
            throw DataError(review_path + ": CSV header lacks required review columns");
        for (std::size_t k = 1; k < records.size(); ++k) {
            const auto& rec = records[k];
            if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;  // trailing blank
            auto field = [&](long idx) -> const std::string& {
                static const std::string empty;
                return idx >= 0 && static_cast<std::size_t>(idx) < rec.fields.size()
                           ? rec.fields[idx]
                           : empty;
            };
            RawReview r;
            r.review_id = field(c_rid);
            r.user_id = field(c_uid);
            r.item_id = field(c_iid);
            if (r.review_id.empty() || r.user_id.empty() || r.item_id.empty()) {
                report_bad(review_path, rec.line, "missing id field", policy, log);
                continue;
            }
            bool ok = false;
            const long stars = parse_long_field(field(c_stars), ok);
            if (!ok || stars < 1 || stars > 5) {
                report_bad(review_path, rec.line, "stars outside {1..5}", policy, log);
                continue;
            }
            r.stars = static_cast<int>(stars);
            r.text = field(c_text);
            bool vok = true;
            auto votes = [&](long idx) -> long {
                if (idx < 0 || field(idx).empty()) return 0;
                bool o = false;
                const long v = parse_long_field(field(idx), o);
                if (!o || v < 0) vok = false;
                return v;
            };
            r.votes_useful = votes(c_useful);
            r.votes_funny = votes(c_funny);
            r.votes_cool = votes(c_cool);
            if (!vok) {
                report_bad(review_path, rec.line, "bad vote count", policy, log);
                continue;
            }
            if (!field(c_date).empty()) r.date = field(c_date);
            accept(std::move(r), rec.line);
        }
    }
    return Corpus::from_reviews(std::move(reviews));
}

std::vector<RawItem> load_items(const std::string& item_path, InputFormat format,
                                MalformedPolicy policy, LoadLog* log) {
    std::ifstream in = open_or_throw(item_path);
    std::vector<RawItem> items;
    std::unordered_set<std::string> seen;

    auto accept = [&](RawItem&& item, std::size_t line) {
        if (!seen.insert(item.item_id).second) {
            report_bad(item_path, line, "duplicate item_id " + item.item_id, policy, log);
            return;
        }
        items.push_back(std::move(item));
        if (log) ++log->parsed;
    };

    if (format == InputFormat::json_lines) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json obj = json::parse(line, nullptr, false);
            if (obj.is_discarded() || !obj.is_object()) {
                report_bad(item_path, line_no, "invalid JSON", policy, log);
                continue;
            }
            RawItem item;
            if (obj.contains("business_id") && obj["business_id"].is_string())
                item.item_id = obj["business_id"].get<std::string>();
            else if (obj.contains("item_id") && obj["item_id"].is_string())
                item.item_id = obj["item_id"].get<std::string>();
            if (item.item_id.empty()) {
                report_bad(item_path, line_no, "missing business_id/item_id", policy, log);
                continue;
            }
            if (obj.contains("categories")) {
                const json& cats = obj["categories"];
                if (cats.is_array()) {
                    for (const auto& t : cats)
                        if (t.is_string()) item.category_tags.insert(t.get<std::string>());
                } else if (cats.is_string()) {
                    for (auto& t : split_tags(cats.get<std::string>()))
                        item.category_tags.insert(std::move(t));
                }
            }
            accept(std::move(item), line_no);
        }
    } else {
        auto records = read_csv(in);
        if (records.empty()) return items;
        std::unordered_map<std::string, std::size_t> col;
        for (std::size_t i = 0; i < records[0].fields.size(); ++i) col[records[0].fields[i]] = i;
        long c_id = -1, c_cats = -1;
        if (col.count("business_id")) c_id = static_cast<long>(col["business_id"]);
        else if (col.count("item_id")) c_id = static_cast<long>(col["item_id"]);
        if (col.count("categories")) c_cats = static_cast<long>(col["categories"]);
        if (c_id < 0) throw DataError(item_path + ": CSV header lacks business_id/item_id");
        for (std::size_t k = 1; k < records.size(); ++k) {
            const auto& rec = records[k];
            if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
            RawItem item;
            if (static_cast<std::size_t>(c_id) < rec.fields.size())
                item.item_id = rec.fields[c_id];
            if (item.item_id.empty()) {
                report_bad(item_path, rec.line, "missing id field", policy, log);
                continue;
            }
            if (c_cats >= 0 && static_cast<std::size_t>(c_cats) < rec.fields.size())
                for (auto& t : split_tags(rec.fields[c_cats]))
                    item.category_tags.insert(std::move(t));
            accept(std::move(item), rec.line);
        }
    }
    return items;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    for (const RawReview& r : corpus.reviews) {
        json obj;
        obj["review_id"] = r.review_id;
        obj["user_id"] = r.user_id;
        obj["business_id"] = r.item_id;
        obj["stars"] = r.stars;
        obj["text"] = r.text;
        obj["useful"] = r.votes_useful;
        obj["funny"] = r.votes_funny;
        obj["cool"] = r.votes_cool;
        if (r.date) obj["date"] = *r.date;
        out << obj.dump() << '\n';
    }
    if (!out) throw DataError("failed writing " + path);
}

Corpus filter_corpus(const Corpus& corpus, const std::vector<RawItem>& items,
                     const std::unordered_set<std::string>& tags,
                     std::size_t min_reviews_per_user) {
    if (tags.empty()) throw ConfigError("filter_corpus: empty tag set");
    if (min_reviews_per_user < 1) throw ConfigError("min_reviews_per_user must be >= 1");

    std::unordered_set<std::string> tagged_items;
    for (const RawItem& item : items) {
        for (const std::string& t : item.category_tags) {
            if (tags.count(t)) {
                tagged_items.insert(item.item_id);
                break;
            }
        }
    }

    // Pass 1: tag filter. Items without a surviving review drop out simply
    // by never appearing again.
    std::vector<const RawReview*> tagged;
    std::unordered_map<std::string, std::size_t> user_counts;
    for (const RawReview& r : corpus.reviews) {
        if (!tagged_items.count(r.item_id)) continue;
        tagged.push_back(&r);
        ++user_counts[r.user_id];
    }

    // Pass 2: single user-count filter, no fixpoint iteration.
    std::vector<RawReview> kept;
    for (const RawReview* r : tagged)
        if (user_counts[r->user_id] >= min_reviews_per_user) kept.push_back(*r);
    return Corpus::from_reviews(std::move(kept));
}

namespace {

StatsRow summarize(std::string name, const std::vector<double>& values, StdFormula formula) {
    StatsRow row;
    row.variable = std::move(name);
    row.count = values.size();
    if (values.empty()) {
        row.min = row.max = row.mean = row.std = row.median = kNaN;
        return row;
    }
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    row.min = sorted.front();
    row.max = sorted.back();
    double sum = 0;
    for (double v : sorted) sum += v;
    row.mean = sum / static_cast<double>(sorted.size());
    double ss = 0;
    for (double v : sorted) ss += (v - row.mean) * (v - row.mean);
    const std::size_t n = sorted.size();
    if (formula == StdFormula::sample) {
        row.std = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : kNaN;
    } else {
        row.std = std::sqrt(ss / static_cast<double>(n));
    }
    row.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return row;
}

StatsRow count_only(std::string name, std::size_t count) {
    StatsRow row;
    row.variable = std::move(name);
    row.count = count;
    row.min = row.max = row.mean = row.std = row.median = kNaN;
    return row;
}

// Spread of `value` within each user (or item) group. Sample mode skips
// groups with a single review (their deviation is undefined there).
std::vector<double> group_stds(
    const std::unordered_map<std::string, std::vector<std::size_t>>& index,
    const std::vector<std::string>& order, const std::vector<double>& value,
    StdFormula formula) {
    std::vector<double> stds;
    for (const std::string& key : order) {
        const auto& rows = index.at(key);
        if (formula == StdFormula::sample && rows.size() < 2) continue;
        double mean = 0;
        for (std::size_t i : rows) mean += value[i];
        mean /= static_cast<double>(rows.size());
        double ss = 0;
        for (std::size_t i : rows) ss += (value[i] - mean) * (value[i] - mean);
        const double div = formula == StdFormula::sample
                               ? static_cast<double>(rows.size() - 1)
                               : static_cast<double>(rows.size());
        stds.push_back(std::sqrt(ss / div));
    }
    return stds;
}

}  // namespace

const StatsRow* StatsReport::find(const std::string& variable) const {
    for (const StatsRow& row : rows)
        if (row.variable == variable) return &row;
    return nullptr;
}

StatsReport descriptive_stats(const Corpus& corpus,
                              const std::optional<TextStatsColumns>& text,
                              StdFormula formula) {
    if (corpus.empty()) throw DataError("descriptive_stats: empty corpus");
    if (text) {
        if (text->length.size() != corpus.size() || text->polarity.size() != corpus.size())
            throw DataError("descriptive_stats: text columns misaligned with corpus");
    }

    StatsReport report;
    report.rows.push_back(count_only("Number of reviews", corpus.size()));
    report.rows.push_back(count_only("Number of users", corpus.users.size()));
    report.rows.push_back(count_only("Number of items", corpus.items.size()));

    std::vector<double> per_user, per_item;
    for (const auto& u : corpus.users)
        per_user.push_back(static_cast<double>(corpus.by_user.at(u).size()));
    for (const auto& i : corpus.items)
        per_item.push_back(static_cast<double>(corpus.by_item.at(i).size()));
    report.rows.push_back(summarize("Number of reviews x user", per_user, formula));
    report.rows.push_back(summarize("Number of reviews x item", per_item, formula));

    std::vector<double> votes, ratings;
    for (const RawReview& r : corpus.reviews) {
        votes.push_back(static_cast<double>(r.total_votes()));
        ratings.push_back(static_cast<double>(r.stars));
    }
    report.rows.push_back(summarize("Number of helpfulness votes x review", votes, formula));
    report.rows.push_back(summarize("Rating values", ratings, formula));

    if (text) {
        std::vector<double> coherence(corpus.size());
        for (std::size_t i = 0; i < corpus.size(); ++i)
            coherence[i] = 5.0 - std::abs(static_cast<double>(corpus.reviews[i].stars) -
                                          text->polarity[i]);
        report.rows.push_back(summarize("Review length", text->length, formula));
        report.rows.push_back(summarize("Review polarity", text->polarity, formula));
        report.rows.push_back(summarize("Rating-polarity coherence", coherence, formula));
    }

    report.rows.push_back(summarize(
        "STD of rating values x user",
        group_stds(corpus.by_user, corpus.users, ratings, formula), formula));
    report.rows.push_back(summarize(
        "STD of rating values x item",
        group_stds(corpus.by_item, corpus.items, ratings, formula), formula));
    if (text) {
        report.rows.push_back(summarize(
            "STD of review polarity x user",
            group_stds(corpus.by_user, corpus.users, text->polarity, formula), formula));
        report.rows.push_back(summarize(
            "STD of review polarity x item",
            group_stds(corpus.by_item, corpus.items, text->polarity, formula), formula));
        report.rows.push_back(summarize(
            "STD of review length x user",
            group_stds(corpus.by_user, corpus.users, text->length, formula), formula));
        report.rows.push_back(summarize(
            "STD of review length x item",
            group_stds(corpus.by_item, corpus.items, text->length, formula), formula));
    }
    return report;
}

}  // namespace helprank
