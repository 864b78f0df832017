#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "helprank/corpus.hpp"
#include "helprank/errors.hpp"

using namespace helprank;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
}

RawReview make_review(std::string id, std::string user, std::string item, int stars,
                      long useful = 0, std::string text = "some text") {
    RawReview r;
    r.review_id = std::move(id);
    r.user_id = std::move(user);
    r.item_id = std::move(item);
    r.stars = stars;
    r.text = std::move(text);
    r.votes_useful = useful;
    return r;
}

const std::string kFixtureDir = HELPRANK_FIXTURE_DIR;

}  // namespace

TEST_CASE("load_corpus: empty file yields empty corpus") {
    const auto p = temp_file("helprank_empty.jsonl", "");
    const Corpus c = load_corpus(p.string(), InputFormat::json_lines);
    CHECK(c.size() == 0);
    CHECK(c.users.empty());
    CHECK(c.items.empty());
}

TEST_CASE("load_corpus: singleton record") {
    const auto p = temp_file("helprank_one.jsonl",
                             R"({"review_id":"r1","user_id":"u1","business_id":"b1",)"
                             R"("stars":4,"text":"fine","useful":1,"funny":0,"cool":0})"
                             "\n");
    const Corpus c = load_corpus(p.string(), InputFormat::json_lines);
    REQUIRE(c.size() == 1);
    CHECK(c.users.size() == 1);
    CHECK(c.items.size() == 1);
    CHECK(c.reviews[0].stars == 4);
    CHECK(c.reviews[0].total_votes() == 1);
}

TEST_CASE("load_corpus: fixture with one malformed line, skip policy") {
    LoadLog log;
    const Corpus c = load_corpus(kFixtureDir + "/reviews_12.jsonl", InputFormat::json_lines,
                                 MalformedPolicy::skip_and_log, &log);
    CHECK(c.size() == 11);
    CHECK(c.users.size() == 3);
    CHECK(c.items.size() == 4);
    REQUIRE(log.skipped.size() == 1);
    CHECK(log.skipped[0].line == 8);
}

TEST_CASE("load_corpus: fail-fast raises on the malformed line") {
    CHECK_THROWS_AS(load_corpus(kFixtureDir + "/reviews_12.jsonl", InputFormat::json_lines,
                                MalformedPolicy::fail_fast),
                    DataError);
}

TEST_CASE("load_corpus: nested votes object of the older dataset format") {
    const auto p = temp_file("helprank_nested.jsonl",
                             R"({"review_id":"r1","user_id":"u1","business_id":"b1",)"
                             R"("stars":5,"text":"x","votes":{"useful":3,"funny":1,"cool":2}})"
                             "\n");
    const Corpus c = load_corpus(p.string(), InputFormat::json_lines);
    REQUIRE(c.size() == 1);
    CHECK(c.reviews[0].total_votes() == 6);
}

TEST_CASE("load_corpus: duplicate review ids are rejected records") {
    const std::string rec = R"({"review_id":"dup","user_id":"u","business_id":"b",)"
                            R"("stars":3,"text":"x","useful":0,"funny":0,"cool":0})";
    const auto p = temp_file("helprank_dup.jsonl", rec + "\n" + rec + "\n");
    LoadLog log;
    const Corpus c =
        load_corpus(p.string(), InputFormat::json_lines, MalformedPolicy::skip_and_log, &log);
    CHECK(c.size() == 1);
    CHECK(log.skipped.size() == 1);
}

TEST_CASE("load_corpus: CSV with quoted text containing commas and newlines") {
    const auto p = temp_file("helprank_reviews.csv",
                             "review_id,user_id,business_id,stars,text,useful,funny,cool\n"
                             "r1,u1,b1,5,\"nice, very nice\nindeed\",2,0,1\n"
                             "r2,u2,b1,2,plain text,0,0,0\n");
    const Corpus c = load_corpus(p.string(), InputFormat::csv);
    REQUIRE(c.size() == 2);
    CHECK(c.reviews[0].text == "nice, very nice\nindeed");
    CHECK(c.reviews[0].total_votes() == 3);
    CHECK(c.reviews[1].stars == 2);
}

TEST_CASE("load_items: JSON array, JSON string, and CSV tag formats") {
    const auto pj = temp_file("helprank_items.jsonl",
                              R"({"business_id":"b1","categories":["Hotels","Resorts"]})"
                              "\n"
                              R"({"business_id":"b2","categories":"Delis, Pizza"})"
                              "\n");
    const auto items = load_items(pj.string(), InputFormat::json_lines);
    REQUIRE(items.size() == 2);
    CHECK(items[0].category_tags.count("Hotels") == 1);
    CHECK(items[0].category_tags.count("Resorts") == 1);
    CHECK(items[1].category_tags.count("Pizza") == 1);

    const auto pc = temp_file("helprank_items.csv",
                              "business_id,categories\n"
                              "c1,\"Hotels; Bed & Breakfast\"\n");
    const auto csv_items = load_items(pc.string(), InputFormat::csv);
    REQUIRE(csv_items.size() == 1);
    CHECK(csv_items[0].category_tags.count("Bed & Breakfast") == 1);
}

TEST_CASE("save_corpus round-trips ids, stars, votes and text bit-exactly") {
    std::vector<RawReview> reviews;
    RawReview r = make_review("r-1", "u\"x", "b,1", 5, 7, "emoji \xF0\x9F\x98\x80 and \"quotes\"\nline2");
    r.votes_funny = 3;
    r.votes_cool = 11;
    r.date = "2014-01-31";
    reviews.push_back(r);
    reviews.push_back(make_review("r-2", "u2", "b2", 1, 0, ""));
    const Corpus original = Corpus::from_reviews(reviews);

    const fs::path p = fs::temp_directory_path() / "helprank_roundtrip.jsonl";
    save_corpus(original, p.string());
    const Corpus loaded = load_corpus(p.string(), InputFormat::json_lines);

    REQUIRE(loaded.size() == original.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded.reviews[i].review_id == original.reviews[i].review_id);
        CHECK(loaded.reviews[i].user_id == original.reviews[i].user_id);
        CHECK(loaded.reviews[i].item_id == original.reviews[i].item_id);
        CHECK(loaded.reviews[i].stars == original.reviews[i].stars);
        CHECK(loaded.reviews[i].votes_useful == original.reviews[i].votes_useful);
        CHECK(loaded.reviews[i].votes_funny == original.reviews[i].votes_funny);
        CHECK(loaded.reviews[i].votes_cool == original.reviews[i].votes_cool);
        CHECK(loaded.reviews[i].text == original.reviews[i].text);
    }
}

namespace {

Corpus synthetic_tagged_corpus() {
    // 3 users with 12 / 10 / 4 reviews, all on tagged items.
    std::vector<RawReview> reviews;
    int id = 0;
    for (int k = 0; k < 12; ++k)
        reviews.push_back(make_review("a" + std::to_string(id++), "heavy", "t1", 4));
    for (int k = 0; k < 10; ++k)
        reviews.push_back(make_review("b" + std::to_string(id++), "medium", "t2", 3));
    for (int k = 0; k < 4; ++k)
        reviews.push_back(make_review("c" + std::to_string(id++), "light", "t1", 5));
    return Corpus::from_reviews(std::move(reviews));
}

std::vector<RawItem> tagged_items() {
    RawItem t1{"t1", {"Hotels"}};
    RawItem t2{"t2", {"Hotels", "Resorts"}};
    RawItem other{"x1", {"Bars"}};
    return {t1, t2, other};
}

}  // namespace

TEST_CASE("filter_corpus: user-count pass keeps 22 reviews of 2 users") {
    const Corpus c = synthetic_tagged_corpus();
    const Corpus filtered = filter_corpus(c, tagged_items(), {"Hotels"}, 10);
    CHECK(filtered.size() == 22);
    CHECK(filtered.users.size() == 2);
    CHECK(filtered.items.size() == 2);
}

TEST_CASE("filter_corpus: no-op when every user clears the threshold") {
    const Corpus c = synthetic_tagged_corpus();
    const Corpus filtered = filter_corpus(c, tagged_items(), {"Hotels"}, 1);
    CHECK(filtered.size() == c.size());
    CHECK(filtered.users.size() == c.users.size());
}

TEST_CASE("filter_corpus: idempotent") {
    const Corpus c = synthetic_tagged_corpus();
    const Corpus once = filter_corpus(c, tagged_items(), {"Hotels"}, 10);
    const Corpus twice = filter_corpus(once, tagged_items(), {"Hotels"}, 10);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(once.reviews[i].review_id == twice.reviews[i].review_id);
}

TEST_CASE("filter_corpus: every surviving user has enough reviews") {
    const Corpus filtered =
        filter_corpus(synthetic_tagged_corpus(), tagged_items(), {"Hotels"}, 10);
    for (const auto& u : filtered.users) CHECK(filtered.by_user.at(u).size() >= 10);
}

TEST_CASE("filter_corpus: untagged items are dropped") {
    std::vector<RawReview> reviews = {make_review("r1", "u1", "x1", 3),
                                      make_review("r2", "u1", "t1", 4)};
    const Corpus c = Corpus::from_reviews(reviews);
    const Corpus filtered = filter_corpus(c, tagged_items(), {"Hotels"}, 1);
    REQUIRE(filtered.size() == 1);
    CHECK(filtered.reviews[0].item_id == "t1");
}

TEST_CASE("filter_corpus: empty tag set is a configuration error") {
    CHECK_THROWS_AS(filter_corpus(synthetic_tagged_corpus(), tagged_items(), {}, 10),
                    ConfigError);
}

TEST_CASE("descriptive_stats: identical reviews give zero std everywhere") {
    std::vector<RawReview> reviews;
    for (int i = 0; i < 6; ++i)
        reviews.push_back(make_review("r" + std::to_string(i), "u1", "b1", 4, 2));
    const Corpus c = Corpus::from_reviews(reviews);
    TextStatsColumns text;
    text.length.assign(6, 20.0);
    text.polarity.assign(6, 4.0);
    const StatsReport report = descriptive_stats(c, text);
    for (const StatsRow& row : report.rows) {
        if (std::isnan(row.std)) continue;
        CHECK(row.std == doctest::Approx(0.0));
    }
}

TEST_CASE("descriptive_stats: hand-computed length row") {
    std::vector<RawReview> reviews;
    for (int i = 0; i < 5; ++i)
        reviews.push_back(make_review("r" + std::to_string(i), "u" + std::to_string(i), "b1", 3));
    const Corpus c = Corpus::from_reviews(reviews);
    TextStatsColumns text;
    text.length = {4, 10, 10, 20, 56};
    text.polarity.assign(5, 3.0);
    const StatsReport report = descriptive_stats(c, text);
    const StatsRow* row = report.find("Review length");
    REQUIRE(row != nullptr);
    CHECK(row->mean == doctest::Approx(20.0));
    CHECK(row->median == doctest::Approx(10.0));
    CHECK(row->min == doctest::Approx(4.0));
    CHECK(row->max == doctest::Approx(56.0));
}

TEST_CASE("descriptive_stats: min <= mean/median <= max for every row") {
    LoadLog log;
    const Corpus c = load_corpus(kFixtureDir + "/reviews_12.jsonl", InputFormat::json_lines,
                                 MalformedPolicy::skip_and_log, &log);
    TextStatsColumns text;
    for (const RawReview& r : c.reviews) {
        text.length.push_back(static_cast<double>(r.text.size() % 37 + 1));
        text.polarity.push_back(1.0 + (r.stars % 5));
    }
    const StatsReport report = descriptive_stats(c, text);
    for (const StatsRow& row : report.rows) {
        if (std::isnan(row.mean)) continue;
        CHECK(row.min <= row.mean + 1e-12);
        CHECK(row.mean <= row.max + 1e-12);
        CHECK(row.min <= row.median);
        CHECK(row.median <= row.max);
        CHECK(row.std >= 0.0);
    }
}

TEST_CASE("descriptive_stats: sample formula skips singleton groups") {
    std::vector<RawReview> reviews = {make_review("r1", "u1", "b1", 1),
                                      make_review("r2", "u1", "b1", 5),
                                      make_review("r3", "u2", "b2", 3)};
    const Corpus c = Corpus::from_reviews(reviews);
    const StatsReport pop = descriptive_stats(c, std::nullopt, StdFormula::population);
    const StatsRow* pop_row = pop.find("STD of rating values x user");
    REQUIRE(pop_row != nullptr);
    CHECK(pop_row->count == 2);      // both users, singleton contributes 0
    CHECK(pop_row->max == doctest::Approx(2.0));

    const StatsReport samp = descriptive_stats(c, std::nullopt, StdFormula::sample);
    const StatsRow* samp_row = samp.find("STD of rating values x user");
    REQUIRE(samp_row != nullptr);
    CHECK(samp_row->count == 1);     // singleton user skipped
    CHECK(samp_row->max == doctest::Approx(std::sqrt(8.0)));  // {1,5} sample std
}

TEST_CASE("descriptive_stats: empty corpus is an error") {
    CHECK_THROWS_AS(descriptive_stats(Corpus{}), DataError);
}
