#include <doctest.h>

#include <cmath>

#include "helprank/errors.hpp"
#include "helprank/rng.hpp"
#include "helprank/text.hpp"

using namespace helprank;

namespace {

const std::string kDataDir = HELPRANK_DATA_DIR;

Stopwords test_stopwords() { return load_stopwords(kDataDir + "/stopwords.txt"); }

struct ConstScorer : SentimentScorer {
    explicit ConstScorer(double v) : value(v) {}
    double score(std::string_view) const override { return value; }
    std::string name() const override { return "const"; }
    double value;
};

}  // namespace

TEST_CASE("tokenize: empty text") {
    DictionarySuffixLemmatizer lemmatizer;
    const auto r = tokenize("", test_stopwords(), lemmatizer);
    CHECK(r.tokens.empty());
    CHECK(r.raw_word_count == 0);
}

TEST_CASE("tokenize: stopwords and short tokens removed, raw count is whitespace words") {
    DictionarySuffixLemmatizer lemmatizer;
    const auto r = tokenize("The room was OK!!", test_stopwords(), lemmatizer);
    REQUIRE(r.tokens.size() == 1);
    CHECK(r.tokens[0] == "room");
    // "The", "room", "was", "OK!!" -> 4 whitespace-delimited words.
    CHECK(r.raw_word_count == 4);
}

TEST_CASE("tokenize: repetition preserved for TF") {
    DictionarySuffixLemmatizer lemmatizer;
    const auto r = tokenize("great great great", test_stopwords(), lemmatizer);
    CHECK(r.tokens == std::vector<std::string>{"great", "great", "great"});
    CHECK(r.raw_word_count == 3);
}

TEST_CASE("tokenize: never emits stopwords or tokens shorter than 3 chars") {
    DictionarySuffixLemmatizer lemmatizer;
    const Stopwords sw = test_stopwords();
    Rng rng(42);
    const std::string alphabet = "abcdefghijklmnopqrstuvwxyz  ,.!?'\"-0123456789";
    for (int iter = 0; iter < 300; ++iter) {
        std::string text;
        const std::size_t len = rng.next_below(120);
        for (std::size_t i = 0; i < len; ++i)
            text.push_back(alphabet[rng.next_below(alphabet.size())]);
        const auto r = tokenize(text, sw, lemmatizer);
        for (const std::string& t : r.tokens) {
            CHECK(t.size() >= 3);
            CHECK(sw.count(t) == 0);
        }
    }
}

TEST_CASE("lemmatizer: dictionary irregulars and suffix rules") {
    DictionarySuffixLemmatizer lem;
    CHECK(lem.lemma("children") == "child");
    CHECK(lem.lemma("better") == "good");
    CHECK(lem.lemma("hotels") == "hotel");
    CHECK(lem.lemma("rooms") == "room");
    CHECK(lem.lemma("cities") == "city");
    CHECK(lem.lemma("dishes") == "dish");
    CHECK(lem.lemma("stopped") == "stop");
    CHECK(lem.lemma("walking") == "walk");
    CHECK(lem.lemma("glass") == "glass");    // -ss kept
    CHECK(lem.lemma("bus") == "bus");        // -us kept
}

TEST_CASE("tfidf: degenerate single-review corpus") {
    const std::vector<std::vector<std::string>> docs = {{"pool", "view", "pool"}};
    const TfIdfIndex index = TfIdfIndex::build(docs, {});
    CHECK(index.doc_count() == 1);
    CHECK(index.doc_freq("pool") == 1);
    CHECK(index.idf("pool") == doctest::Approx(0.0));
    CHECK(index.mean_tfidf(docs[0]) == doctest::Approx(0.0));
}

TEST_CASE("tfidf: four-review fixture") {
    const std::vector<std::vector<std::string>> docs = {
        {"pool", "view"}, {"pool", "breakfast"}, {"breakfast", "coffee"}, {"view", "garden"}};
    const TfIdfIndex index = TfIdfIndex::build(docs, {});
    CHECK(index.idf("pool") == doctest::Approx(std::log(2.0)));
    CHECK(index.idf("garden") == doctest::Approx(std::log(4.0)));
    CHECK(index.idf("unseen") == doctest::Approx(0.0));

    // Two-token review {pool, garden}: TF=1 each,
    // mean = (ln(4/2) + ln(4/1)) / 2.
    const std::vector<std::string> review = {"pool", "garden"};
    const double expected = (std::log(2.0) + std::log(4.0)) / 2.0;
    CHECK(index.mean_tfidf(review) == doctest::Approx(expected).epsilon(1e-12));

    // TF counts repetitions: {pool, pool} -> TF(pool)=2 per token.
    const std::vector<std::string> doubled = {"pool", "pool"};
    CHECK(index.mean_tfidf(doubled) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

    CHECK(index.mean_tfidf({}) == doctest::Approx(0.0));
}

TEST_CASE("tfidf: IDF non-increasing in doc_freq for fixed doc_count") {
    // df 1..4 out of 4 docs, both formulas.
    for (const IdfFormula formula : {IdfFormula::ln_n_over_df, IdfFormula::smoothed}) {
        std::vector<std::vector<std::string>> docs = {
            {"a", "b", "c", "d"}, {"b", "c", "d"}, {"c", "d"}, {"d"}};
        TfIdfOptions opts;
        opts.formula = formula;
        const TfIdfIndex index = TfIdfIndex::build(docs, {}, opts);
        double prev = index.idf("a");  // df = 1
        for (const char* term : {"b", "c", "d"}) {
            const double cur = index.idf(term);
            CHECK(cur <= prev + 1e-15);
            prev = cur;
        }
    }
}

TEST_CASE("tfidf: per-item universe scores against the item's own documents") {
    const std::vector<std::vector<std::string>> docs = {
        {"pool"}, {"pool", "garden"}, {"pool"}};
    const std::vector<std::string> items = {"i1", "i1", "i2"};
    TfIdfOptions opts;
    opts.universe = DocUniverse::per_item;
    const TfIdfIndex index = TfIdfIndex::build(docs, items, opts);
    // Within i1: pool in 2/2 docs -> idf 0; garden 1/2 -> ln 2.
    CHECK(index.idf("pool", "i1") == doctest::Approx(0.0));
    CHECK(index.idf("garden", "i1") == doctest::Approx(std::log(2.0)));
    // Within i2 (one doc) idf 0.
    CHECK(index.idf("pool", "i2") == doctest::Approx(0.0));
}

TEST_CASE("polarity: rescaling and averaging") {
    const ConstScorer zero(0.0), plus(1.0), minus(-1.0), half(0.5);
    CHECK(polarity("x", {&zero}) == doctest::Approx(3.0));
    CHECK(polarity("x", {&plus, &plus}) == doctest::Approx(5.0));
    CHECK(polarity("x", {&minus}) == doctest::Approx(1.0));
    CHECK(polarity("x", {&plus, &zero}) == doctest::Approx(4.0));
    CHECK(polarity("x", {&half}) == doctest::Approx(4.0));
    CHECK_THROWS_AS(polarity("x", {}), ConfigError);
}

TEST_CASE("lexicon scorer: basic behavior") {
    const LexiconScorer scorer = LexiconScorer::from_file(kDataDir + "/lexicon.txt");

    SUBCASE("no lexicon words -> 0") {
        CHECK(scorer.score("the chair sat near the window") == doctest::Approx(0.0));
        CHECK(scorer.score("") == doctest::Approx(0.0));
    }
    SUBCASE("negation flips the sign") {
        const double pos = scorer.score("good");
        const double neg = scorer.score("not good");
        CHECK(pos > 0);
        CHECK(neg < 0);
        CHECK(neg == doctest::Approx(-pos));
    }
    SUBCASE("intensifier is monotone") {
        CHECK(scorer.score("very good") >= scorer.score("good"));
        CHECK(scorer.score("extremely good") >= scorer.score("very good"));
    }
    SUBCASE("ordering on opposite texts") {
        CHECK(scorer.score("excellent wonderful stay") > scorer.score("terrible dirty room"));
    }
    SUBCASE("bounded and deterministic on fuzzed input") {
        Rng rng(7);
        const std::vector<std::string> pool = {"good",  "bad",   "not",   "very", "hotel",
                                               "awful", "great", "never", "room", "clean"};
        for (int iter = 0; iter < 500; ++iter) {
            std::string text;
            const std::size_t len = rng.next_below(12);
            for (std::size_t i = 0; i < len; ++i) {
                text += pool[rng.next_below(pool.size())];
                text += ' ';
            }
            const double a = scorer.score(text);
            const double b = scorer.score(text);
            CHECK(a == b);
            CHECK(a >= -1.0);
            CHECK(a <= 1.0);
        }
    }
}

TEST_CASE("lexicon scorer: polarity(text) lands in [1,5] end to end") {
    const LexiconScorer scorer = LexiconScorer::from_file(kDataDir + "/lexicon.txt");
    const double p1 = polarity("excellent wonderful amazing stay", {&scorer});
    const double p2 = polarity("terrible filthy disgusting room", {&scorer});
    CHECK(p1 > 3.0);
    CHECK(p1 <= 5.0);
    CHECK(p2 < 3.0);
    CHECK(p2 >= 1.0);
}

TEST_CASE("lexicon scorer: missing file") {
    CHECK_THROWS_AS(LexiconScorer::from_file("/nonexistent/lexicon.txt"), DataError);
}
