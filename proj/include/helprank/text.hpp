#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace helprank {

class Corpus;

using Stopwords = std::unordered_set<std::string>;

// One word per line; '#' lines ignored.
Stopwords load_stopwords(const std::string& path);

// Swappable lemma reduction. The bundled implementation does a dictionary
// lookup for irregular forms and falls back to conservative suffix
// stripping; UGR is robust to lemma quality so this stays dependency-free.
class Lemmatizer {
  public:
    virtual ~Lemmatizer() = default;
    virtual std::string lemma(const std::string& lowercase_word) const = 0;
};

class DictionarySuffixLemmatizer : public Lemmatizer {
  public:
    DictionarySuffixLemmatizer();
    std::string lemma(const std::string& word) const override;

  private:
    std::unordered_map<std::string, std::string> exceptions_;
};

struct TokenizeResult {
    std::vector<std::string> tokens;   // lowercase lemmas, len >= 3, no stop words
    std::size_t raw_word_count = 0;    // whitespace-delimited words before any removal
};

TokenizeResult tokenize(std::string_view text, const Stopwords& stopwords,
                        const Lemmatizer& lemmatizer);

enum class IdfFormula {
    ln_n_over_df,  // ln(N / df)
    smoothed       // ln((N+1) / (df+1)) + 1
};

enum class DocUniverse {
    corpus_wide,  // every review is one document
    per_item      // documents restricted to reviews of the same item
};

struct TfIdfOptions {
    IdfFormula formula = IdfFormula::ln_n_over_df;
    DocUniverse universe = DocUniverse::corpus_wide;
};

// Immutable once built. TF is the raw term count inside one review's token
// list; doc_freq counts reviews containing the term at least once.
class TfIdfIndex {
  public:
    // `doc_items[d]` names the item of document d; only consulted for the
    // per_item universe (pass {} for corpus_wide).
    static TfIdfIndex build(const std::vector<std::vector<std::string>>& docs,
                            const std::vector<std::string>& doc_items,
                            const TfIdfOptions& options = {});

    double idf(const std::string& term) const;                          // corpus_wide
    double idf(const std::string& term, const std::string& item) const; // either universe

    // Mean of per-token TF*IDF over the token list (0 for an empty list).
    double mean_tfidf(const std::vector<std::string>& tokens) const;
    double mean_tfidf(const std::vector<std::string>& tokens, const std::string& item) const;

    std::size_t doc_count() const { return doc_count_; }
    std::size_t doc_freq(const std::string& term) const;
    const TfIdfOptions& options() const { return options_; }

  private:
    struct Universe {
        std::size_t doc_count = 0;
        std::unordered_map<std::string, std::size_t> doc_freq;
    };

    double idf_value(const Universe& u, const std::string& term) const;
    double mean_over(const Universe& u, const std::vector<std::string>& tokens) const;

    TfIdfOptions options_;
    std::size_t doc_count_ = 0;
    Universe global_;
    std::unordered_map<std::string, Universe> per_item_;
};

// Contract for sentiment backends: deterministic score in [-1, 1].
class SentimentScorer {
  public:
    virtual ~SentimentScorer() = default;
    virtual double score(std::string_view text) const = 0;
    virtual std::string name() const = 0;
};

// Rule-based scorer over a valence lexicon (term<TAB>valence, valence in
// [-4,4]). Negators flip and intensifiers scale a hit within a 3-token
// window; the total is squashed into (-1,1) by x / sqrt(x^2 + alpha).
class LexiconScorer : public SentimentScorer {
  public:
    static LexiconScorer from_file(const std::string& lexicon_path);

    double score(std::string_view text) const override;
    std::string name() const override { return "lexicon"; }
    std::size_t lexicon_size() const { return valence_.size(); }

  private:
    LexiconScorer() = default;
    std::unordered_map<std::string, double> valence_;  // raw [-4, 4]
    std::unordered_set<std::string> negators_;
    std::unordered_map<std::string, double> intensifiers_;
};

// Mean of the scorer outputs rescaled linearly from [-1,1] to [1,5].
double polarity(std::string_view text,
                const std::vector<const SentimentScorer*>& scorers);

}  // namespace helprank
