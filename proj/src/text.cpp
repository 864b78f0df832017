#include "helprank/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "helprank/errors.hpp"

namespace helprank {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) out.push_back(static_cast<char>(std::tolower(c)));
    return out;
}

bool has_vowel(std::string_view s) {
    return s.find_first_of("aeiouy") != std::string_view::npos;
}

bool double_consonant_tail(std::string_view s) {
    if (s.size() < 2) return false;
    const char a = s[s.size() - 2], b = s[s.size() - 1];
    return a == b && std::string_view("aeiou").find(a) == std::string_view::npos;
}

}  // namespace

Stopwords load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open stopword file " + path);
    Stopwords words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        words.insert(to_lower(line));
    }
    return words;
}

DictionarySuffixLemmatizer::DictionarySuffixLemmatizer() {
    // Irregulars the suffix rules would butcher.
    exceptions_ = {
        {"men", "man"},         {"women", "woman"},     {"children", "child"},
        {"feet", "foot"},       {"teeth", "tooth"},     {"mice", "mouse"},
        {"geese", "goose"},     {"people", "person"},   {"leaves", "leaf"},
        {"lives", "life"},      {"wives", "wife"},      {"knives", "knife"},
        {"shelves", "shelf"},   {"loaves", "loaf"},     {"halves", "half"},
        {"better", "good"},     {"best", "good"},       {"worse", "bad"},
        {"worst", "bad"},       {"went", "go"},         {"gone", "go"},
        {"made", "make"},       {"said", "say"},        {"paid", "pay"},
        {"left", "leave"},      {"kept", "keep"},       {"slept", "sleep"},
        {"felt", "feel"},       {"found", "find"},      {"took", "take"},
        {"taken", "take"},      {"got", "get"},         {"gotten", "get"},
        {"came", "come"},       {"gave", "give"},       {"given", "give"},
        {"ate", "eat"},         {"eaten", "eat"},       {"saw", "see"},
        {"seen", "see"},        {"told", "tell"},       {"bought", "buy"},
        {"brought", "bring"},   {"thought", "think"},   {"stayed", "stay"},
        {"lying", "lie"},       {"dying", "die"},       {"tying", "tie"},
        {"data", "datum"},      {"buses", "bus"},       {"dishes", "dish"},
    };
}

std::string DictionarySuffixLemmatizer::lemma(const std::string& word) const {
    if (auto it = exceptions_.find(word); it != exceptions_.end()) return it->second;
    const std::size_t n = word.size();

    auto strip = [&](std::string_view suffix) -> std::string {
        return word.substr(0, n - suffix.size());
    };
    auto ends = [&](std::string_view suffix) {
        return n > suffix.size() && word.compare(n - suffix.size(), suffix.size(), suffix) == 0;
    };

    // Plural / 3rd-person -s family.
    if (ends("sses")) return strip("es");
    if (ends("ies") && n > 4) return strip("ies") + "y";
    if (ends("es") && n > 4 && (ends("shes") || ends("ches") || ends("xes") || ends("zes")))
        return strip("es");
    if (ends("s") && !ends("ss") && !ends("us") && !ends("is") && n > 3) return strip("s");

    // Past tense / participle.
    if (ends("ied") && n > 4) return strip("ied") + "y";
    if (ends("ed") && n > 4) {
        std::string stem = strip("ed");
        if (has_vowel(stem)) {
            if (double_consonant_tail(stem) && !(stem.back() == 'l' || stem.back() == 's'))
                stem.pop_back();
            else if (stem.size() >= 3 && !has_vowel(std::string_view(stem).substr(stem.size() - 1)) &&
                     stem.back() != 'w' && stem.back() != 'x' &&
                     has_vowel(std::string_view(stem).substr(0, stem.size() - 1)) &&
                     (ends("ated") || ends("ized") || ends("used") || ends("ured") ||
                      ends("ived") || ends("aged") || ends("ined") || ends("osed")))
                stem.push_back('e');
            if (stem.size() >= 3) return stem;
        }
    }

    // Progressive.
    if (ends("ing") && n > 5) {
        std::string stem = strip("ing");
        if (has_vowel(stem)) {
            if (double_consonant_tail(stem) && !(stem.back() == 'l' || stem.back() == 's'))
                stem.pop_back();
            if (stem.size() >= 3) return stem;
        }
    }

    return word;
}

TokenizeResult tokenize(std::string_view text, const Stopwords& stopwords,
                        const Lemmatizer& lemmatizer) {
    TokenizeResult result;

    // Raw length: whitespace-delimited words before any removal (the LEN
    // operationalization).
    bool in_word = false;
    for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_word) ++result.raw_word_count;
        in_word = !space;
    }

    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        std::string surface = std::move(current);
        current.clear();
        if (stopwords.count(surface)) return;
        std::string lemma = lemmatizer.lemma(surface);
        if (lemma.size() <= 2) return;
        if (stopwords.count(lemma)) return;
        result.tokens.push_back(std::move(lemma));
    };
    for (unsigned char c : text) {
        if (is_word_char(c))
            current.push_back(static_cast<char>(std::tolower(c)));
        else
            flush();
    }
    flush();
    return result;
}

TfIdfIndex TfIdfIndex::build(const std::vector<std::vector<std::string>>& docs,
                             const std::vector<std::string>& doc_items,
                             const TfIdfOptions& options) {
    TfIdfIndex index;
    index.options_ = options;
    index.doc_count_ = docs.size();
    index.global_.doc_count = docs.size();
    if (options.universe == DocUniverse::per_item && doc_items.size() != docs.size())
        throw DataError("TfIdfIndex: per-item universe requires one item per document");

    std::unordered_set<std::string> seen;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        seen.clear();
        for (const std::string& t : docs[d]) seen.insert(t);
        for (const std::string& t : seen) ++index.global_.doc_freq[t];
        if (options.universe == DocUniverse::per_item) {
            Universe& u = index.per_item_[doc_items[d]];
            ++u.doc_count;
            for (const std::string& t : seen) ++u.doc_freq[t];
        }
    }
    return index;
}

double TfIdfIndex::idf_value(const Universe& u, const std::string& term) const {
    const auto it = u.doc_freq.find(term);
    if (it == u.doc_freq.end() || u.doc_count == 0) return 0.0;  // unseen term contributes 0
    const double n = static_cast<double>(u.doc_count);
    const double df = static_cast<double>(it->second);
    if (options_.formula == IdfFormula::smoothed) return std::log((n + 1.0) / (df + 1.0)) + 1.0;
    return std::log(n / df);
}

double TfIdfIndex::idf(const std::string& term) const { return idf_value(global_, term); }

double TfIdfIndex::idf(const std::string& term, const std::string& item) const {
    if (options_.universe == DocUniverse::corpus_wide) return idf_value(global_, term);
    const auto it = per_item_.find(item);
    if (it == per_item_.end()) return 0.0;
    return idf_value(it->second, term);
}

std::size_t TfIdfIndex::doc_freq(const std::string& term) const {
    const auto it = global_.doc_freq.find(term);
    return it == global_.doc_freq.end() ? 0 : it->second;
}

double TfIdfIndex::mean_over(const Universe& u, const std::vector<std::string>& tokens) const {
    if (tokens.empty()) return 0.0;
    std::unordered_map<std::string, std::size_t> tf;
    for (const std::string& t : tokens) ++tf[t];
    double sum = 0;
    for (const std::string& t : tokens)
        sum += static_cast<double>(tf[t]) * idf_value(u, t);
    return sum / static_cast<double>(tokens.size());
}

double TfIdfIndex::mean_tfidf(const std::vector<std::string>& tokens) const {
    return mean_over(global_, tokens);
}

double TfIdfIndex::mean_tfidf(const std::vector<std::string>& tokens,
                              const std::string& item) const {
    if (options_.universe == DocUniverse::corpus_wide) return mean_over(global_, tokens);
    const auto it = per_item_.find(item);
    if (it == per_item_.end()) return 0.0;
    return mean_over(it->second, tokens);
}

LexiconScorer LexiconScorer::from_file(const std::string& lexicon_path) {
    std::ifstream in(lexicon_path);
    if (!in) throw DataError("cannot open lexicon file " + lexicon_path);
    LexiconScorer scorer;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(lexicon_path + ":" + std::to_string(line_no) +
                            ": expected term<TAB>valence");
        const std::string term = to_lower(line.substr(0, tab));
        double valence = 0;
        try {
            valence = std::stod(line.substr(tab + 1));
        } catch (...) {
            throw DataError(lexicon_path + ":" + std::to_string(line_no) + ": bad valence");
        }
        scorer.valence_[term] = std::clamp(valence, -4.0, 4.0);
    }
    if (scorer.valence_.empty()) throw DataError(lexicon_path + ": empty lexicon");

    scorer.negators_ = {"not",     "no",      "never",  "none",    "neither", "nor",
                        "cannot",  "can't",   "cant",   "don't",   "dont",    "doesn't",
                        "doesnt",  "didn't",  "didnt",  "isn't",   "isnt",    "wasn't",
                        "wasnt",   "aren't",  "arent",  "weren't", "werent",  "won't",
                        "wont",    "wouldn't", "wouldnt", "couldn't", "couldnt", "shouldn't",
                        "shouldnt", "hardly", "scarcely", "barely", "without", "lack",
                        "lacks",   "lacking", "ain't",  "aint",    "hasn't",  "hasnt",
                        "haven't", "havent",  "nothing", "nobody", "nowhere"};
    scorer.intensifiers_ = {
        {"very", 1.3},       {"really", 1.3},    {"extremely", 1.5}, {"absolutely", 1.4},
        {"incredibly", 1.5}, {"so", 1.2},        {"super", 1.3},     {"totally", 1.3},
        {"completely", 1.4}, {"highly", 1.3},    {"truly", 1.3},     {"especially", 1.2},
        {"particularly", 1.2}, {"quite", 1.1},   {"amazingly", 1.4}, {"exceptionally", 1.5},
        {"remarkably", 1.3}, {"utterly", 1.4},   {"somewhat", 0.8},  {"slightly", 0.7},
        {"fairly", 0.9},     {"kind", 0.9},      {"kinda", 0.8},     {"sort", 0.9},
        {"mildly", 0.8},     {"marginally", 0.7}, {"rather", 1.1},   {"pretty", 1.1},
    };
    return scorer;
}

double LexiconScorer::score(std::string_view text) const {
    // Own lightweight tokenization: apostrophes stay inside a word so
    // contraction negators ("don't") survive.
    std::vector<std::string> words;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '\'') {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));

    double total = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
        const auto hit = valence_.find(words[i]);
        if (hit == valence_.end()) continue;
        double v = hit->second;
        double boost = 1.0;
        bool negated = false;
        for (std::size_t back = 1; back <= 3 && back <= i; ++back) {
            const std::string& w = words[i - back];
            if (negators_.count(w)) negated = true;
            if (const auto b = intensifiers_.find(w); b != intensifiers_.end())
                boost *= b->second;
        }
        v *= boost;
        if (negated) v = -v;
        total += std::clamp(v, -4.0, 4.0);
    }
    // Saturating normalization into (-1, 1); 0 when nothing matched.
    constexpr double kAlpha = 15.0;
    return total / std::sqrt(total * total + kAlpha);
}

double polarity(std::string_view text, const std::vector<const SentimentScorer*>& scorers) {
    if (scorers.empty()) throw ConfigError("polarity: at least one sentiment scorer required");
    double sum = 0;
    for (const SentimentScorer* s : scorers) {
        const double v = s->score(text);
        sum += std::clamp(v, -1.0, 1.0);
    }
    const double mean = sum / static_cast<double>(scorers.size());
    return 2.0 * (mean + 1.0) + 1.0;
}

}  // namespace helprank
