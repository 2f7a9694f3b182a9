#include "relcap/spoe.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace relcap {

std::vector<std::string> tokenize_whitespace(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

namespace {

// Longest phrases first so the cascade prefers "sitting on" over "sitting".
void sort_predicates(Lexicon& lex) {
    std::stable_sort(lex.predicates.begin(), lex.predicates.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });
}

}  // namespace

Lexicon Lexicon::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("Lexicon::load: cannot open " + path);
    nlohmann::json j;
    in >> j;
    Lexicon lex;
    for (const auto& p : j.at("predicates"))
        lex.predicates.push_back(tokenize_whitespace(p.get<std::string>()));
    for (const auto& e : j.at("env_prepositions")) lex.env_prepositions.push_back(e);
    for (const auto& a : j.at("articles")) lex.articles.push_back(a);
    sort_predicates(lex);
    return lex;
}

Lexicon Lexicon::builtin() {
    Lexicon lex;
    for (const char* p :
         {"left of",    "right of", "above",         "below",       "next to",
          "holding",    "riding",   "eating",        "wearing",     "carrying",
          "chasing",    "watching", "reading",       "throwing",    "catching",
          "pushing",    "pulling",  "sitting on",    "standing near", "sleeping on",
          "jumping over", "looking at", "playing with", "walking",   "running",
          "swimming",   "flying",   "behind",        "under"}) {
        lex.predicates.push_back(tokenize_whitespace(p));
    }
    lex.env_prepositions = {"in", "at", "on"};
    lex.articles = {"a", "an", "the"};
    sort_predicates(lex);
    return lex;
}

namespace {

bool is_in(const std::vector<std::string>& set, const std::string& tok) {
    return std::find(set.begin(), set.end(), tok) != set.end();
}

// Joins tokens[first, last) after dropping one leading article; nullopt if
// nothing remains.
std::optional<std::string> noun_phrase(const std::vector<std::string>& tokens,
                                       std::size_t first, std::size_t last,
                                       const Lexicon& lex) {
    if (first < last && is_in(lex.articles, tokens[first])) ++first;
    if (first >= last) return std::nullopt;
    std::string out = tokens[first];
    for (std::size_t i = first + 1; i < last; ++i) out += " " + tokens[i];
    return out;
}

// Earliest position wins; at equal positions the longest lexicon phrase wins
// (predicates are pre-sorted longest first).
bool find_predicate(const std::vector<std::string>& tokens, const Lexicon& lex,
                    std::size_t& start, std::size_t& end) {
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
        for (const auto& phrase : lex.predicates) {
            if (pos + phrase.size() > tokens.size()) continue;
            bool match = true;
            for (std::size_t i = 0; i < phrase.size(); ++i) {
                if (tokens[pos + i] != phrase[i]) {
                    match = false;
                    break;
                }
            }
            if (match) {
                start = pos;
                end = pos + phrase.size();
                return true;
            }
        }
    }
    return false;
}

}  // namespace

SpoeTuple extract_spoe(const std::string& caption, const Lexicon& lex) {
    const std::vector<std::string> tokens = tokenize_whitespace(caption);
    SpoeTuple t;
    if (tokens.empty()) return t;

    std::size_t pred_start = tokens.size(), pred_end = tokens.size();
    const bool has_pred = find_predicate(tokens, lex, pred_start, pred_end);

    // Trailing environment: last preposition after the predicate (or anywhere
    // when there is none) that still has tokens after it.
    const std::size_t env_scan_from = has_pred ? pred_end : 0;
    std::size_t env_marker = tokens.size();
    for (std::size_t i = env_scan_from; i + 1 < tokens.size(); ++i) {
        if (is_in(lex.env_prepositions, tokens[i])) env_marker = i;
    }

    const std::size_t subject_end = has_pred ? pred_start : std::min(env_marker, tokens.size());
    t.subject = noun_phrase(tokens, 0, subject_end, lex);
    if (has_pred) {
        std::string pred = tokens[pred_start];
        for (std::size_t i = pred_start + 1; i < pred_end; ++i) pred += " " + tokens[i];
        t.predicate = pred;
        t.object = noun_phrase(tokens, pred_end, std::min(env_marker, tokens.size()), lex);
    }
    if (env_marker < tokens.size())
        t.environment = noun_phrase(tokens, env_marker + 1, tokens.size(), lex);
    return t;
}

std::string render_tuple(const SpoeTuple& t) {
    const auto field = [](const std::optional<std::string>& f) {
        return f ? *f : std::string("[MISSING]");
    };
    return "subject: " + field(t.subject) + " ; predicate: " + field(t.predicate) +
           " ; object: " + field(t.object) + " ; environment: " + field(t.environment);
}

}  // namespace relcap
