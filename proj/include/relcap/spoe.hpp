#pragma once

#include <optional>
#include <string>
#include <vector>

namespace relcap {

// Subject-Predicate-Object-Environment record. Absent fields are nullopt,
// never empty strings; render_tuple writes them as the literal [MISSING].
struct SpoeTuple {
    std::optional<std::string> subject;
    std::optional<std::string> predicate;
    std::optional<std::string> object;
    std::optional<std::string> environment;

    bool operator==(const SpoeTuple&) const = default;
};

// Predicate phrases and environment markers for the rule cascade. Shipped as
// a data file so fixture corpora can extend coverage without code changes.
struct Lexicon {
    std::vector<std::vector<std::string>> predicates;  // tokenized phrases
    std::vector<std::string> env_prepositions;
    std::vector<std::string> articles;

    static Lexicon load(const std::string& path);
    // Same contents as data/lexicon.json, available without file IO.
    static Lexicon builtin();
};

// Longest-match rule cascade. Total and deterministic on arbitrary text;
// worst case every field comes back missing.
SpoeTuple extract_spoe(const std::string& caption, const Lexicon& lex);

// "subject: {s} ; predicate: {p} ; object: {o} ; environment: {e}"
std::string render_tuple(const SpoeTuple& t);

std::vector<std::string> tokenize_whitespace(const std::string& text);

}  // namespace relcap
