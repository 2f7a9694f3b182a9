#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace relcap {

inline constexpr int kBosId = 0;
inline constexpr int kEosId = 1;
inline constexpr int kPadId = 2;

// Whitespace split with "," and "." broken out as separate tokens.
std::vector<std::string> tokenize(const std::string& text);

// Closed token<->id bijection: BOS/EOS/PAD at fixed ids 0/1/2, then every
// distinct token of the supplied texts in sorted order.
class Vocabulary {
public:
    Vocabulary() = default;

    static Vocabulary build(const std::vector<std::string>& texts);

    std::size_t size() const { return tokens_.size(); }
    bool contains(const std::string& token) const { return ids_.count(token) > 0; }
    int id_of(const std::string& token) const;  // throws on unknown token
    const std::string& token_of(int id) const;  // throws on out-of-range id

    std::vector<int> encode(const std::string& text) const;
    // Joins tokens with spaces; "," and "." attach to the preceding token;
    // specials are skipped.
    std::string decode(const std::vector<int>& ids) const;

    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

}  // namespace relcap
