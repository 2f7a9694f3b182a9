#include "relcap/vocab.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace relcap {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : text) {
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
            flush();
        } else if (ch == ',' || ch == '.') {
            flush();
            out.push_back(std::string(1, ch));
        } else {
            cur.push_back(ch);
        }
    }
    flush();
    return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
    std::set<std::string> distinct;
    for (const std::string& text : texts) {
        for (const std::string& tok : tokenize(text)) distinct.insert(tok);
    }

    Vocabulary v;
    v.tokens_ = {"<bos>", "<eos>", "<pad>"};
    for (const std::string& tok : distinct) v.tokens_.push_back(tok);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        v.ids_[v.tokens_[i]] = static_cast<int>(i);
    }
    return v;
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) {
        throw std::invalid_argument("vocabulary: unknown token \"" + token + "\"");
    }
    return it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw std::invalid_argument("vocabulary: id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
    std::vector<int> out;
    for (const std::string& tok : tokenize(text)) out.push_back(id_of(tok));
    return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kBosId || id == kEosId || id == kPadId) continue;
        const std::string& tok = token_of(id);
        const bool punct = tok == "," || tok == ".";
        if (!out.empty() && !punct) out.push_back(' ');
        out += tok;
    }
    return out;
}

}  // namespace relcap
