#include "relcap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "relcap/vocab.hpp"

namespace relcap {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                        tokens.begin() + static_cast<std::ptrdiff_t>(i + n))]++;
    }
    return counts;
}

}  // namespace

double bleu4(const std::string& candidate, const std::vector<std::string>& references) {
    if (references.empty()) {
        throw std::invalid_argument("bleu4: empty reference list");
    }
    const std::vector<std::string> cand = tokenize(candidate);
    if (cand.empty()) return 0.0;

    std::vector<std::vector<std::string>> refs;
    refs.reserve(references.size());
    for (const std::string& r : references) refs.push_back(tokenize(r));

    double log_precision_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const NgramCounts cand_counts = count_ngrams(cand, n);
        std::size_t total = 0;
        for (const auto& [gram, c] : cand_counts) total += c;

        std::vector<NgramCounts> ref_counts;
        ref_counts.reserve(refs.size());
        for (const auto& ref : refs) ref_counts.push_back(count_ngrams(ref, n));

        std::size_t matched = 0;
        for (const auto& [gram, c] : cand_counts) {
            std::size_t best_ref = 0;
            for (const NgramCounts& rc : ref_counts) {
                auto it = rc.find(gram);
                if (it != rc.end()) best_ref = std::max(best_ref, it->second);
            }
            matched += std::min(c, best_ref);
        }

        double p;
        if (n == 1) {
            if (matched == 0) return 0.0;
            p = static_cast<double>(matched) / static_cast<double>(total);
        } else if (matched == 0) {
            p = 1.0 / static_cast<double>(total + 1);
        } else {
            p = static_cast<double>(matched) / static_cast<double>(total);
        }
        log_precision_sum += 0.25 * std::log(p);
    }

    // Closest reference length; ties break to the shorter reference.
    std::size_t ref_len = refs.front().size();
    for (const auto& ref : refs) {
        const auto diff = [&](std::size_t len) {
            return std::llabs(static_cast<long long>(len) -
                              static_cast<long long>(cand.size()));
        };
        if (diff(ref.size()) < diff(ref_len) ||
            (diff(ref.size()) == diff(ref_len) && ref.size() < ref_len)) {
            ref_len = ref.size();
        }
    }
    const double bp = cand.size() >= ref_len
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref_len) /
                                               static_cast<double>(cand.size()));
    return bp * std::exp(log_precision_sum);
}

std::string normalize_whitespace(const std::string& s) {
    std::string out;
    bool in_space = true;  // suppress leading spaces
    for (char ch : s) {
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(ch);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

double exact_match_rate(const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (pairs.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& [cand, ref] : pairs) {
        if (normalize_whitespace(cand) == normalize_whitespace(ref)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

EvalReport make_eval_report(const std::vector<ExampleEval>& examples,
                            const std::string& config_echo) {
    EvalReport report;
    report.examples = examples;
    report.config_echo = config_echo;
    if (!examples.empty()) {
        double bleu_sum = 0.0;
        std::size_t exact = 0;
        for (const ExampleEval& e : examples) {
            bleu_sum += e.bleu4;
            if (e.exact) ++exact;
        }
        report.bleu4 = bleu_sum / static_cast<double>(examples.size());
        report.exact_match = static_cast<double>(exact) / static_cast<double>(examples.size());
    }
    return report;
}

void save_eval_report(const EvalReport& report, const std::string& path) {
    nlohmann::json j;
    j["bleu4"] = report.bleu4;
    j["exact_match"] = report.exact_match;
    j["config"] = report.config_echo.empty()
                      ? nlohmann::json(nullptr)
                      : nlohmann::json::parse(report.config_echo);
    nlohmann::json ex = nlohmann::json::array();
    for (const ExampleEval& e : report.examples) {
        ex.push_back({{"scene_id", e.scene_id},
                      {"candidate", e.candidate},
                      {"reference", e.reference},
                      {"bleu4", e.bleu4},
                      {"exact", e.exact}});
    }
    j["examples"] = ex;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_eval_report: cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace relcap
