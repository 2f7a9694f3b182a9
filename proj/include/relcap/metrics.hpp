#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace relcap {

// Sentence-level BLEU-4: geometric mean of clipped 1..4-gram precisions times
// the brevity penalty. Smoothing rule, fixed so golden values stay stable:
// for n >= 2 a zero clipped count becomes (0+1)/(total+1); unigrams are never
// smoothed, so a candidate sharing no unigram scores 0. Reference length for
// the brevity penalty is the closest one (ties break shorter). Throws on an
// empty reference list.
double bleu4(const std::string& candidate, const std::vector<std::string>& references);

// Trim plus collapse of internal whitespace runs to single spaces.
std::string normalize_whitespace(const std::string& s);

// Fraction of (candidate, reference) pairs byte-equal after whitespace
// normalization.
double exact_match_rate(const std::vector<std::pair<std::string, std::string>>& pairs);

struct ExampleEval {
    std::uint64_t scene_id = 0;
    std::string candidate;
    std::string reference;
    double bleu4 = 0.0;
    bool exact = false;
};

struct EvalReport {
    double bleu4 = 0.0;       // mean sentence BLEU-4
    double exact_match = 0.0;
    std::vector<ExampleEval> examples;
    std::string config_echo;  // JSON string of the producing configuration
};

EvalReport make_eval_report(const std::vector<ExampleEval>& examples,
                            const std::string& config_echo);

void save_eval_report(const EvalReport& report, const std::string& path);

}  // namespace relcap
