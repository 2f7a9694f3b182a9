#include "relcap/prompt.hpp"

#include <stdexcept>

namespace relcap {

std::string assemble_prompt(const std::vector<std::string>& captions, std::size_t k) {
    if (captions.size() != k) {
        throw std::invalid_argument("assemble_prompt: got " + std::to_string(captions.size()) +
                                    " captions, expected " + std::to_string(k));
    }
    std::string out = "Similar images show ";
    for (std::size_t i = 0; i < captions.size(); ++i) {
        if (i > 0) out += ", ";
        out += captions[i];
    }
    out += ". This image shows ";
    return out;
}

}  // namespace relcap
