#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace relcap {

// Hard prompt wrapping the retrieved captions in rank order, byte-exact:
// "Similar images show {c1}, {c2}, ..., {ck}. This image shows " with a
// trailing space at the generation position. Throws when captions.size() != k.
std::string assemble_prompt(const std::vector<std::string>& captions, std::size_t k);

}  // namespace relcap
