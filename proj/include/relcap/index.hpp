#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "relcap/matrix.hpp"

namespace relcap {

// Unit-normalized embedding store answering exact top-k cosine queries.
// Immutable after build; concurrent queries are safe.
struct EmbeddingIndex {
    std::vector<std::uint64_t> ids;
    Matrix vectors;  // count x dim, every row unit L2 norm
    std::size_t dim = 0;
    std::string source;        // corpus path or label
    std::uint64_t content_hash = 0;
};

struct SearchHit {
    std::uint64_t id;
    double score;

    bool operator==(const SearchHit&) const = default;
};

// Embeds every caption and stores the rows in corpus order. Throws on an
// empty corpus or a duplicate id (naming it).
EmbeddingIndex build_index(const std::vector<std::pair<std::uint64_t, std::string>>& corpus,
                           std::size_t dim, const std::string& source = "");

// k results by descending cosine score, ties broken by ascending id.
// Throws when k is 0, k exceeds the index size, or the query dim mismatches.
std::vector<SearchHit> query_topk(const EmbeddingIndex& index, const Matrix& query,
                                  std::size_t k);

// Binary format: 8-byte magic, u32 version, u32 metadata length, JSON metadata
// (dim, count, source, content hash), payload of little-endian doubles, id
// table of u64. load(save(x)) is bitwise lossless.
void save_index(const EmbeddingIndex& index, const std::string& path);
EmbeddingIndex load_index(const std::string& path);

std::uint64_t index_content_hash(const EmbeddingIndex& index);

}  // namespace relcap
