#include "relcap/index.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "relcap/embedder.hpp"
#include "relcap/rng.hpp"

namespace relcap {

namespace {

constexpr char kMagic[8] = {'R', 'C', 'A', 'P', 'I', 'D', 'X', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "index persistence assumes a little-endian host");

void write_bytes(std::ofstream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* data, std::size_t n, const char* what) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw std::runtime_error(std::string("index file truncated while reading ") + what);
    }
}

}  // namespace

std::uint64_t index_content_hash(const EmbeddingIndex& index) {
    std::uint64_t h = kFnvOffset;
    h = fnv1a_bytes(index.ids.data(), index.ids.size() * sizeof(std::uint64_t), h);
    if (index.vectors.size() > 0) {
        h = fnv1a_bytes(index.vectors.data(), index.vectors.size() * sizeof(double), h);
    }
    return h;
}

EmbeddingIndex build_index(const std::vector<std::pair<std::uint64_t, std::string>>& corpus,
                           std::size_t dim, const std::string& source) {
    if (corpus.empty()) {
        throw std::invalid_argument("build_index: corpus is empty");
    }
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(corpus.size());
    for (const auto& [id, text] : corpus) {
        if (!seen.insert(id).second) {
            throw std::invalid_argument("build_index: duplicate id " + std::to_string(id));
        }
        (void)text;
    }

    EmbeddingIndex index;
    index.dim = dim;
    index.source = source;
    index.ids.reserve(corpus.size());
    index.vectors = Matrix(corpus.size(), dim);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        index.ids.push_back(corpus[i].first);
        const Matrix e = embed_text(corpus[i].second, dim);
        std::copy(e.data(), e.data() + e.size(), index.vectors.row_ptr(i));
    }
    index.content_hash = index_content_hash(index);
    return index;
}

std::vector<SearchHit> query_topk(const EmbeddingIndex& index, const Matrix& query,
                                  std::size_t k) {
    if (k == 0) {
        throw std::invalid_argument("query_topk: k must be positive");
    }
    if (k > index.ids.size()) {
        throw std::invalid_argument("query_topk: k=" + std::to_string(k) +
                                    " exceeds index size " + std::to_string(index.ids.size()));
    }
    if (query.rows() != 1 || query.cols() != index.dim) {
        throw std::invalid_argument("query_topk: query shape " + query.shape_str() +
                                    " does not match index dim " + std::to_string(index.dim));
    }

    double qnorm = query.l2_norm();
    if (qnorm == 0.0) qnorm = 1.0;

    std::vector<SearchHit> hits;
    hits.reserve(index.ids.size());
    for (std::size_t i = 0; i < index.ids.size(); ++i) {
        const double* row = index.vectors.row_ptr(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < index.dim; ++j) dot += row[j] * query.at(0, j);
        hits.push_back({index.ids[i], dot / qnorm});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    hits.resize(k);
    return hits;
}

void save_index(const EmbeddingIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("save_index: cannot open " + path);
    }

    nlohmann::json meta;
    meta["dim"] = index.dim;
    meta["count"] = index.ids.size();
    meta["source"] = index.source;
    meta["content_hash"] = index.content_hash;
    const std::string meta_str = meta.dump();

    write_bytes(out, kMagic, sizeof(kMagic));
    const std::uint32_t version = kVersion;
    write_bytes(out, &version, sizeof(version));
    const std::uint32_t meta_len = static_cast<std::uint32_t>(meta_str.size());
    write_bytes(out, &meta_len, sizeof(meta_len));
    write_bytes(out, meta_str.data(), meta_str.size());
    if (index.vectors.size() > 0) {
        write_bytes(out, index.vectors.data(), index.vectors.size() * sizeof(double));
    }
    if (!index.ids.empty()) {
        write_bytes(out, index.ids.data(), index.ids.size() * sizeof(std::uint64_t));
    }
    if (!out) {
        throw std::runtime_error("save_index: write failed for " + path);
    }
}

EmbeddingIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_index: cannot open " + path);
    }

    char magic[8];
    read_bytes(in, magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("load_index: bad magic in " + path);
    }
    std::uint32_t version = 0;
    read_bytes(in, &version, sizeof(version), "version");
    if (version != kVersion) {
        throw std::runtime_error("load_index: unsupported version " + std::to_string(version));
    }
    std::uint32_t meta_len = 0;
    read_bytes(in, &meta_len, sizeof(meta_len), "metadata length");
    std::string meta_str(meta_len, '\0');
    read_bytes(in, meta_str.data(), meta_len, "metadata");

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_str);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("load_index: corrupt metadata: ") + e.what());
    }

    EmbeddingIndex index;
    index.dim = meta.at("dim").get<std::size_t>();
    const std::size_t count = meta.at("count").get<std::size_t>();
    index.source = meta.at("source").get<std::string>();
    const std::uint64_t stored_hash = meta.at("content_hash").get<std::uint64_t>();

    index.vectors = Matrix(count, index.dim);
    if (index.vectors.size() > 0) {
        read_bytes(in, index.vectors.data(), index.vectors.size() * sizeof(double),
                   "vector payload");
    }
    index.ids.resize(count);
    if (count > 0) {
        read_bytes(in, index.ids.data(), count * sizeof(std::uint64_t), "id table");
    }

    index.content_hash = index_content_hash(index);
    if (index.content_hash != stored_hash) {
        throw std::runtime_error("load_index: content hash mismatch in " + path);
    }
    return index;
}

}  // namespace relcap
