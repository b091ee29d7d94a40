#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cgprune/callgraph.hpp"

namespace cgprune {

// Semantic vectors cross the embedding-file boundary as 32-bit floats and stay
// that way until the model casts them.
using SemVector = Eigen::VectorXf;
using SemMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Which side of an edge feeds the semantic vector. Non-`Both` modes zero the
// other half (hash provider) for the caller-only / callee-only ablations.
enum class SourceMode { Both, CallerOnly, CalleeOnly };

SourceMode parse_source_mode(std::string_view s);
std::string_view to_string(SourceMode m);

inline constexpr std::size_t kDefaultHashDim = 256;
inline constexpr std::uint64_t kDefaultHashSeed = 0x9E3779B97F4A7C15ULL;

// Identifier-aware tokens: split on non-alphanumerics and camelCase humps, lowercased.
// "parseHTTPHeader2(x)" -> {"parse", "http", "header2", "x"}.
std::vector<std::string> tokenize(std::string_view source);

// FNV-1a over the bytes, seeded through the offset basis, finished with a
// splitmix64 avalanche.
std::uint64_t token_hash(std::string_view token, std::uint64_t seed = kDefaultHashSeed);

// Bag-of-tokens feature hashing. First dim/2 entries count caller tokens, last
// dim/2 callee tokens; each half is L2-normalized, absent sources give zeros.
SemVector hash_encode(std::optional<std::string_view> caller_src, std::optional<std::string_view> callee_src,
                      std::size_t dim, std::uint64_t seed = kDefaultHashSeed);

// Dense, ordinal-indexed float vectors (the `*.emb` payload).
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    EmbeddingStore(std::uint32_t dim, SemMatrix rows);

    std::uint32_t dimension() const noexcept { return dim_; }
    std::uint64_t count() const noexcept { return static_cast<std::uint64_t>(rows_.rows()); }
    const SemMatrix& rows() const noexcept { return rows_; }
    SemVector vector(std::size_t ordinal) const;

private:
    std::uint32_t dim_ = 0;
    SemMatrix rows_;
};

// CGEMBED1 binary layout: magic, u32 dim, u64 count, count*dim f32, all little-endian.
EmbeddingStore read_embeddings(std::istream& in, const std::string& source_name);
EmbeddingStore load_embeddings(const std::string& path, std::uint64_t expected_count);
void write_embeddings(const EmbeddingStore& store, std::ostream& out);
void write_embeddings(const EmbeddingStore& store, const std::string& path);

class SemProvider {
public:
    virtual ~SemProvider() = default;
    virtual std::size_t dimension() const = 0;
    virtual SemVector vector_for(std::size_t ordinal, std::optional<std::string_view> caller_src,
                                 std::optional<std::string_view> callee_src) const = 0;
};

class HashProvider final : public SemProvider {
public:
    explicit HashProvider(std::size_t dim = kDefaultHashDim, SourceMode mode = SourceMode::Both,
                          std::uint64_t seed = kDefaultHashSeed);

    std::size_t dimension() const override { return dim_; }
    SemVector vector_for(std::size_t ordinal, std::optional<std::string_view> caller_src,
                         std::optional<std::string_view> callee_src) const override;

private:
    std::size_t dim_;
    SourceMode mode_;
    std::uint64_t seed_;
};

// Serves precomputed rows; source text is ignored. Source-mode ablations for
// transformer embeddings are applied by the exporter, not here.
class FileProvider final : public SemProvider {
public:
    explicit FileProvider(EmbeddingStore store);

    std::size_t dimension() const override { return store_.dimension(); }
    SemVector vector_for(std::size_t ordinal, std::optional<std::string_view> caller_src,
                         std::optional<std::string_view> callee_src) const override;
    const EmbeddingStore& store() const noexcept { return store_; }

private:
    EmbeddingStore store_;
};

// Row i is the provider's vector for edge ordinal i.
SemMatrix semantic_matrix(const CallGraph& g, const SemProvider& provider, const SourceMap& sources);

double cosine_similarity(const SemVector& a, const SemVector& b);

}  // namespace cgprune
