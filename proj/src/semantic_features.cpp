#include "cgprune/semantic_features.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cgprune/error.hpp"
#include "cgprune/parallel.hpp"

namespace cgprune {

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'G', 'E', 'M', 'B', 'E', 'D', '1'};

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return is_upper(c) || is_lower(c) || is_digit(c); }
char to_lower(char c) { return is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

template <typename UInt>
void put_le(std::ostream& out, UInt v) {
    std::array<char, sizeof(UInt)> bytes{};
    for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(bytes.data(), bytes.size());
}

template <typename UInt>
bool get_le(std::istream& in, UInt& v) {
    std::array<unsigned char, sizeof(UInt)> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) return false;
    v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
    return true;
}

void encode_half(std::optional<std::string_view> src, std::size_t buckets, std::uint64_t seed,
                 Eigen::Ref<Eigen::VectorXf> half) {
    half.setZero();
    if (!src) return;
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(buckets));
    for (const auto& tok : tokenize(*src)) counts[static_cast<Eigen::Index>(token_hash(tok, seed) % buckets)] += 1.0;
    double norm = counts.norm();
    if (norm > 0.0) half = (counts / norm).cast<float>();
}

}  // namespace

SourceMode parse_source_mode(std::string_view s) {
    if (s == "both") return SourceMode::Both;
    if (s == "caller-only") return SourceMode::CallerOnly;
    if (s == "callee-only") return SourceMode::CalleeOnly;
    throw ConfigError("unknown source mode: " + std::string(s));
}

std::string_view to_string(SourceMode m) {
    switch (m) {
        case SourceMode::Both: return "both";
        case SourceMode::CallerOnly: return "caller-only";
        case SourceMode::CalleeOnly: return "callee-only";
    }
    return "both";
}

std::vector<std::string> tokenize(std::string_view source) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < source.size()) {
        if (!is_alnum(source[i])) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < source.size() && is_alnum(source[end])) ++end;

        std::string current;
        for (std::size_t k = i; k < end; ++k) {
            char c = source[k];
            if (!current.empty() && is_upper(c)) {
                char prev = source[k - 1];
                bool next_lower = k + 1 < end && is_lower(source[k + 1]);
                if (is_lower(prev) || is_digit(prev) || (is_upper(prev) && next_lower)) {
                    tokens.push_back(std::move(current));
                    current.clear();
                }
            }
            current.push_back(to_lower(c));
        }
        tokens.push_back(std::move(current));
        i = end;
    }
    return tokens;
}

std::uint64_t token_hash(std::string_view token, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : token) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

SemVector hash_encode(std::optional<std::string_view> caller_src, std::optional<std::string_view> callee_src,
                      std::size_t dim, std::uint64_t seed) {
    if (dim == 0 || dim % 2 != 0) throw ConfigError("hash dimension must be even and positive, got " + std::to_string(dim));
    const std::size_t half = dim / 2;
    const auto h = static_cast<Eigen::Index>(half);
    SemVector v(static_cast<Eigen::Index>(dim));
    encode_half(caller_src, half, seed, v.head(h));
    encode_half(callee_src, half, seed, v.tail(h));
    return v;
}

EmbeddingStore::EmbeddingStore(std::uint32_t dim, SemMatrix rows) : dim_(dim), rows_(std::move(rows)) {
    if (rows_.rows() > 0 && rows_.cols() != static_cast<Eigen::Index>(dim_)) {
        throw ShapeError("embedding rows have " + std::to_string(rows_.cols()) + " columns, header says " +
                         std::to_string(dim_));
    }
    if (rows_.rows() == 0) rows_.resize(0, dim_);
}

SemVector EmbeddingStore::vector(std::size_t ordinal) const {
    if (ordinal >= count()) {
        throw IndexError("embedding ordinal " + std::to_string(ordinal) + " out of range [0, " +
                         std::to_string(count()) + ")");
    }
    return rows_.row(static_cast<Eigen::Index>(ordinal)).transpose();
}

EmbeddingStore read_embeddings(std::istream& in, const std::string& source_name) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw FormatError(source_name + ": bad magic, expected CGEMBED1");
    }
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    if (!get_le(in, dim) || !get_le(in, count)) throw FormatError(source_name + ": truncated header");
    if (dim == 0) throw FormatError(source_name + ": dimension must be positive");

    // Guard the allocation against a corrupt count before trusting it.
    const auto payload_start = in.tellg();
    if (payload_start != std::istream::pos_type(-1)) {
        in.seekg(0, std::ios::end);
        const auto available = static_cast<std::uint64_t>(in.tellg() - payload_start);
        in.seekg(payload_start);
        const std::uint64_t need = count * static_cast<std::uint64_t>(dim) * 4;
        if (count != 0 && need / count / 4 != dim) throw LengthError(source_name + ": payload size overflows");
        if (available != need) {
            throw LengthError(source_name + ": payload is " + std::to_string(available) + " bytes, expected " +
                              std::to_string(need));
        }
    }

    SemMatrix rows(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            std::uint32_t bits = 0;
            if (!get_le(in, bits)) throw LengthError(source_name + ": truncated payload");
            float f;
            std::memcpy(&f, &bits, sizeof f);
            rows(r, c) = f;
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw LengthError(source_name + ": trailing bytes after payload");
    return EmbeddingStore(dim, std::move(rows));
}

EmbeddingStore load_embeddings(const std::string& path, std::uint64_t expected_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file: " + path);
    EmbeddingStore store = read_embeddings(in, path);
    if (store.count() != expected_count) {
        throw AlignmentError(path + ": holds " + std::to_string(store.count()) + " vectors for a graph with " +
                             std::to_string(expected_count) + " edges");
    }
    return store;
}

void write_embeddings(const EmbeddingStore& store, std::ostream& out) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, store.dimension());
    put_le<std::uint64_t>(out, store.count());
    const SemMatrix& rows = store.rows();
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            std::uint32_t bits;
            float f = rows(r, c);
            std::memcpy(&bits, &f, sizeof bits);
            put_le(out, bits);
        }
    }
}

void write_embeddings(const EmbeddingStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write embedding file: " + path);
    write_embeddings(store, out);
}

HashProvider::HashProvider(std::size_t dim, SourceMode mode, std::uint64_t seed)
    : dim_(dim), mode_(mode), seed_(seed) {
    if (dim_ == 0 || dim_ % 2 != 0) throw ConfigError("hash dimension must be even and positive, got " + std::to_string(dim_));
}

SemVector HashProvider::vector_for(std::size_t, std::optional<std::string_view> caller_src,
                                   std::optional<std::string_view> callee_src) const {
    if (mode_ == SourceMode::CalleeOnly) caller_src.reset();
    if (mode_ == SourceMode::CallerOnly) callee_src.reset();
    return hash_encode(caller_src, callee_src, dim_, seed_);
}

FileProvider::FileProvider(EmbeddingStore store) : store_(std::move(store)) {}

SemVector FileProvider::vector_for(std::size_t ordinal, std::optional<std::string_view>,
                                   std::optional<std::string_view>) const {
    return store_.vector(ordinal);
}

SemMatrix semantic_matrix(const CallGraph& g, const SemProvider& provider, const SourceMap& sources) {
    const auto dim = static_cast<Eigen::Index>(provider.dimension());
    SemMatrix out(static_cast<Eigen::Index>(g.edge_count()), dim);
    parallel_for(g.edge_count(), [&](std::size_t i) {
        const Edge& e = g.edge(i);
        SemVector v;
        try {
            v = provider.vector_for(i, sources.lookup(g.sig(e.caller)), sources.lookup(g.sig(e.callee)));
        } catch (const IndexError& ex) {
            throw IndexError("edge ordinal " + std::to_string(i) + ": " + ex.what());
        } catch (const Error& ex) {
            throw Error("edge ordinal " + std::to_string(i) + ": " + ex.what());
        }
        if (v.size() != dim) {
            throw ShapeError("edge ordinal " + std::to_string(i) + ": provider returned " + std::to_string(v.size()) +
                             " values, declared " + std::to_string(dim));
        }
        out.row(static_cast<Eigen::Index>(i)) = v.transpose();
    });
    return out;
}

double cosine_similarity(const SemVector& a, const SemVector& b) {
    const double na = a.cast<double>().norm();
    const double nb = b.cast<double>().norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.cast<double>().dot(b.cast<double>()) / (na * nb);
}

}  // namespace cgprune
