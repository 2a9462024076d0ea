#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "caloraify/ingredient_parser.hpp"
#include "caloraify/nutrition_kb.hpp"

namespace caloraify::retrieval {

inline constexpr std::size_t kReferenceDim = 256;

/// Dense vector with its cached Euclidean norm. Embedders hand out unit vectors, or the all-zero
/// vector for text without tokens.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    /// Takes raw values and L2-normalizes them; an all-zero input stays all-zero.
    static EmbeddingVector normalized(std::vector<double> values);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t dim() const noexcept { return values_.size(); }
    double norm() const noexcept { return norm_; }
    bool is_zero() const noexcept { return norm_ == 0.0; }

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

/// Cosine similarity. Zero vectors score 0 against everything; the result is clamped to [-1, 1].
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Text encoder contract. Implementations must be safe to call concurrently.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const = 0;
    EmbeddingVector embed(std::string_view text) const;
};

std::uint64_t fnv1a64(std::string_view bytes);

/// Signed feature hashing over lowercase [a-z0-9]+ tokens: bucket = fnv1a64 mod 256, sign from the
/// hash's top bit, L2-normalized.
class HashingEmbedder final : public Embedder {
public:
    std::size_t dim() const override { return kReferenceDim; }
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;
    EmbeddingVector embed_text(std::string_view text) const;
};

/// Lowercases and splits on anything outside [a-z0-9].
std::vector<std::string> reference_tokens(std::string_view text);

/// Remote encoder: POST {"texts": [...]} -> {"vectors": [[...], ...], "dim": D}.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(std::string endpoint_url, std::size_t expected_dim, int timeout_ms = 10000, int retries = 2);
    std::size_t dim() const override { return dim_; }
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;

private:
    std::string url_;
    std::size_t dim_;
    int timeout_ms_;
    int retries_;
};

struct IndexedDocument {
    std::string doc_id;
    std::string text;
    EmbeddingVector vector;
};

struct Hit {
    std::string doc_id;
    double score = 0.0;
    std::string text;

    bool operator==(const Hit&) const = default;
};

/// Hits are sorted by descending score, ties by ascending doc_id.
struct RetrievedContext {
    std::string query_text;
    std::vector<Hit> hits;
    std::size_t k_requested = 0;

    bool operator==(const RetrievedContext&) const = default;
};

/// Strict ordering used for ranking: higher score first, then smaller doc_id.
bool ranks_before(const Hit& a, const Hit& b);

/// Exact (brute-force) cosine index. Concurrent searches are allowed; add() takes an exclusive lock.
class VectorIndex {
public:
    explicit VectorIndex(std::shared_ptr<const Embedder> embedder);
    VectorIndex(const VectorIndex&) = delete;
    VectorIndex& operator=(const VectorIndex&) = delete;

    /// Throws ArgumentError on a duplicate id or a dimension mismatch.
    void add(IndexedDocument doc);
    /// Embeds `text` with the index's embedder and adds it.
    void add(std::string doc_id, std::string text);

    std::size_t size() const;
    const Embedder& embedder() const noexcept { return *embedder_; }

    /// Throws ArgumentError when the index is empty or k < 1.
    RetrievedContext search(std::string_view query, std::size_t k) const;
    RetrievedContext search_vector(const EmbeddingVector& query, std::string query_text, std::size_t k) const;

private:
    std::shared_ptr<const Embedder> embedder_;
    mutable std::shared_mutex mutex_;
    std::vector<IndexedDocument> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Document text for a food: `name; category; portion names` (empty parts omitted).
std::string render_document(const kb::FoodRecord& record);

/// Indexes every record of a knowledge base under its food_id.
std::unique_ptr<VectorIndex> build_index(const kb::KnowledgeBase& kb, std::shared_ptr<const Embedder> embedder);

/// `nutrition facts for {name}`, one line per ingredient. Throws ArgumentError on an empty list.
std::string build_rag_query(std::span<const parser::ParsedIngredient> ingredients);
std::string rag_query_for(const parser::ParsedIngredient& ingredient);

}  // namespace caloraify::retrieval
