#include "caloraify/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <nlohmann/json.hpp>

#include "caloraify/error.hpp"
#include "caloraify/text.hpp"
#include "http_endpoint.hpp"

namespace caloraify::retrieval {

EmbeddingVector EmbeddingVector::normalized(std::vector<double> values) {
    double sq = 0.0;
    for (double v : values) sq += v * v;
    EmbeddingVector out;
    if (sq > 0.0) {
        const double n = std::sqrt(sq);
        for (double& v : values) v /= n;
        double check = 0.0;
        for (double v : values) check += v * v;
        out.norm_ = std::sqrt(check);
    }
    out.values_ = std::move(values);
    return out;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.is_zero() || b.is_zero() || a.dim() != b.dim()) return 0.0;
    const auto av = a.values();
    const auto bv = b.values();
    double dot = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) dot += av[i] * bv[i];
    return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

EmbeddingVector Embedder::embed(std::string_view text) const {
    const std::string owned(text);
    auto out = embed_batch(std::span<const std::string>(&owned, 1));
    return std::move(out.at(0));
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> reference_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char raw : text) {
        char c = (raw >= 'A' && raw <= 'Z') ? static_cast<char>(raw - 'A' + 'a') : raw;
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            current.push_back(c);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

EmbeddingVector HashingEmbedder::embed_text(std::string_view text) const {
    std::vector<double> values(kReferenceDim, 0.0);
    for (const auto& token : reference_tokens(text)) {
        const std::uint64_t h = fnv1a64(token);
        values[h % kReferenceDim] += (h >> 63) == 0 ? 1.0 : -1.0;
    }
    return EmbeddingVector::normalized(std::move(values));
}

std::vector<EmbeddingVector> HashingEmbedder::embed_batch(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text(t));
    return out;
}

HttpEmbedder::HttpEmbedder(std::string endpoint_url, std::size_t expected_dim, int timeout_ms, int retries)
    : url_(std::move(endpoint_url)), dim_(expected_dim), timeout_ms_(timeout_ms), retries_(retries) {
    if (dim_ == 0) throw ArgumentError("embedder dimension must be positive");
    detail::parse_endpoint(url_);
}

std::vector<EmbeddingVector> HttpEmbedder::embed_batch(std::span<const std::string> texts) const {
    nlohmann::json request = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    const std::string body = detail::post_json(url_, request.dump(), timeout_ms_, retries_);
    std::vector<EmbeddingVector> out;
    try {
        auto reply = nlohmann::json::parse(body);
        const auto dim = reply.at("dim").get<std::size_t>();
        if (dim != dim_) {
            throw InputError("embedder returned dim " + std::to_string(dim) + ", expected " + std::to_string(dim_));
        }
        const auto& vectors = reply.at("vectors");
        if (vectors.size() != texts.size()) {
            throw InputError("embedder returned " + std::to_string(vectors.size()) + " vectors for " +
                             std::to_string(texts.size()) + " texts");
        }
        for (const auto& v : vectors) {
            auto values = v.get<std::vector<double>>();
            if (values.size() != dim_) {
                throw InputError("embedder vector has length " + std::to_string(values.size()) + ", declared dim " +
                                 std::to_string(dim_));
            }
            out.push_back(EmbeddingVector::normalized(std::move(values)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed embedder response: ") + e.what());
    }
    return out;
}

bool ranks_before(const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
}

VectorIndex::VectorIndex(std::shared_ptr<const Embedder> embedder) : embedder_(std::move(embedder)) {
    if (!embedder_) throw ArgumentError("VectorIndex needs an embedder");
}

void VectorIndex::add(IndexedDocument doc) {
    if (doc.vector.dim() != embedder_->dim()) {
        throw ArgumentError("document '" + doc.doc_id + "' has dim " + std::to_string(doc.vector.dim()) +
                            ", index expects " + std::to_string(embedder_->dim()));
    }
    std::unique_lock lock(mutex_);
    if (by_id_.contains(doc.doc_id)) throw ArgumentError("duplicate doc_id '" + doc.doc_id + "'");
    by_id_.emplace(doc.doc_id, docs_.size());
    docs_.push_back(std::move(doc));
}

void VectorIndex::add(std::string doc_id, std::string text) {
    EmbeddingVector v = embedder_->embed(text);
    add(IndexedDocument{std::move(doc_id), std::move(text), std::move(v)});
}

std::size_t VectorIndex::size() const {
    std::shared_lock lock(mutex_);
    return docs_.size();
}

RetrievedContext VectorIndex::search(std::string_view query, std::size_t k) const {
    if (k < 1) throw ArgumentError("k must be >= 1");
    return search_vector(embedder_->embed(query), std::string(query), k);
}

RetrievedContext VectorIndex::search_vector(const EmbeddingVector& query, std::string query_text, std::size_t k) const {
    if (k < 1) throw ArgumentError("k must be >= 1");
    std::shared_lock lock(mutex_);
    if (docs_.empty()) throw ArgumentError("search on an empty index");

    struct Scored {
        double score;
        std::size_t doc;
    };
    std::vector<Scored> scored;
    scored.reserve(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) scored.push_back({cosine(query, docs_[i].vector), i});

    auto better = [this](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return docs_[a.doc].doc_id < docs_[b.doc].doc_id;
    };
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);

    RetrievedContext ctx;
    ctx.query_text = std::move(query_text);
    ctx.k_requested = k;
    ctx.hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const auto& d = docs_[scored[i].doc];
        ctx.hits.push_back({d.doc_id, scored[i].score, d.text});
    }
    return ctx;
}

std::string render_document(const kb::FoodRecord& record) {
    std::string portions;
    for (const auto& [name, grams] : record.portion_weights) {
        if (!portions.empty()) portions += ", ";
        portions += name;
    }
    std::string out;
    for (std::string_view part : {std::string_view(record.name), std::string_view(record.category), std::string_view(portions)}) {
        part = text::trim(part);
        if (part.empty()) continue;
        if (!out.empty()) out += "; ";
        out += part;
    }
    return out;
}

std::unique_ptr<VectorIndex> build_index(const kb::KnowledgeBase& kb, std::shared_ptr<const Embedder> embedder) {
    auto index = std::make_unique<VectorIndex>(embedder);
    std::vector<std::string> texts;
    texts.reserve(kb.record_count());
    for (const auto& r : kb.records()) texts.push_back(render_document(r));
    auto vectors = embedder->embed_batch(texts);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        index->add(IndexedDocument{kb.records()[i].food_id, std::move(texts[i]), std::move(vectors[i])});
    }
    return index;
}

std::string rag_query_for(const parser::ParsedIngredient& ingredient) {
    return "nutrition facts for " + std::string(text::trim(ingredient.name));
}

std::string build_rag_query(std::span<const parser::ParsedIngredient> ingredients) {
    if (ingredients.empty()) throw ArgumentError("build_rag_query needs at least one ingredient");
    std::string out;
    for (const auto& item : ingredients) {
        if (!out.empty()) out += '\n';
        out += rag_query_for(item);
    }
    return out;
}

}  // namespace caloraify::retrieval
