#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace caloraify::eval {

/// Output of tokenize(): lowercase, whitespace-split, leading/trailing ASCII punctuation stripped,
/// empty tokens dropped.
using TokenSequence = std::vector<std::string>;

TokenSequence tokenize(std::string_view text);

enum class Scale { unit, percent };

struct MetricValue {
    std::string name;
    double value = 0.0;
    Scale scale = Scale::unit;
};

/// Weights of the aggregate score. The defaults reproduce both aggregate rows of the reference
/// baseline/fine-tune comparison (0.431 and 0.4662).
struct AggregateSpec {
    double lambda_rouge = 2.5;
    double lambda_bleu = 1.5;
};

// All F1 values below are computed as p = hits / |cand|, r = hits / |ref|,
// f1 = (p + r > 0) ? 2 * p * r / (p + r) : 0.

/// Clipped n-gram F1, n in {1, 2}. Throws ArgumentError for other n.
double rouge_n(const TokenSequence& candidate, const TokenSequence& reference, int n);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// LCS-based F1.
double rouge_l(const TokenSequence& candidate, const TokenSequence& reference);

/// Summary-level ROUGE-L: texts are split into sentences on '\n'; for every reference sentence the
/// union of its LCS alignments against all candidate sentences counts as hits, clipped by overall
/// token counts.
double rouge_lsum(std::string_view candidate_text, std::string_view reference_text);

/// Union-LCS hit count underlying rouge_lsum, over pre-tokenized sentences.
std::size_t summary_lcs_hits(std::span<const TokenSequence> candidate_sentences,
                             std::span<const TokenSequence> reference_sentences);

struct SequencePair {
    TokenSequence candidate;
    TokenSequence reference;
};

inline constexpr int kBleuMaxOrder = 4;
inline constexpr double kBleuZeroFloor = 1e-9;

struct BleuBreakdown {
    std::array<std::size_t, kBleuMaxOrder> clipped{};
    std::array<std::size_t, kBleuMaxOrder> totals{};
    std::array<double, kBleuMaxOrder> precisions{};
    std::size_t candidate_length = 0;
    std::size_t reference_length = 0;
    double brevity_penalty = 0.0;
    double bleu = 0.0;
};

/// Corpus BLEU with uniform weights over n = 1..4. A precision with zero clipped matches is floored
/// at 1e-9 before the log. Throws ArgumentError on an empty corpus.
BleuBreakdown corpus_bleu_breakdown(std::span<const SequencePair> pairs);
double corpus_bleu(std::span<const SequencePair> pairs);
/// Exactly 100 × corpus_bleu.
double scaled_bleu(std::span<const SequencePair> pairs);

/// Token encoder for BERTScore-style matching.
class TokenEmbedder {
public:
    virtual ~TokenEmbedder() = default;
    virtual std::vector<double> embed(std::string_view token) const = 0;
};

/// One basis vector per vocabulary type; unknown tokens map to the zero vector.
class OneHotTokenEmbedder final : public TokenEmbedder {
public:
    explicit OneHotTokenEmbedder(std::span<const TokenSequence> corpus);
    std::vector<double> embed(std::string_view token) const override;
    std::size_t vocabulary_size() const noexcept { return vocab_.size(); }

private:
    std::unordered_map<std::string, std::size_t> vocab_;
};

/// Feature-hashed token vectors (same hashing as the retrieval reference embedder).
class HashingTokenEmbedder final : public TokenEmbedder {
public:
    std::vector<double> embed(std::string_view token) const override;
};

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Greedy matching: precision averages, over candidate tokens, the best cosine against any reference
/// token; recall is symmetric. Identical token strings score 1 without consulting the embedder.
PrecisionRecallF1 bert_style_score(const TokenSequence& candidate, const TokenSequence& reference,
                                   const TokenEmbedder& embedder);

/// λ_rouge·rouge_l + λ_bleu·bleu.
double aggregate(double rouge_l, double bleu, const AggregateSpec& spec);

namespace metric {
inline constexpr std::string_view rouge1 = "rouge1";
inline constexpr std::string_view rouge2 = "rouge2";
inline constexpr std::string_view rougeL = "rougeL";
inline constexpr std::string_view rougeLsum = "rougeLsum";
inline constexpr std::string_view bleu = "bleu";
inline constexpr std::string_view scaled_bleu = "scaled_bleu";
inline constexpr std::string_view bertscore_p = "bertscore_precision";
inline constexpr std::string_view bertscore_r = "bertscore_recall";
inline constexpr std::string_view bertscore_f1 = "bertscore_f1";
inline constexpr std::string_view aggregate = "aggregate";
}  // namespace metric

struct MetricsReport {
    std::vector<MetricValue> metrics;
    std::size_t corpus_size = 0;
    AggregateSpec spec;

    /// Throws ArgumentError for an unknown metric name.
    double value(std::string_view name) const;
};

/// Line-aligned corpus evaluation. ROUGE and BERTScore-style values are per-pair means summed left to
/// right; BLEU is corpus-level. A literal "\n" inside a line marks a sentence break for ROUGE-Lsum.
/// Uses HashingTokenEmbedder when `embedder` is null. Throws InputError on mismatched line counts.
MetricsReport evaluate_corpus(std::span<const std::string> predictions, std::span<const std::string> references,
                              const AggregateSpec& spec = {}, const TokenEmbedder* embedder = nullptr);
MetricsReport evaluate_files(const std::string& prediction_path, const std::string& reference_path,
                             const AggregateSpec& spec = {});

/// Aligned text table, four decimals per value.
std::string render_table(const MetricsReport& report);

}  // namespace caloraify::eval
