#include "caloraify/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "caloraify/error.hpp"
#include "caloraify/retrieval.hpp"
#include "caloraify/text.hpp"

namespace caloraify::eval {

namespace {

bool is_ascii_punct(char c) {
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

double f1_score(double hits, double cand_total, double ref_total) {
    if (cand_total == 0.0 || ref_total == 0.0) return 0.0;
    const double p = hits / cand_total;
    const double r = hits / ref_total;
    return (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
}

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts ngram_counts(const TokenSequence& tokens, int n) {
    NgramCounts counts;
    const auto size = static_cast<int>(tokens.size());
    for (int i = 0; i + n <= size; ++i) {
        std::string key = tokens[i];
        for (int j = 1; j < n; ++j) {
            key += ' ';
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

std::size_t ngram_total(const TokenSequence& tokens, int n) {
    return tokens.size() >= static_cast<std::size_t>(n) ? tokens.size() - static_cast<std::size_t>(n) + 1 : 0;
}

std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
    std::size_t hits = 0;
    for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) hits += std::min(count, it->second);
    }
    return hits;
}

// Full LCS table, rows over `a`, columns over `b`.
std::vector<std::vector<std::size_t>> lcs_table(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
        }
    }
    return t;
}

// Indices into `ref` of one LCS, recovered with the usual backtrack preference (move left on a
// strict improvement, otherwise up).
std::vector<std::size_t> lcs_indices(std::span<const std::string> ref, std::span<const std::string> cand) {
    const auto t = lcs_table(ref, cand);
    std::vector<std::size_t> out;
    std::size_t i = ref.size(), j = cand.size();
    while (i > 0 && j > 0) {
        if (ref[i - 1] == cand[j - 1]) {
            out.push_back(i - 1);
            --i;
            --j;
        } else if (t[i][j - 1] > t[i - 1][j]) {
            --j;
        } else {
            --i;
        }
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<TokenSequence> sentences(std::string_view text) {
    std::vector<TokenSequence> out;
    for (const auto& line : text::split_lines(text)) {
        auto tokens = tokenize(line);
        if (!tokens.empty()) out.push_back(std::move(tokens));
    }
    return out;
}

double vector_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::string unescape_sentence_breaks(std::string_view line) {
    std::string out;
    out.reserve(line.size());
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && i + 1 < line.size() && line[i + 1] == 'n') {
            out.push_back('\n');
            ++i;
        } else {
            out.push_back(line[i]);
        }
    }
    return out;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text::split_lines(data);
}

}  // namespace

TokenSequence tokenize(std::string_view input) {
    TokenSequence out;
    for (auto raw : text::split_whitespace(input)) {
        while (!raw.empty() && is_ascii_punct(raw.front())) raw.remove_prefix(1);
        while (!raw.empty() && is_ascii_punct(raw.back())) raw.remove_suffix(1);
        if (!raw.empty()) out.push_back(text::to_lower(raw));
    }
    return out;
}

double rouge_n(const TokenSequence& candidate, const TokenSequence& reference, int n) {
    if (n != 1 && n != 2) throw ArgumentError("rouge_n supports n = 1 or 2");
    const std::size_t hits = clipped_overlap(ngram_counts(candidate, n), ngram_counts(reference, n));
    return f1_score(static_cast<double>(hits), static_cast<double>(ngram_total(candidate, n)),
                    static_cast<double>(ngram_total(reference, n)));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
    return f1_score(static_cast<double>(lcs_length(candidate, reference)), static_cast<double>(candidate.size()),
                    static_cast<double>(reference.size()));
}

std::size_t summary_lcs_hits(std::span<const TokenSequence> candidate_sentences,
                             std::span<const TokenSequence> reference_sentences) {
    std::unordered_map<std::string, std::size_t> cand_counts, ref_counts;
    for (const auto& s : candidate_sentences) {
        for (const auto& t : s) ++cand_counts[t];
    }
    for (const auto& s : reference_sentences) {
        for (const auto& t : s) ++ref_counts[t];
    }

    std::size_t hits = 0;
    for (const auto& ref : reference_sentences) {
        std::vector<std::size_t> union_idx;
        for (const auto& cand : candidate_sentences) {
            auto idx = lcs_indices(ref, cand);
            union_idx.insert(union_idx.end(), idx.begin(), idx.end());
        }
        std::sort(union_idx.begin(), union_idx.end());
        union_idx.erase(std::unique(union_idx.begin(), union_idx.end()), union_idx.end());
        for (std::size_t i : union_idx) {
            const std::string& token = ref[i];
            auto c = cand_counts.find(token);
            auto r = ref_counts.find(token);
            if (c != cand_counts.end() && r != ref_counts.end() && c->second > 0 && r->second > 0) {
                ++hits;
                --c->second;
                --r->second;
            }
        }
    }
    return hits;
}

double rouge_lsum(std::string_view candidate_text, std::string_view reference_text) {
    const auto cand = sentences(candidate_text);
    const auto ref = sentences(reference_text);
    std::size_t cand_total = 0, ref_total = 0;
    for (const auto& s : cand) cand_total += s.size();
    for (const auto& s : ref) ref_total += s.size();
    return f1_score(static_cast<double>(summary_lcs_hits(cand, ref)), static_cast<double>(cand_total),
                    static_cast<double>(ref_total));
}

BleuBreakdown corpus_bleu_breakdown(std::span<const SequencePair> pairs) {
    if (pairs.empty()) throw ArgumentError("corpus_bleu needs at least one pair");
    BleuBreakdown b;
    for (const auto& pair : pairs) {
        b.candidate_length += pair.candidate.size();
        b.reference_length += pair.reference.size();
        for (int n = 1; n <= kBleuMaxOrder; ++n) {
            b.clipped[n - 1] += clipped_overlap(ngram_counts(pair.candidate, n), ngram_counts(pair.reference, n));
            b.totals[n - 1] += ngram_total(pair.candidate, n);
        }
    }
    double log_sum = 0.0;
    for (int n = 0; n < kBleuMaxOrder; ++n) {
        b.precisions[n] = b.clipped[n] == 0 ? kBleuZeroFloor
                                            : static_cast<double>(b.clipped[n]) / static_cast<double>(b.totals[n]);
        log_sum += std::log(b.precisions[n]) / kBleuMaxOrder;
    }
    if (b.candidate_length == 0) {
        b.brevity_penalty = 0.0;
    } else if (b.candidate_length < b.reference_length) {
        b.brevity_penalty = std::exp(1.0 - static_cast<double>(b.reference_length) / static_cast<double>(b.candidate_length));
    } else {
        b.brevity_penalty = 1.0;
    }
    b.bleu = b.brevity_penalty * std::exp(log_sum);
    return b;
}

double corpus_bleu(std::span<const SequencePair> pairs) { return corpus_bleu_breakdown(pairs).bleu; }

double scaled_bleu(std::span<const SequencePair> pairs) { return 100.0 * corpus_bleu(pairs); }

OneHotTokenEmbedder::OneHotTokenEmbedder(std::span<const TokenSequence> corpus) {
    for (const auto& seq : corpus) {
        for (const auto& t : seq) vocab_.emplace(t, vocab_.size());
    }
}

std::vector<double> OneHotTokenEmbedder::embed(std::string_view token) const {
    std::vector<double> v(vocab_.size(), 0.0);
    if (auto it = vocab_.find(std::string(token)); it != vocab_.end()) v[it->second] = 1.0;
    return v;
}

std::vector<double> HashingTokenEmbedder::embed(std::string_view token) const {
    static const retrieval::HashingEmbedder hashing;
    const auto v = hashing.embed_text(token);
    return {v.values().begin(), v.values().end()};
}

PrecisionRecallF1 bert_style_score(const TokenSequence& candidate, const TokenSequence& reference,
                                   const TokenEmbedder& embedder) {
    if (candidate.empty() || reference.empty()) return {};
    std::vector<std::vector<double>> cand_vecs, ref_vecs;
    for (const auto& t : candidate) cand_vecs.push_back(embedder.embed(t));
    for (const auto& t : reference) ref_vecs.push_back(embedder.embed(t));

    std::vector<std::vector<double>> sim(candidate.size(), std::vector<double>(reference.size()));
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        for (std::size_t j = 0; j < reference.size(); ++j) {
            sim[i][j] = candidate[i] == reference[j] ? 1.0 : vector_cosine(cand_vecs[i], ref_vecs[j]);
        }
    }
    double p_sum = 0.0;
    for (std::size_t i = 0; i < candidate.size(); ++i) p_sum += *std::max_element(sim[i].begin(), sim[i].end());
    double r_sum = 0.0;
    for (std::size_t j = 0; j < reference.size(); ++j) {
        double best = sim[0][j];
        for (std::size_t i = 1; i < candidate.size(); ++i) best = std::max(best, sim[i][j]);
        r_sum += best;
    }
    PrecisionRecallF1 out;
    out.precision = p_sum / static_cast<double>(candidate.size());
    out.recall = r_sum / static_cast<double>(reference.size());
    out.f1 = (out.precision + out.recall > 0.0) ? 2.0 * out.precision * out.recall / (out.precision + out.recall) : 0.0;
    return out;
}

double aggregate(double rouge_l_value, double bleu_value, const AggregateSpec& spec) {
    return spec.lambda_rouge * rouge_l_value + spec.lambda_bleu * bleu_value;
}

double MetricsReport::value(std::string_view name) const {
    for (const auto& m : metrics) {
        if (m.name == name) return m.value;
    }
    throw ArgumentError("unknown metric '" + std::string(name) + "'");
}

MetricsReport evaluate_corpus(std::span<const std::string> predictions, std::span<const std::string> references,
                              const AggregateSpec& spec, const TokenEmbedder* embedder) {
    if (predictions.size() != references.size()) {
        throw InputError("prediction count " + std::to_string(predictions.size()) + " does not match reference count " +
                         std::to_string(references.size()));
    }
    if (predictions.empty()) throw InputError("cannot evaluate an empty corpus");
    static const HashingTokenEmbedder default_embedder;
    const TokenEmbedder& tokens_embedder = embedder ? *embedder : default_embedder;

    const std::size_t n = predictions.size();
    double r1 = 0.0, r2 = 0.0, rl = 0.0, rlsum = 0.0, bp = 0.0, br = 0.0, bf = 0.0;
    std::vector<SequencePair> pairs;
    pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string pred = unescape_sentence_breaks(predictions[i]);
        const std::string ref = unescape_sentence_breaks(references[i]);
        SequencePair pair{tokenize(pred), tokenize(ref)};
        r1 += rouge_n(pair.candidate, pair.reference, 1);
        r2 += rouge_n(pair.candidate, pair.reference, 2);
        rl += rouge_l(pair.candidate, pair.reference);
        rlsum += rouge_lsum(pred, ref);
        const auto bert = bert_style_score(pair.candidate, pair.reference, tokens_embedder);
        bp += bert.precision;
        br += bert.recall;
        bf += bert.f1;
        pairs.push_back(std::move(pair));
    }
    const double denom = static_cast<double>(n);
    const double bleu_value = corpus_bleu(pairs);

    MetricsReport report;
    report.corpus_size = n;
    report.spec = spec;
    report.metrics = {
        {std::string(metric::rouge1), r1 / denom, Scale::unit},
        {std::string(metric::rouge2), r2 / denom, Scale::unit},
        {std::string(metric::rougeL), rl / denom, Scale::unit},
        {std::string(metric::rougeLsum), rlsum / denom, Scale::unit},
        {std::string(metric::bleu), bleu_value, Scale::unit},
        {std::string(metric::scaled_bleu), 100.0 * bleu_value, Scale::percent},
        {std::string(metric::bertscore_p), bp / denom, Scale::unit},
        {std::string(metric::bertscore_r), br / denom, Scale::unit},
        {std::string(metric::bertscore_f1), bf / denom, Scale::unit},
        {std::string(metric::aggregate), aggregate(rl / denom, bleu_value, spec), Scale::unit},
    };
    return report;
}

MetricsReport evaluate_files(const std::string& prediction_path, const std::string& reference_path,
                             const AggregateSpec& spec) {
    const auto predictions = read_lines(prediction_path);
    const auto references = read_lines(reference_path);
    return evaluate_corpus(predictions, references, spec);
}

std::string render_table(const MetricsReport& report) {
    static const std::unordered_map<std::string_view, std::string_view> labels = {
        {metric::rouge1, "ROUGE-1"},          {metric::rouge2, "ROUGE-2"},
        {metric::rougeL, "ROUGE-L"},          {metric::rougeLsum, "ROUGE-Lsum"},
        {metric::bleu, "BLEU"},               {metric::scaled_bleu, "BLEU x100"},
        {metric::bertscore_p, "BERTScore (P)"}, {metric::bertscore_r, "BERTScore (R)"},
        {metric::bertscore_f1, "BERTScore (F1)"}, {metric::aggregate, "Aggregate Metrics"},
    };
    std::size_t width = 6;
    for (const auto& m : report.metrics) {
        auto it = labels.find(m.name);
        width = std::max(width, it == labels.end() ? m.name.size() : it->second.size());
    }
    auto pad = [width](std::string_view s) { return std::string(s) + std::string(width - s.size() + 2, ' '); };
    std::string out = pad("Metric") + "Value\n";
    for (const auto& m : report.metrics) {
        auto it = labels.find(m.name);
        out += pad(it == labels.end() ? std::string_view(m.name) : it->second) + text::format_fixed(m.value, 4) + '\n';
    }
    out += pad("pairs") + std::to_string(report.corpus_size) + '\n';
    return out;
}

}  // namespace caloraify::eval
