#pragma once

#include "polydx/gateway.hpp"
#include "polydx/prompts.hpp"
#include "polydx/types.hpp"

#include <cstddef>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace polydx {

/// One clinician-annotated corpus record: case text, reasoning trace, and
/// final diagnosis. Ingestion order defines corpus_index.
struct CorpusInstance {
    std::string case_text;
    std::string reasoning;
    std::string diagnosis;
    std::size_t corpus_index = 0;
};

/// Loads a line-delimited corpus file; one JSON object per line with string
/// fields `case`, `reasoning`, `diagnosis`. Throws IoError when the file is
/// missing and FormatError (with line number) on a malformed record. An
/// empty file yields an empty corpus.
std::vector<CorpusInstance> load_corpus(const std::string& path);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Okapi BM25 over tokenized documents. IDF uses the non-negative variant
/// ln((N - df + 0.5) / (df + 0.5) + 1). Repeated query terms contribute
/// once. Immutable after build; queries are pure.
class Bm25Index {
public:
    explicit Bm25Index(const std::vector<std::string>& documents, Bm25Params params = {});

    double score(const std::vector<std::string>& query_tokens, std::size_t doc_index) const;

    /// Document indices ordered by score descending, ties broken by
    /// ascending index. Returns min(k, size()) entries.
    std::vector<std::size_t> top_k(const std::vector<std::string>& query_tokens, std::size_t k) const;

    double idf(const std::string& term) const;
    std::size_t size() const { return doc_term_freq_.size(); }
    double average_doc_length() const { return avg_doc_length_; }
    std::size_t doc_length(std::size_t doc_index) const { return doc_length_[doc_index]; }
    const Bm25Params& params() const { return params_; }

private:
    Bm25Params params_;
    std::vector<std::unordered_map<std::string, int>> doc_term_freq_;
    std::vector<std::size_t> doc_length_;
    std::unordered_map<std::string, int> doc_freq_;
    double avg_doc_length_ = 0.0;
};

using EntitySet = std::set<std::string>;

/// |a n b| / |a u b|; 0 when both sets are empty so entity-free cases never
/// retrieve fragments.
double jaccard(const EntitySet& a, const EntitySet& b);

/// Pluggable biomedical entity extraction. Results are deduplicated and
/// normalized (lowercased, single-spaced).
class EntityExtractor {
public:
    virtual ~EntityExtractor() = default;
    virtual EntitySet extract(const std::string& text) const = 0;
};

/// Built-in extractor: longest-match tokenized scan against a term lexicon.
/// Ships with a seed biomedical list; user terms extend it.
class LexiconExtractor : public EntityExtractor {
public:
    /// Seed lexicon only.
    LexiconExtractor();
    /// Seed lexicon plus the given terms.
    explicit LexiconExtractor(const std::vector<std::string>& extra_terms);

    void add_term(const std::string& term);
    /// One term per line; '#' lines are comments. Throws IoError.
    void load_file(const std::string& path);

    EntitySet extract(const std::string& text) const override;
    std::size_t term_count() const;

private:
    // first token -> token sequences starting with it, longest first
    std::unordered_map<std::string, std::vector<std::vector<std::string>>> by_first_token_;
    std::size_t term_count_ = 0;
};

/// Client for a remote NER service: POST {"text": ...} to the endpoint,
/// response {"entities": [...]}. Throws ExtractorError when unreachable;
/// with a fallback configured the fallback extractor is used instead.
class RemoteNerExtractor : public EntityExtractor {
public:
    explicit RemoteNerExtractor(std::string endpoint,
                                std::shared_ptr<const EntityExtractor> fallback = nullptr);
    EntitySet extract(const std::string& text) const override;

private:
    std::string endpoint_;
    std::shared_ptr<const EntityExtractor> fallback_;
};

/// One numbered reasoning step of a corpus instance, with its entity set.
struct TraceSegment {
    std::size_t instance_index = 0; ///< i: corpus_index of the source instance
    std::size_t step_index = 0;     ///< j: 0-based step within the instance
    std::string text;
    EntitySet entities;
};

/// The ingested corpus with its whole-case BM25 index and the segmented,
/// entity-indexed trace store. Immutable after construction; safely shared
/// across concurrent Stage-1 tasks.
class CaseDatabase {
public:
    CaseDatabase(std::vector<CorpusInstance> corpus,
                 std::shared_ptr<const EntityExtractor> extractor, Bm25Params params = {});

    const std::vector<CorpusInstance>& corpus() const { return corpus_; }
    const Bm25Index& index() const { return index_; }
    const std::vector<TraceSegment>& segments() const { return segments_; }
    const EntityExtractor& extractor() const { return *extractor_; }

    /// Top-k whole cases by BM25 score, ties broken by ascending
    /// corpus_index. Fewer than k when the corpus is smaller.
    std::vector<CorpusInstance> topk_cases(const CaseReport& report, std::size_t k) const;

    /// Top-k trace segments by entity-set Jaccard similarity against the
    /// raw case text, ties broken by ascending (instance, step). Segments
    /// with similarity 0 are excluded even if k is not filled.
    std::vector<TraceSegment> topk_traces(const CaseReport& report, std::size_t k) const;

private:
    std::vector<CorpusInstance> corpus_;
    std::shared_ptr<const EntityExtractor> extractor_;
    Bm25Index index_;
    std::vector<TraceSegment> segments_;
};

/// Stage-1 sources #3 and #4: elicit a disease list from retrieved whole
/// cases or reasoning fragments.
class CaseDiagnoser {
public:
    CaseDiagnoser(LlmGateway& gateway, const PromptCatalog& prompts, CompletionRequest base_request,
                  std::size_t prompt_budget_chars = 48000);

    /// Renders the case-exemplar prompt. Exemplars that push the prompt
    /// over the budget are dropped from the tail (lowest-ranked first) with
    /// a truncation note. Zero exemplars is a valid call.
    SourceResult diagnose_with_cases(const CaseReport& report,
                                     const std::vector<CorpusInstance>& exemplars,
                                     RunRecorder* recorder);

    SourceResult diagnose_with_traces(const CaseReport& report,
                                      const std::vector<TraceSegment>& fragments,
                                      RunRecorder* recorder);

private:
    LlmGateway& gateway_;
    const PromptCatalog& prompts_;
    CompletionRequest base_;
    std::size_t prompt_budget_chars_;
};

} // namespace polydx
