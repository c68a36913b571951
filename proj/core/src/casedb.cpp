#include "polydx/casedb.hpp"

#include "polydx/errors.hpp"
#include "polydx/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace polydx {

std::vector<CorpusInstance> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);

    std::vector<CorpusInstance> corpus;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("invalid corpus record: ") + e.what(), line_number);
        }
        if (!j.contains("case") || !j.contains("reasoning") || !j.contains("diagnosis")) {
            throw FormatError("corpus record must have case, reasoning and diagnosis fields",
                              line_number);
        }
        CorpusInstance instance;
        instance.case_text = j["case"].get<std::string>();
        instance.reasoning = j["reasoning"].get<std::string>();
        instance.diagnosis = j["diagnosis"].get<std::string>();
        if (instance.case_text.empty() || instance.reasoning.empty() ||
            instance.diagnosis.empty()) {
            throw FormatError("corpus record has an empty field", line_number);
        }
        instance.corpus_index = corpus.size();
        corpus.push_back(std::move(instance));
    }
    return corpus;
}

Bm25Index::Bm25Index(const std::vector<std::string>& documents, Bm25Params params)
    : params_(params) {
    doc_term_freq_.reserve(documents.size());
    doc_length_.reserve(documents.size());

    std::size_t total_length = 0;
    for (const auto& doc : documents) {
        auto tokens = tokenize(doc);
        std::unordered_map<std::string, int> freq;
        for (auto& token : tokens) ++freq[token];
        for (const auto& [term, count] : freq) ++doc_freq_[term];
        doc_length_.push_back(tokens.size());
        total_length += tokens.size();
        doc_term_freq_.push_back(std::move(freq));
    }
    avg_doc_length_ = documents.empty() ? 0.0 : static_cast<double>(total_length) / documents.size();
}

double Bm25Index::idf(const std::string& term) const {
    auto it = doc_freq_.find(term);
    double df = it == doc_freq_.end() ? 0.0 : static_cast<double>(it->second);
    double n = static_cast<double>(doc_term_freq_.size());
    return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double Bm25Index::score(const std::vector<std::string>& query_tokens, std::size_t doc_index) const {
    const auto& freq = doc_term_freq_.at(doc_index);
    const double len = static_cast<double>(doc_length_[doc_index]);
    const double norm =
        params_.k1 * (1.0 - params_.b + (avg_doc_length_ > 0.0
                                             ? params_.b * len / avg_doc_length_
                                             : 0.0));

    double total = 0.0;
    std::unordered_set<std::string> seen;
    for (const auto& term : query_tokens) {
        if (!seen.insert(term).second) continue;
        auto it = freq.find(term);
        if (it == freq.end()) continue;
        const double tf = static_cast<double>(it->second);
        total += idf(term) * tf * (params_.k1 + 1.0) / (tf + norm);
    }
    return total;
}

std::vector<std::size_t> Bm25Index::top_k(const std::vector<std::string>& query_tokens,
                                          std::size_t k) const {
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        scored.emplace_back(score(query_tokens, i), i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::size_t> out;
    out.reserve(std::min(k, scored.size()));
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].second);
    return out;
}

double jaccard(const EntitySet& a, const EntitySet& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t intersection = 0;
    for (const auto& entity : a) {
        if (b.count(entity)) ++intersection;
    }
    std::size_t union_size = a.size() + b.size() - intersection;
    return static_cast<double>(intersection) / static_cast<double>(union_size);
}

namespace {

// Seed biomedical term list for the built-in extractor. Deliberately small;
// deployments extend it with a lexicon file.
const char* const kSeedLexicon[] = {
    "fever", "cough", "productive cough", "chest pain", "dyspnea", "shortness of breath",
    "fatigue", "nausea", "vomiting", "diarrhea", "rash", "seizure", "syncope", "palpitations",
    "edema", "jaundice", "weight loss", "night sweats", "headache", "confusion", "weakness",
    "arm weakness", "numbness", "vision loss", "visual acuity", "diplopia", "ataxia",
    "dysmetria", "tremor", "aphasia", "dysarthria", "neck stiffness", "photophobia",
    "back pain", "abdominal pain", "fever of unknown origin", "hemoptysis", "hematuria",
    "lymphadenopathy", "splenomegaly", "hepatomegaly", "anemia", "leukocytosis",
    "thrombocytopenia", "pleocytosis", "csf pleocytosis", "elevated protein", "igg index",
    "hyponatremia", "hyperglycemia", "hypotension", "hypertension", "tachycardia",
    "bradycardia", "atrial fibrillation", "heart failure", "myocardial infarction",
    "heart attack", "pulmonary embolism", "venous thrombus", "deep vein thrombosis",
    "stroke", "embolic stroke", "brachial plexus", "nerve root", "cranial nerve palsy",
    "triceps reflex", "pinprick", "light touch", "muscle strength", "enhancing lesion",
    "dural thickening", "suprasellar lesion", "pineal region", "brain lesion", "mri", "ct",
    "lumbar puncture", "biopsy", "lymphoma", "carcinoma", "germinoma", "glioblastoma",
    "metastasis", "metastases", "thyroid nodule", "sarcoidosis", "neurosarcoidosis",
    "vasculitis", "meningitis", "tuberculosis", "histoplasmosis", "cryptococcosis",
    "pneumonia", "sepsis", "cirrhosis", "liver cirrhosis", "diabetes mellitus",
    "type 2 diabetes mellitus", "enoxaparin", "anticoagulation", "multiple sclerosis",
    "encephalitis", "autoimmune encephalitis",
};

} // namespace

LexiconExtractor::LexiconExtractor() {
    for (const char* term : kSeedLexicon) add_term(term);
}

LexiconExtractor::LexiconExtractor(const std::vector<std::string>& extra_terms)
    : LexiconExtractor() {
    for (const auto& term : extra_terms) add_term(term);
}

void LexiconExtractor::add_term(const std::string& term) {
    auto tokens = tokenize(term);
    if (tokens.empty()) return;
    auto& bucket = by_first_token_[tokens.front()];
    if (std::find(bucket.begin(), bucket.end(), tokens) != bucket.end()) return;
    bucket.push_back(std::move(tokens));
    std::sort(bucket.begin(), bucket.end(),
              [](const auto& a, const auto& b) { return a.size() > b.size(); });
    ++term_count_;
}

void LexiconExtractor::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lexicon file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        add_term(line);
    }
}

std::size_t LexiconExtractor::term_count() const { return term_count_; }

EntitySet LexiconExtractor::extract(const std::string& text) const {
    auto tokens = tokenize(text);
    EntitySet entities;
    std::size_t pos = 0;
    while (pos < tokens.size()) {
        auto it = by_first_token_.find(tokens[pos]);
        std::size_t advance = 1;
        if (it != by_first_token_.end()) {
            for (const auto& term_tokens : it->second) { // longest first
                if (pos + term_tokens.size() > tokens.size()) continue;
                if (std::equal(term_tokens.begin(), term_tokens.end(), tokens.begin() + pos)) {
                    std::string entity;
                    for (const auto& t : term_tokens) {
                        if (!entity.empty()) entity += ' ';
                        entity += t;
                    }
                    entities.insert(std::move(entity));
                    advance = term_tokens.size();
                    break;
                }
            }
        }
        pos += advance;
    }
    return entities;
}

RemoteNerExtractor::RemoteNerExtractor(std::string endpoint,
                                       std::shared_ptr<const EntityExtractor> fallback)
    : endpoint_(std::move(endpoint)), fallback_(std::move(fallback)) {
    if (endpoint_.empty()) throw ConfigError("remote NER endpoint is empty");
}

EntitySet RemoteNerExtractor::extract(const std::string& text) const {
    // endpoint is scheme://host[:port][/path]
    auto scheme_end = endpoint_.find("://");
    auto path_start = scheme_end == std::string::npos
                          ? endpoint_.find('/')
                          : endpoint_.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? endpoint_ : endpoint_.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(30, 0);
    nlohmann::json body{{"text", text}};
    auto result = client.Post(path, body.dump(), "application/json");

    if (!result || result->status != 200) {
        if (fallback_) return fallback_->extract(text);
        auto detail = result ? "status " + std::to_string(result->status)
                             : httplib::to_string(result.error());
        throw ExtractorError("NER service unreachable: " + detail);
    }
    EntitySet entities;
    try {
        auto j = nlohmann::json::parse(result->body);
        for (const auto& entity : j.at("entities")) {
            auto normalized = collapse_whitespace(entity.get<std::string>());
            std::transform(normalized.begin(), normalized.end(), normalized.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (!normalized.empty()) entities.insert(std::move(normalized));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ExtractorError(std::string("unexpected NER response shape: ") + e.what());
    }
    return entities;
}

CaseDatabase::CaseDatabase(std::vector<CorpusInstance> corpus,
                           std::shared_ptr<const EntityExtractor> extractor, Bm25Params params)
    : corpus_(std::move(corpus)), extractor_(std::move(extractor)),
      index_([&] {
          std::vector<std::string> docs;
          docs.reserve(corpus_.size());
          for (const auto& instance : corpus_) docs.push_back(instance.case_text);
          return Bm25Index(docs, params);
      }()) {
    if (!extractor_) throw ConfigError("case database requires an entity extractor");
    for (const auto& instance : corpus_) {
        auto steps = segment_trace(instance.reasoning);
        for (std::size_t j = 0; j < steps.size(); ++j) {
            TraceSegment segment;
            segment.instance_index = instance.corpus_index;
            segment.step_index = j;
            segment.entities = extractor_->extract(steps[j]);
            segment.text = std::move(steps[j]);
            segments_.push_back(std::move(segment));
        }
    }
}

std::vector<CorpusInstance> CaseDatabase::topk_cases(const CaseReport& report,
                                                     std::size_t k) const {
    auto query = tokenize(report.text);
    auto indices = index_.top_k(query, k);
    std::vector<CorpusInstance> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(corpus_[i]);
    return out;
}

std::vector<TraceSegment> CaseDatabase::topk_traces(const CaseReport& report,
                                                    std::size_t k) const {
    auto query_entities = extractor_->extract(report.text);

    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        double sim = jaccard(query_entities, segments_[i].entities);
        if (sim > 0.0) scored.emplace_back(sim, i);
    }
    std::sort(scored.begin(), scored.end(), [this](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        const auto& sa = segments_[a.second];
        const auto& sb = segments_[b.second];
        if (sa.instance_index != sb.instance_index) return sa.instance_index < sb.instance_index;
        return sa.step_index < sb.step_index;
    });

    std::vector<TraceSegment> out;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) {
        out.push_back(segments_[scored[i].second]);
    }
    return out;
}

CaseDiagnoser::CaseDiagnoser(LlmGateway& gateway, const PromptCatalog& prompts,
                             CompletionRequest base_request, std::size_t prompt_budget_chars)
    : gateway_(gateway), prompts_(prompts), base_(std::move(base_request)),
      prompt_budget_chars_(prompt_budget_chars) {}

namespace {

std::string render_exemplars(const std::vector<CorpusInstance>& exemplars) {
    std::string out;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        out += "Example " + std::to_string(i + 1) + ":\n";
        out += "Case: " + exemplars[i].case_text + "\n";
        out += "Reasoning: " + exemplars[i].reasoning + "\n";
        out += "Diagnosis: " + exemplars[i].diagnosis + "\n\n";
    }
    return out;
}

} // namespace

SourceResult CaseDiagnoser::diagnose_with_cases(const CaseReport& report,
                                                const std::vector<CorpusInstance>& exemplars,
                                                RunRecorder* recorder) {
    auto request = base_;
    auto kept = exemplars;
    request.prompt = prompts_.render(
        "case_diagnosis", {{"exemplars", render_exemplars(kept)}, {"case", report.text}});
    while (request.prompt.size() > prompt_budget_chars_ && !kept.empty()) {
        kept.pop_back(); // drop lowest-ranked first
        request.prompt = prompts_.render(
            "case_diagnosis", {{"exemplars", render_exemplars(kept)}, {"case", report.text}});
    }
    if (recorder && kept.size() < exemplars.size()) {
        recorder->add_note("case: dropped " + std::to_string(exemplars.size() - kept.size()) +
                           " exemplar(s) to fit the prompt budget");
    }

    auto response = gateway_.complete("case", request, recorder);
    auto parsed = parse_diagnosis_completion(response.text, Source::Case);
    return {std::move(parsed.list), std::move(parsed.reasoning), {}};
}

SourceResult CaseDiagnoser::diagnose_with_traces(const CaseReport& report,
                                                 const std::vector<TraceSegment>& fragments,
                                                 RunRecorder* recorder) {
    std::string rendered;
    for (const auto& fragment : fragments) {
        rendered += "- " + fragment.text + "\n";
    }

    auto request = base_;
    request.prompt =
        prompts_.render("trace_diagnosis", {{"fragments", rendered}, {"case", report.text}});

    auto response = gateway_.complete("trace", request, recorder);
    auto parsed = parse_diagnosis_completion(response.text, Source::Trace);
    return {std::move(parsed.list), std::move(parsed.reasoning), {}};
}

} // namespace polydx
