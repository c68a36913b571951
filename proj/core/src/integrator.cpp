#include "polydx/integrator.hpp"

#include "polydx/errors.hpp"
#include "polydx/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace polydx {

namespace {

// Seed synonym groups; the first surface form of a group is its canonical
// key. Deployments extend this with a synonyms file.
const std::vector<std::vector<std::string>> kSeedSynonyms = {
    {"myocardial infarction", "heart attack"},
    {"primary central nervous system lymphoma", "primary cns lymphoma", "pcnsl"},
    {"cerebrovascular accident", "stroke"},
    {"gastroesophageal reflux disease", "gerd", "acid reflux"},
};

} // namespace

SynonymTable::SynonymTable() {
    for (const auto& group : kSeedSynonyms) add_group(group);
}

void SynonymTable::add_group(const std::vector<std::string>& surface_forms) {
    if (surface_forms.empty()) return;
    auto key = normalize_disease_name(surface_forms.front());
    if (key.empty()) return;
    // Merge with an existing group when any member is already known.
    for (const auto& surface : surface_forms) {
        auto normalized = normalize_disease_name(surface);
        auto it = key_by_normalized_.find(normalized);
        if (it != key_by_normalized_.end()) {
            key = it->second;
            break;
        }
    }
    for (const auto& surface : surface_forms) {
        auto normalized = normalize_disease_name(surface);
        if (!normalized.empty()) key_by_normalized_[normalized] = key;
    }
}

void SynonymTable::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open synonyms file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> surfaces;
        std::stringstream parts(line);
        std::string part;
        while (std::getline(parts, part, '|')) {
            if (!part.empty()) surfaces.push_back(part);
        }
        add_group(surfaces);
    }
}

std::string SynonymTable::canonical_key(const std::string& normalized_name) const {
    auto it = key_by_normalized_.find(normalized_name);
    return it == key_by_normalized_.end() ? normalized_name : it->second;
}

std::vector<CandidateGroup> match_groups(const EvidenceBundle& bundle,
                                         const SynonymTable& synonyms) {
    std::vector<CandidateGroup> groups;
    std::map<std::string, std::size_t> index_by_key;

    for (auto source : EvidenceBundle::source_order()) {
        for (const auto& item : bundle.by_source(source).list.items) {
            auto key = synonyms.canonical_key(normalize_disease_name(item.name));
            if (key.empty()) continue;

            auto [it, inserted] = index_by_key.try_emplace(key, groups.size());
            if (inserted) {
                groups.push_back(CandidateGroup{});
                groups.back().key = key;
            }
            auto& group = groups[it->second];

            // One member per source: keep that source's best-ranked occurrence.
            auto member = std::find_if(group.members.begin(), group.members.end(),
                                       [&](const GroupMember& m) { return m.source == source; });
            if (member == group.members.end()) {
                group.members.push_back({source, item.rank, item.name});
            } else if (item.rank < member->rank) {
                member->rank = item.rank;
                member->surface = item.name;
            }
        }
    }

    for (auto& group : groups) {
        group.support = static_cast<int>(group.members.size());
        group.best_rank = group.members.front().rank;
        double rank_sum = 0.0;
        const GroupMember* best = &group.members.front();
        for (const auto& member : group.members) {
            rank_sum += member.rank;
            if (member.rank < best->rank) best = &member;
        }
        group.best_rank = best->rank;
        group.mean_rank = rank_sum / static_cast<double>(group.members.size());
        group.canonical = best->surface;
    }
    return groups;
}

DiseaseList simple_vote(const EvidenceBundle& bundle, const SynonymTable& synonyms,
                        std::size_t output_len) {
    auto groups = match_groups(bundle, synonyms);
    std::sort(groups.begin(), groups.end(), [](const CandidateGroup& a, const CandidateGroup& b) {
        if (a.support != b.support) return a.support > b.support;
        if (a.best_rank != b.best_rank) return a.best_rank < b.best_rank;
        if (a.mean_rank != b.mean_rank) return a.mean_rank < b.mean_rank;
        return a.key < b.key;
    });

    DiseaseList list;
    list.source = Source::Final;
    for (const auto& group : groups) {
        if (list.items.size() >= output_len) break;
        DiseaseCandidate candidate;
        candidate.name = group.canonical;
        candidate.rank = static_cast<int>(list.items.size()) + 1;
        std::string sources;
        for (const auto& member : group.members) {
            if (!sources.empty()) sources += ", ";
            sources += to_string(member.source);
            sources += " rank " + std::to_string(member.rank);
        }
        candidate.evidence =
            "support " + std::to_string(group.support) + "/4 (" + sources + ")";
        list.items.push_back(std::move(candidate));
    }
    return list;
}

std::string to_json(const FinalDiagnosis& diagnosis) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& item : diagnosis.ranked.items) {
        items.push_back({{"rank", item.rank}, {"name", item.name}, {"evidence", item.evidence}});
    }
    nlohmann::json j{{"strategy", diagnosis.strategy},
                     {"degraded", diagnosis.degraded},
                     {"reasoning", diagnosis.reasoning},
                     {"ranked", {{"source", to_string(diagnosis.ranked.source)}, {"items", items}}}};
    return j.dump(2);
}

FinalDiagnosis final_diagnosis_from_json(const std::string& json_text) {
    FinalDiagnosis diagnosis;
    try {
        auto j = nlohmann::json::parse(json_text);
        diagnosis.strategy = j.at("strategy").get<std::string>();
        diagnosis.degraded = j.at("degraded").get<bool>();
        diagnosis.reasoning = j.at("reasoning").get<std::string>();
        auto source = source_from_string(j.at("ranked").at("source").get<std::string>());
        diagnosis.ranked.source = source.value_or(Source::Final);
        for (const auto& item : j.at("ranked").at("items")) {
            diagnosis.ranked.items.push_back({item.at("name").get<std::string>(),
                                              item.at("rank").get<int>(),
                                              item.value("evidence", std::string{})});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad final diagnosis record: ") + e.what(), 0);
    }
    return diagnosis;
}

std::optional<Strategy> strategy_from_string(std::string_view name) {
    if (name == "vote") return Strategy::Vote;
    if (name == "differential") return Strategy::Differential;
    return std::nullopt;
}

const char* to_string(Strategy strategy) {
    return strategy == Strategy::Vote ? "vote" : "differential";
}

EvidenceIntegrator::EvidenceIntegrator(LlmGateway& gateway, const PromptCatalog& prompts,
                                       SynonymTable synonyms, CompletionRequest base_request,
                                       std::size_t output_len)
    : gateway_(gateway), prompts_(prompts), synonyms_(std::move(synonyms)),
      base_(std::move(base_request)), output_len_(output_len) {}

std::vector<CandidateGroup> EvidenceIntegrator::groups(const EvidenceBundle& bundle) const {
    return match_groups(bundle, synonyms_);
}

namespace {

std::string render_vote_summary(const std::vector<CandidateGroup>& groups) {
    if (groups.empty()) return "(no candidates)";
    std::string out;
    for (const auto& group : groups) {
        out += "- " + group.canonical + ": " + std::to_string(group.support) +
               " source(s), best rank " + std::to_string(group.best_rank) + "\n";
    }
    return out;
}

std::string render_source_block(const SourceResult& result) {
    if (result.failed()) return "[unavailable: " + result.failure + "]";
    std::string out = result.reasoning.empty() ? "(no reasoning reported)" : result.reasoning;
    out += "\n\nSuspected diseases:\n";
    out += result.list.empty() ? "(none)\n" : render_disease_list(result.list);
    return out;
}

} // namespace

FinalDiagnosis EvidenceIntegrator::vote(const EvidenceBundle& bundle) const {
    FinalDiagnosis diagnosis;
    diagnosis.strategy = "vote";
    diagnosis.ranked = simple_vote(bundle, synonyms_, output_len_);

    auto groups = match_groups(bundle, synonyms_);
    std::sort(groups.begin(), groups.end(), [](const CandidateGroup& a, const CandidateGroup& b) {
        if (a.support != b.support) return a.support > b.support;
        if (a.best_rank != b.best_rank) return a.best_rank < b.best_rank;
        if (a.mean_rank != b.mean_rank) return a.mean_rank < b.mean_rank;
        return a.key < b.key;
    });
    diagnosis.reasoning =
        "Candidates ranked by cross-source agreement: source support first, then best rank, "
        "then mean rank.\n" +
        render_vote_summary(groups);
    return diagnosis;
}

FinalDiagnosis EvidenceIntegrator::differential(const CaseReport& report,
                                                const EvidenceBundle& bundle,
                                                RunRecorder* recorder) {
    auto request = base_;
    request.prompt = prompts_.render(
        "integrate_differential",
        {{"web", render_source_block(bundle.web)},
         {"soap", render_source_block(bundle.soap)},
         {"trace", render_source_block(bundle.trace)},
         {"cases", render_source_block(bundle.cases)},
         {"votes", render_vote_summary(groups(bundle))},
         {"case", report.text}});
    auto response = gateway_.complete("integrate", request, recorder);

    try {
        auto parsed = parse_diagnosis_completion(response.text, Source::Final);
        FinalDiagnosis diagnosis;
        diagnosis.strategy = "differential";
        diagnosis.ranked = std::move(parsed.list);
        if (static_cast<std::size_t>(diagnosis.ranked.items.size()) > output_len_) {
            diagnosis.ranked.items.resize(output_len_);
        }
        diagnosis.reasoning = parsed.reasoning.empty()
                                  ? "(model supplied no explicit reasoning)"
                                  : std::move(parsed.reasoning);
        return diagnosis;
    } catch (const EmptyListError&) {
        if (recorder) {
            recorder->add_note("integrate: differential output unparsable, fell back to vote");
        }
        auto diagnosis = vote(bundle);
        diagnosis.strategy = "differential";
        diagnosis.degraded = true;
        return diagnosis;
    }
}

FinalDiagnosis EvidenceIntegrator::integrate(const CaseReport& report,
                                             const EvidenceBundle& bundle, Strategy strategy,
                                             RunRecorder* recorder) {
    if (strategy == Strategy::Vote) return vote(bundle);
    return differential(report, bundle, recorder);
}

} // namespace polydx
