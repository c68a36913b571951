#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace polydx {

/// One clinical case to diagnose: the raw narrative plus optional gold labels.
struct CaseReport {
    std::string id;
    std::string text;
    std::string gold_reasoning; ///< empty = not provided
    std::string gold_diagnosis; ///< empty = not provided
};

/// Which evidence source produced a disease list.
enum class Source { Soap, Web, Case, Trace, Final };

const char* to_string(Source source);
std::optional<Source> source_from_string(std::string_view name);

/// A single suspected disease as emitted by a model, with its 1-based
/// position in the list and any trailing justification text.
struct DiseaseCandidate {
    std::string name;
    int rank = 1;
    std::string evidence;
};

/// An ordered list of suspected diseases from one source. Ranks are
/// consecutive 1..n.
struct DiseaseList {
    Source source = Source::Final;
    std::vector<DiseaseCandidate> items;

    bool empty() const { return items.empty(); }
    std::size_t size() const { return items.size(); }
};

/// Throws ConfigError if ranks are not consecutive 1..n or a name is blank.
void validate(const DiseaseList& list);

/// Outcome of one Stage-1 evidence source: the list, the reasoning text that
/// produced it, and a failure note when the source was disabled or failed
/// (in which case the list is empty).
struct SourceResult {
    DiseaseList list;
    std::string reasoning;
    std::string failure;

    bool failed() const { return !failure.empty(); }
};

/// The four Stage-1 results for one case. A source that was disabled or
/// failed is present as an explicit empty list with a failure note, never
/// omitted.
struct EvidenceBundle {
    SourceResult soap;
    SourceResult web;
    SourceResult cases;
    SourceResult trace;

    const SourceResult& by_source(Source source) const;
    SourceResult& by_source(Source source);

    /// Sources in bundle order (soap, web, case, trace).
    static const std::vector<Source>& source_order();

    std::size_t non_empty_sources() const;
};

/// JSON record for one disease list: {"source": ..., "items": [{rank, name,
/// evidence}]}.
std::string to_json(const DiseaseList& list);
DiseaseList disease_list_from_json(const std::string& json_text);

std::string to_json(const EvidenceBundle& bundle);

} // namespace polydx
