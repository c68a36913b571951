#pragma once

#include "polydx/types.hpp"

#include <string>
#include <vector>

namespace polydx {

/// Contents of the first <tag>...</tag> span. When the tag is absent the
/// whole input is returned with `missing_tag` set, so a non-conforming
/// completion still yields output.
struct TaggedSection {
    std::string text;
    bool missing_tag = false;
};

/// `tag` is a bare tag name without angle brackets.
TaggedSection extract_tagged_section(const std::string& text, const std::string& tag);

/// Extracts an ordered disease list from a raw completion. Accepts `N.`,
/// `N)`, `-` and `*` item prefixes; when no prefixed item exists anywhere,
/// falls back to treating each plain content line as one item. Trailing
/// text after a spaced dash (hyphen, en or em dash) or ": " on an item line
/// becomes the candidate's evidence. Ranks are assigned 1..n in extraction
/// order.
/// Throws EmptyListError when no parsable item is found.
DiseaseList parse_disease_list(const std::string& completion, Source source);

/// Renders a list back to a numbered block ("1. name - evidence").
/// parse_disease_list(render_disease_list(l)) preserves names and ranks for
/// lists with plain names.
std::string render_disease_list(const DiseaseList& list);

/// Deterministic, idempotent pre-normalization for candidate matching:
/// lowercases, collapses whitespace, strips parenthetical qualifiers and
/// terminal punctuation. Falls back to lowercase/collapse only when
/// stripping would leave nothing.
std::string normalize_disease_name(const std::string& name);

/// Lowercased alphanumeric tokens, split on everything else.
std::vector<std::string> tokenize(const std::string& text);

/// Splits a reasoning trace into numbered steps. Markers `N.` / `N)` are
/// recognized at line starts and inline after whitespace; when no marker is
/// found the text is split at sentence boundaries. Marker text is removed
/// from the segments; all other text is preserved in order.
std::vector<std::string> segment_trace(const std::string& reasoning);

/// Splits a diagnosis completion into the reasoning text and the disease
/// list. The reasoning is the first <think> span when present, otherwise
/// the prose before the first list item. The list is parsed from the text
/// outside the <think> span. Throws EmptyListError when no list parses.
struct DiagnosisCompletion {
    std::string reasoning;
    DiseaseList list;
};

DiagnosisCompletion parse_diagnosis_completion(const std::string& completion, Source source);

/// Whitespace-collapsed, trimmed copy (single spaces, no leading/trailing).
std::string collapse_whitespace(const std::string& text);

} // namespace polydx
