#include "polydx/text.hpp"

#include "polydx/errors.hpp"

#include <algorithm>
#include <cctype>
#include <string_view>

namespace polydx {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool has_alpha(std::string_view s) {
    return std::any_of(s.begin(), s.end(),
                       [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; });
}

// Offset of the content after a list-item prefix ("N.", "N)", "-", "*"),
// or npos when the line is not an item. "N." directly followed by a digit
// is a decimal, not a marker.
std::size_t item_content_offset(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && is_space(line[i])) ++i;

    std::size_t d = i;
    while (d < line.size() && is_digit(line[d]) && d - i < 4) ++d;
    if (d > i && d - i <= 3 && d < line.size() && (line[d] == '.' || line[d] == ')')) {
        std::size_t after = d + 1;
        if (after >= line.size()) return after;
        if (is_space(line[after])) {
            while (after < line.size() && is_space(line[after])) ++after;
            return after;
        }
        if (!is_digit(line[after])) return after;
    }

    if (i + 1 < line.size() && (line[i] == '-' || line[i] == '*') && is_space(line[i + 1])) {
        std::size_t after = i + 2;
        while (after < line.size() && is_space(line[after])) ++after;
        return after;
    }
    return std::string_view::npos;
}

// Name/evidence separators, tried in order at each position.
const std::string_view kSeparators[] = {" - ", " \xE2\x80\x93 ", " \xE2\x80\x94 ", ": "};

DiseaseCandidate make_candidate(std::string_view content) {
    std::string name(content);
    std::string evidence;

    std::size_t best = std::string::npos;
    std::size_t sep_len = 0;
    for (auto sep : kSeparators) {
        auto pos = name.find(sep);
        if (pos != std::string::npos && pos < best) {
            best = pos;
            sep_len = sep.size();
        }
    }
    if (best != std::string::npos) {
        evidence = trim(std::string_view(name).substr(best + sep_len));
        name = trim(std::string_view(name).substr(0, best));
    } else {
        name = trim(name);
    }

    // strip paired markdown bold around the whole name
    while (name.size() >= 4 && name.starts_with("**") && name.ends_with("**")) {
        name = trim(std::string_view(name).substr(2, name.size() - 4));
    }

    DiseaseCandidate candidate;
    candidate.name = std::move(name);
    candidate.evidence = std::move(evidence);
    return candidate;
}

struct ParsedItems {
    std::vector<DiseaseCandidate> items;
    std::size_t first_item_offset = std::string::npos; ///< byte offset in the input
};

ParsedItems collect_items(const std::string& text) {
    ParsedItems out;
    std::vector<std::pair<std::size_t, std::string_view>> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        lines.emplace_back(start, std::string_view(text).substr(start, end - start));
        start = end + 1;
        if (start > text.size()) break;
    }

    for (auto [offset, line] : lines) {
        auto content = item_content_offset(line);
        if (content == std::string_view::npos) continue;
        auto candidate = make_candidate(line.substr(content));
        if (candidate.name.empty()) continue;
        if (out.items.empty()) out.first_item_offset = offset;
        candidate.rank = static_cast<int>(out.items.size()) + 1;
        out.items.push_back(std::move(candidate));
    }
    if (!out.items.empty()) return out;

    // No prefixed item anywhere: treat plain content lines as items. Tag
    // markup, header lines and punctuation-only lines are not disease names.
    for (auto [offset, line] : lines) {
        auto body = trim(line);
        if (body.empty() || body.front() == '<' || body.back() == ':' || !has_alpha(body)) continue;
        auto candidate = make_candidate(body);
        if (candidate.name.empty()) continue;
        if (out.items.empty()) out.first_item_offset = offset;
        candidate.rank = static_cast<int>(out.items.size()) + 1;
        out.items.push_back(std::move(candidate));
    }
    return out;
}

} // namespace

TaggedSection extract_tagged_section(const std::string& text, const std::string& tag) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    auto begin = text.find(open);
    if (begin != std::string::npos) {
        auto end = text.find(close, begin + open.size());
        if (end != std::string::npos) {
            return {text.substr(begin + open.size(), end - begin - open.size()), false};
        }
    }
    return {text, true};
}

DiseaseList parse_disease_list(const std::string& completion, Source source) {
    auto parsed = collect_items(completion);
    if (parsed.items.empty()) {
        throw EmptyListError("no disease list item found in completion");
    }
    DiseaseList list;
    list.source = source;
    list.items = std::move(parsed.items);
    return list;
}

std::string render_disease_list(const DiseaseList& list) {
    std::string out;
    for (const auto& item : list.items) {
        out += std::to_string(item.rank);
        out += ". ";
        out += item.name;
        if (!item.evidence.empty()) {
            out += " - ";
            out += item.evidence;
        }
        out += '\n';
    }
    return out;
}

std::string collapse_whitespace(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += c;
    }
    return out;
}

namespace {

std::string strip_parentheticals(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    int depth = 0;
    for (char c : s) {
        if (c == '(') {
            ++depth;
        } else if (c == ')') {
            if (depth > 0) --depth;
        } else if (depth == 0) {
            out += c;
        }
    }
    return out;
}

std::string strip_terminal_punct(std::string s) {
    while (!s.empty()) {
        char c = s.back();
        if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?') {
            s.pop_back();
        } else if (is_space(c)) {
            s.pop_back();
        } else {
            break;
        }
    }
    return s;
}

} // namespace

std::string normalize_disease_name(const std::string& name) {
    auto lowered = to_lower(name);
    auto stripped = strip_terminal_punct(collapse_whitespace(strip_parentheticals(lowered)));
    if (!stripped.empty()) return stripped;
    return collapse_whitespace(lowered);
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (is_alnum(c)) {
            current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

namespace {

// Positions of enumeration markers: "N." / "N)" with N up to 3 digits, at
// the text start or after whitespace, followed by whitespace.
struct Marker {
    std::size_t begin;
    std::size_t content;
};

std::vector<Marker> find_markers(const std::string& s) {
    std::vector<Marker> markers;
    for (std::size_t i = 0; i < s.size();) {
        if (i == 0 || is_space(s[i - 1])) {
            std::size_t d = i;
            while (d < s.size() && is_digit(s[d]) && d - i < 4) ++d;
            if (d > i && d - i <= 3 && d < s.size() && (s[d] == '.' || s[d] == ')')) {
                std::size_t after = d + 1;
                if (after < s.size() && is_space(s[after])) {
                    while (after < s.size() && is_space(s[after])) ++after;
                    markers.push_back({i, after});
                    i = after;
                    continue;
                }
            }
        }
        ++i;
    }
    return markers;
}

std::vector<std::string> split_sentences(const std::string& s) {
    std::vector<std::string> out;
    std::string current;
    for (std::size_t i = 0; i < s.size(); ++i) {
        current += s[i];
        char c = s[i];
        if ((c == '.' || c == '!' || c == '?') && i + 1 < s.size() && is_space(s[i + 1])) {
            auto piece = trim(current);
            if (!piece.empty()) out.push_back(std::move(piece));
            current.clear();
        }
    }
    auto piece = trim(current);
    if (!piece.empty()) out.push_back(std::move(piece));
    return out;
}

} // namespace

std::vector<std::string> segment_trace(const std::string& reasoning) {
    auto markers = find_markers(reasoning);
    if (markers.empty()) return split_sentences(reasoning);

    std::vector<std::string> segments;
    auto preamble = trim(std::string_view(reasoning).substr(0, markers.front().begin));
    if (!preamble.empty()) segments.push_back(std::move(preamble));

    for (std::size_t m = 0; m < markers.size(); ++m) {
        auto begin = markers[m].content;
        auto end = (m + 1 < markers.size()) ? markers[m + 1].begin : reasoning.size();
        auto piece = trim(std::string_view(reasoning).substr(begin, end - begin));
        if (!piece.empty()) segments.push_back(std::move(piece));
    }
    return segments;
}

DiagnosisCompletion parse_diagnosis_completion(const std::string& completion, Source source) {
    auto think = extract_tagged_section(completion, "think");

    std::string body = completion;
    if (!think.missing_tag) {
        const std::string open = "<think>";
        const std::string close = "</think>";
        auto begin = body.find(open);
        auto end = body.find(close, begin);
        body.erase(begin, end + close.size() - begin);
    }

    DiagnosisCompletion out;
    out.list = parse_disease_list(body, source);

    if (!think.missing_tag) {
        out.reasoning = trim(think.text);
    }
    if (out.reasoning.empty()) {
        auto parsed = collect_items(body);
        if (parsed.first_item_offset != std::string::npos && parsed.first_item_offset > 0) {
            out.reasoning = trim(std::string_view(body).substr(0, parsed.first_item_offset));
        }
    }
    return out;
}

} // namespace polydx
