#include "polydx/soap.hpp"

#include "polydx/errors.hpp"
#include "polydx/text.hpp"

#include <array>
#include <cctype>
#include <string_view>

namespace polydx {
namespace {

std::string trim_copy(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool iequals_prefix(std::string_view text, std::string_view word) {
    if (text.size() < word.size()) return false;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[i])) !=
            std::tolower(static_cast<unsigned char>(word[i]))) {
            return false;
        }
    }
    return true;
}

// Section headers: the full word ("Subjective", optionally decorated and
// followed by ':' or '-') or the single-letter "S:" form. Returns the
// section letter and the remainder of the line after the header.
struct Header {
    char kind;
    std::string rest;
};

std::optional<Header> match_header(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() &&
           (std::isspace(static_cast<unsigned char>(line[i])) || line[i] == '#' || line[i] == '*' ||
            line[i] == '-')) {
        ++i;
    }
    auto body = line.substr(i);
    if (body.empty()) return std::nullopt;

    static constexpr std::array<std::pair<std::string_view, char>, 4> kWords{
        {{"subjective", 'S'}, {"objective", 'O'}, {"assessment", 'A'}, {"plan", 'P'}}};
    for (auto [word, kind] : kWords) {
        if (!iequals_prefix(body, word)) continue;
        auto rest = body.substr(word.size());
        std::size_t j = 0;
        auto skip_decoration = [&] {
            while (j < rest.size() && (rest[j] == '*' || rest[j] == ' ' || rest[j] == '\t')) ++j;
        };
        skip_decoration();
        if (j < rest.size() && (rest[j] == ':' || rest[j] == '-')) {
            ++j;
            skip_decoration();
        } else if (j < rest.size()) {
            continue; // prose that merely starts with the section word
        }
        return Header{kind, trim_copy(rest.substr(j))};
    }

    char c = static_cast<char>(std::toupper(static_cast<unsigned char>(body[0])));
    if ((c == 'S' || c == 'O' || c == 'A' || c == 'P') && body.size() > 1 && body[1] == ':') {
        return Header{c, trim_copy(body.substr(2))};
    }
    return std::nullopt;
}

void append_section(std::string& section, const std::string& text) {
    if (text.empty()) return;
    if (!section.empty()) section += '\n';
    section += text;
}

} // namespace

std::string render_soap(const SoapRecord& record) {
    auto section = [](const std::optional<std::string>& text) {
        return text ? *text : std::string("[Absent]");
    };
    std::string out;
    out += "Subjective:\n" + record.subjective + "\n\n";
    out += "Objective:\n" + record.objective + "\n\n";
    out += "Assessment:\n" + section(record.assessment) + "\n\n";
    out += "Plan:\n" + section(record.plan) + "\n";
    return out;
}

SoapRecord parse_soap_sections(const std::string& completion) {
    SoapRecord record;
    std::string assessment, plan;
    bool seen_s = false, seen_o = false, seen_a = false, seen_p = false;

    char current = '\0';
    std::size_t start = 0;
    while (start <= completion.size()) {
        auto end = completion.find('\n', start);
        if (end == std::string::npos) end = completion.size();
        std::string_view line(completion.data() + start, end - start);

        if (auto header = match_header(line)) {
            current = header->kind;
            switch (current) {
            case 'S': seen_s = true; append_section(record.subjective, header->rest); break;
            case 'O': seen_o = true; append_section(record.objective, header->rest); break;
            case 'A': seen_a = true; append_section(assessment, header->rest); break;
            case 'P': seen_p = true; append_section(plan, header->rest); break;
            }
        } else if (current != '\0') {
            auto body = trim_copy(line);
            switch (current) {
            case 'S': append_section(record.subjective, body); break;
            case 'O': append_section(record.objective, body); break;
            case 'A': append_section(assessment, body); break;
            case 'P': append_section(plan, body); break;
            }
        }

        if (end == completion.size()) break;
        start = end + 1;
    }

    if (!seen_s && !seen_o) {
        throw StructuringError("completion contains no Subjective or Objective section");
    }
    if (seen_a && !assessment.empty()) record.assessment = assessment;
    if (seen_p && !plan.empty()) record.plan = plan;
    return record;
}

SoapStructurer::SoapStructurer(LlmGateway& gateway, const PromptCatalog& prompts,
                               CompletionRequest base_request)
    : gateway_(gateway), prompts_(prompts), base_(std::move(base_request)) {}

SoapRecord SoapStructurer::to_soap(const CaseReport& report, RunRecorder* recorder) {
    auto request = base_;
    request.prompt = prompts_.render("to_soap", {{"case", report.text}});
    auto response = gateway_.complete("soap", request, recorder);

    auto record = parse_soap_sections(response.text);
    // The source case carries no prior diagnosis or plan; mark both absent
    // whatever the completion said.
    record.assessment = std::nullopt;
    record.plan = std::nullopt;

    if (recorder) {
        if (record.subjective.empty()) recorder->add_note("soap: no subjective section parsed");
        if (record.objective.empty()) recorder->add_note("soap: no objective section parsed");
    }
    return record;
}

SourceResult SoapStructurer::diagnose_from_text(const std::string& structured_text,
                                                RunRecorder* recorder) {
    auto request = base_;
    request.prompt = prompts_.render("soap_diagnosis", {{"soap", structured_text}});
    auto response = gateway_.complete("soap", request, recorder);

    auto parsed = parse_diagnosis_completion(response.text, Source::Soap);
    SourceResult result;
    result.list = std::move(parsed.list);
    result.reasoning = std::move(parsed.reasoning);
    return result;
}

SourceResult SoapStructurer::diagnose_from_soap(const SoapRecord& record, RunRecorder* recorder) {
    return diagnose_from_text(render_soap(record), recorder);
}

SourceResult SoapStructurer::run(const CaseReport& report, bool bypass_structuring,
                                 RunRecorder* recorder) {
    if (bypass_structuring) {
        // Pre-structured input: skip the structuring call entirely.
        return diagnose_from_text(report.text, recorder);
    }
    return diagnose_from_soap(to_soap(report, recorder), recorder);
}

} // namespace polydx
