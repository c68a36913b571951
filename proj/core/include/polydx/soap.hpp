#pragma once

#include "polydx/gateway.hpp"
#include "polydx/prompts.hpp"
#include "polydx/types.hpp"

#include <optional>
#include <string>

namespace polydx {

/// SOAP-structured case. For pipeline-generated records Assessment and Plan
/// are explicitly absent (nullopt): the input case carries no prior
/// diagnosis or treatment plan.
struct SoapRecord {
    std::string subjective;
    std::string objective;
    std::optional<std::string> assessment;
    std::optional<std::string> plan;
};

/// Renders the record with section headers; absent sections show "[Absent]".
std::string render_soap(const SoapRecord& record);

/// Parses Subjective/Objective/Assessment/Plan sections from a structuring
/// completion. Headers match the full words or single-letter "S:/O:/A:/P:"
/// forms. Throws StructuringError when neither an S nor an O section is
/// found.
SoapRecord parse_soap_sections(const std::string& completion);

/// Stage-1 source #1: structure the case into SOAP, then elicit a disease
/// list from the structured record. Stateless given a gateway; safe to run
/// concurrently with the other sources.
class SoapStructurer {
public:
    SoapStructurer(LlmGateway& gateway, const PromptCatalog& prompts, CompletionRequest base_request);

    /// Issues the structuring prompt and parses the S/O/A/P sections.
    /// Assessment and Plan are forced absent regardless of the completion.
    SoapRecord to_soap(const CaseReport& report, RunRecorder* recorder);

    /// Issues the diagnosis prompt with the rendered record; the <think>
    /// span is retained as the source reasoning.
    SourceResult diagnose_from_soap(const SoapRecord& record, RunRecorder* recorder);

    /// Full source run. With `bypass_structuring` (pre-structured inputs)
    /// the structuring call is skipped and the raw case text is used
    /// directly in the diagnosis prompt.
    SourceResult run(const CaseReport& report, bool bypass_structuring, RunRecorder* recorder);

private:
    SourceResult diagnose_from_text(const std::string& structured_text, RunRecorder* recorder);

    LlmGateway& gateway_;
    const PromptCatalog& prompts_;
    CompletionRequest base_;
};

} // namespace polydx
