#include "polydx/prompts.hpp"

#include "polydx/errors.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace polydx {
namespace {

constexpr const char* kToSoap = R"(You organize clinical case presentations into SOAP format.
Classify all extracted facts from the case presentation into the following categories:

**S - Subjective**
Patient-reported symptoms, complaints, history of present illness, medication use, and relevant negatives (e.g., "denies fever"). Include time-related info if mentioned.

**O - Objective**
Clinician-observed findings: physical exam results, lab/imaging findings, vital signs, and other measurable or observable data.

**A - Assessment**
If any differential diagnoses, impressions, or suspected conditions are mentioned in the text, extract them here; otherwise write Absent.

**P - Plan**
If the text includes management plans, tests ordered, treatments started, or follow-up instructions, include them here; otherwise write Absent.

Output the four sections with the headers "Subjective:", "Objective:", "Assessment:", "Plan:" and nothing else.

----------------------------------------

CASE PRESENTATION

----------------------------------------

{case}
)";

constexpr const char* kSoapDiagnosis = R"(Read the following structured case presentation and give the most likely diagnosis.

First, provide your internal reasoning for the diagnosis within the tags <think> ... </think>.

Finally, output the final diagnosis (just the name of the disease/entity) within the tags <answer> ... </answer>.
What are the top 10 most likely diagnoses? Be precise, listing one diagnosis per line, and try to cover many unique possibilities (at least 10).

----------------------------------------

CASE PRESENTATION (SOAP)

----------------------------------------

{soap}
)";

constexpr const char* kCaseDiagnosis = R"(Read the following case presentation and give the most likely diagnosis.

What are the top 10 most likely diagnoses? Be precise, listing one diagnosis per line, and try to cover many unique possibilities (at least 10).
Here are some reasoning examples:
{exemplars}

----------------------------------------

CASE PRESENTATION

----------------------------------------

{case}
)";

constexpr const char* kTraceDiagnosis = R"(Read the following case presentation and give the most likely diagnosis.

What are the top 10 most likely diagnoses? Be precise, listing one diagnosis per line, and try to cover many unique possibilities (at least 10).

Some possible disease-related symptoms are listed (optional to use).

{fragments}

----------------------------------------

CASE PRESENTATION

----------------------------------------

{case}
)";

constexpr const char* kWebPlan = R"(You are planning targeted web research to support the diagnosis of a clinical case.
Produce a short retrieval plan as a JSON object with fields:
  "queries": a list of search queries or URLs, one per step
  "tools": a list of the same length; each entry is one of "search", "navigate", "extract"
  "steps": the number of steps (at most {max_steps})
Return only the JSON object.

----------------------------------------

CASE PRESENTATION

----------------------------------------

{case}
)";

constexpr const char* kWebMemoryUpdate = R"(You maintain the evidence memory of a clinical web-research agent.
Fold the new finding into the memory: keep diagnostic clues and their sources, drop fluff, stay concise.
Return only the updated memory text.

EVIDENCE MEMORY (before step {step}):
{memory}

NEW FINDING:
{result}
)";

// The released prompt tables do not include this template; this is a local
// paraphrase and is overridable like every other entry.
constexpr const char* kWebDiagnosis = R"(Read the following case presentation and the evidence gathered from web research, and give the most likely diagnosis.

First, provide your internal reasoning for the diagnosis within the tags <think> ... </think>.

What are the top 10 most likely diagnoses? Be precise, listing one diagnosis per line, and try to cover many unique possibilities (at least 10).

WEB RESEARCH EVIDENCE

----------------------------------------

{memory}

----------------------------------------

CASE PRESENTATION

----------------------------------------

{case}
)";

constexpr const char* kIntegrateDifferential = R"(You are a medical reasoning expert. You are given a clinical case prompt along with diagnostic reasoning traces and suspected disease lists from four different medical reasoning systems.

Your task is to:

1. Carefully consider the case prompt.

2. Analyze and consolidate the reasoning traces from the four sources.

3. Based on the reasoning and the case details, produce:

   - A coherent and medically sound final reasoning trace.

   - A ranked list of suspected diseases, ordered by confidence (from highest to lowest), based on the degree of support across sources.

Provide the final reasoning trace within the tags <think> ... </think>, then output the ranked disease list, one diagnosis per line, each followed by a brief justification.

[Deep Search Reasoning Trace]

{web}

[SOAP Reasoning Trace]

{soap}

[RAG Reasoning Trace]

{trace}

[RAG Reasoning Trace]

{cases}

[Candidate Support Summary]

{votes}

----------------------------------------

CASE PRESENTATION

----------------------------------------

{case}
)";

constexpr const char* kJudgeEquivalence = R"(You are checking whether two diagnosis names refer to the same disease entity.

Predicted diagnosis: {predicted}
Reference diagnosis: {gold}

Do these refer to the same diagnosis? Reply with a single word, yes or no, within the tags <answer> ... </answer>.
)";

constexpr const char* kJudgeStepCoverage = R"(You are checking whether a model's diagnostic reasoning covers a reference reasoning step.

Reference step:
{step}

Model reasoning:
{reasoning}

Does the model reasoning cover the reference step (the same consideration, even if worded differently)? Reply with a single word, yes or no, within the tags <answer> ... </answer>.
)";

constexpr const char* kJudgeStepCoverageBatch = R"(You are checking whether a model's diagnostic reasoning covers each of the numbered reference reasoning steps.

Reference steps:
{steps}

Model reasoning:
{reasoning}

For each reference step, reply with one line of the form "N: yes" or "N: no".
)";

} // namespace

PromptCatalog::PromptCatalog() {
    templates_ = {
        {"to_soap", kToSoap},
        {"soap_diagnosis", kSoapDiagnosis},
        {"case_diagnosis", kCaseDiagnosis},
        {"trace_diagnosis", kTraceDiagnosis},
        {"web_plan", kWebPlan},
        {"web_memory_update", kWebMemoryUpdate},
        {"web_diagnosis", kWebDiagnosis},
        {"integrate_differential", kIntegrateDifferential},
        {"judge_equivalence", kJudgeEquivalence},
        {"judge_step_coverage", kJudgeStepCoverage},
        {"judge_step_coverage_batch", kJudgeStepCoverageBatch},
    };
}

const std::vector<std::string>& PromptCatalog::builtin_keys() {
    static const std::vector<std::string> keys = [] {
        PromptCatalog catalog;
        std::vector<std::string> out;
        for (const auto& [key, value] : catalog.templates_) out.push_back(key);
        return out;
    }();
    return keys;
}

const std::string& PromptCatalog::get(const std::string& key) const {
    auto it = templates_.find(key);
    if (it == templates_.end()) throw ConfigError("unknown prompt template: " + key);
    return it->second;
}

void PromptCatalog::set(const std::string& key, std::string text) {
    templates_[key] = std::move(text);
}

std::string PromptCatalog::render(const std::string& key,
                                  const std::map<std::string, std::string>& vars) const {
    std::string out = get(key);
    for (const auto& [name, value] : vars) {
        const std::string placeholder = "{" + name + "}";
        std::size_t pos = 0;
        while ((pos = out.find(placeholder, pos)) != std::string::npos) {
            out.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return out;
}

void PromptCatalog::load_overrides(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("prompt override directory not found: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path());
        if (!in) throw IoError("cannot read prompt override: " + entry.path().string());
        std::stringstream buffer;
        buffer << in.rdbuf();
        templates_[entry.path().stem().string()] = buffer.str();
    }
}

} // namespace polydx
