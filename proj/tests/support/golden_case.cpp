#include "golden_case.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace polydx::testfix {

const char* const kCaseText =
    "A 70-year-old woman with atrial fibrillation on enoxaparin, liver cirrhosis, type 2 "
    "diabetes mellitus, hypertension, and a history of venous thrombus presented with a 5-day "
    "history of left arm weakness, numbness in the left fourth and fifth digits and medial "
    "palmar surface, and confusion. She reported chronic vision loss in the right eye but "
    "denied headache or trauma. On examination, she was alert; oriented to person, place, and "
    "time; and disoriented to situation. Visual acuity was reduced in the right eye. Muscle "
    "strength was 4/5 in the left triceps, wrist flexors, wrist extensors, and finger flexors, "
    "and 3/5 in the left finger extensors. The left triceps reflex was absent. Sensation to "
    "pinprick and light touch was decreased in the left fourth and fifth digits. There was no "
    "dysmetria or dysdiadokokinesia. Head CT showed a hyperdense suprasellar lesion. MRI "
    "revealed enhancing lesions in the suprasellar, pineal, and right periatrial regions with "
    "interval enlargement and dural thickening. CT of the chest, abdomen, and pelvis "
    "demonstrated multiple thyroid nodules concerning for metastases. CSF studies from two "
    "lumbar punctures demonstrated lymphocytic pleocytosis, elevated protein, and an elevated "
    "IgG index without malignant cells or infectious markers.";

const char* const kGoldDiagnosis = "Primary central nervous system lymphoma";

const char* const kGoldReasoning =
    "1. Embolic stroke was considered given her atrial fibrillation and diabetes but felt less "
    "likely given the specific patterns of sensory loss in the left upper extremity and loss "
    "of the left triceps reflex, which were more suggestive of nerve root or brachial plexus "
    "pathology. 2. A lateralized mass in the extradural or intradural extramedullary spinal "
    "canal and idiopathic brachial neuritis were considered given her focal arm findings. 3. "
    "Leptomeningeal metastases from carcinoma or lymphoma were considered after cranial nerve "
    "involvement. 4. Primary central nervous system lymphoma was considered due to the "
    "patient's age and the multifocal nature of her symptoms. 5. Tuberculosis, histoplasmosis, "
    "coccidioidomycosis, and cryptococcosis were considered among infectious etiologies. 6. "
    "Sarcoidosis was considered among inflammatory causes. 7. Neurolymphomatosis of the "
    "brachial plexus was considered but not supported by gadolinium-enhanced brachial plexus "
    "and spine MRI. 8. Metastatic thyroid carcinoma was considered given multiple thyroid "
    "nodules on CT concerning for metastases. 9. Leptomeningeal dissemination and infection "
    "were less likely after CSF studies demonstrated lymphocytic pleocytosis, elevated "
    "protein, and elevated IgG index but neither malignant cells nor other inflammatory and "
    "infectious markers.";

namespace {

std::string numbered(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        out += std::to_string(i + 1) + ". " + names[i] + "\n";
    }
    return out;
}

} // namespace

const std::vector<std::string>& soap_list() {
    static const std::vector<std::string> names{
        "Intracranial Germinoma",
        "Metastatic Carcinoma (e.g., from thyroid, lung, or breast primary)",
        "Primary Central Nervous System Lymphoma",
        "Neurosarcoidosis",
        "Leptomeningeal Carcinomatosis",
        "Multiple Sclerosis",
        "Autoimmune Encephalitis (e.g., anti-NMDA receptor encephalitis)",
        "Cerebral Vasculitis (e.g., primary angiitis of the CNS)",
        "Infectious Meningoencephalitis (e.g., viral, fungal, or tuberculous)",
        "Paraneoplastic Neurological Syndrome",
    };
    return names;
}

const std::vector<std::string>& web_list() {
    static const std::vector<std::string> names{
        "Carcinomatous meningitis",
        "Metastatic brain disease (e.g., from thyroid, lung, or breast primary)",
        "Primary CNS lymphoma",
        "Neurosarcoidosis",
        "Chronic meningitis of unknown etiology",
        "Lymphomatous meningitis",
        "Tuberculous meningitis",
        "Fungal meningitis",
        "Autoimmune encephalitis",
        "Vasculitis of the central nervous system",
    };
    return names;
}

const std::vector<std::string>& case_list() {
    static const std::vector<std::string> names{
        "Metastatic disease",
        "Primary central nervous system lymphoma",
        "Neurosarcoidosis",
        "Tuberculous meningitis",
        "Fungal meningitis",
        "Leptomeningeal carcinomatosis",
        "Glioblastoma multiforme",
        "Inflammatory pseudotumor",
        "IgG4-related disease",
        "Atrial myxoma with cerebral metastases",
    };
    return names;
}

const std::vector<std::string>& trace_list() {
    static const std::vector<std::string> names{
        "Primary central nervous system lymphoma",
        "Metastatic disease (e.g., from thyroid carcinoma)",
        "Germ cell tumor (e.g., germinoma)",
        "Neurosarcoidosis",
        "Meningiomatosis or multiple meningiomas",
        "Tuberculosis or other chronic infectious meningitis",
        "Demyelinating disease (e.g., multiple sclerosis)",
        "Vascular malformation or aneurysm",
        "Pineal parenchymal tumor (e.g., pineocytoma or pineoblastoma)",
        "Leptomeningeal carcinomatosis from occult primary",
    };
    return names;
}

const std::vector<std::string>& final_list() {
    static const std::vector<std::string> names{
        "Primary central nervous system lymphoma",
        "Neurosarcoidosis",
        "Metastatic brain disease (e.g., from thyroid or unknown primary)",
        "Carcinomatous meningitis",
        "Germ cell tumor (e.g., germinoma)",
        "IgG4-related disease",
        "Tuberculous meningitis",
        "Fungal meningitis",
        "Leptomeningeal carcinomatosis",
        "Autoimmune encephalitis",
    };
    return names;
}

CaseReport golden_case() {
    CaseReport report;
    report.id = "golden-cns";
    report.text = kCaseText;
    report.gold_diagnosis = kGoldDiagnosis;
    report.gold_reasoning = kGoldReasoning;
    return report;
}

std::string soap_structuring_completion() {
    return "Subjective:\n"
           "A 70-year-old woman with atrial fibrillation on enoxaparin, liver cirrhosis, type 2 "
           "diabetes mellitus, hypertension, and a history of venous thrombus presented with a "
           "5-day history of left arm weakness, numbness in the left fourth and fifth digits "
           "and medial palmar surface, and confusion. She reported chronic vision loss in the "
           "right eye but denied headache or trauma.\n\n"
           "Objective:\n"
           "Alert; oriented to person, place, and time; disoriented to situation. Visual acuity "
           "reduced in the right eye. Muscle strength 4/5 in the left triceps, wrist flexors, "
           "wrist extensors, and finger flexors, 3/5 in the left finger extensors. Left triceps "
           "reflex absent. Sensation to pinprick and light touch decreased in the left fourth "
           "and fifth digits. No dysmetria or dysdiadokokinesia. Head CT: hyperdense "
           "suprasellar lesion. MRI: enhancing lesions in the suprasellar, pineal, and right "
           "periatrial regions with interval enlargement and dural thickening. Chest/abdomen/"
           "pelvis CT: multiple thyroid nodules concerning for metastases. CSF: lymphocytic "
           "pleocytosis, elevated protein, elevated IgG index; no malignant cells or infectious "
           "markers.\n\n"
           "Assessment:\nAbsent\n\n"
           "Plan:\nAbsent\n";
}

std::string soap_diagnosis_completion() {
    return "<think>The patient presents with multifocal neurological deficits, including left "
           "arm weakness and numbness, confusion, and progressive cranial findings. Imaging "
           "reveals lesions in characteristic locations such as the suprasellar and pineal "
           "regions, which are common sites for germ cell tumors like germinoma. The CSF shows "
           "inflammatory changes without evidence of infection or malignancy. However, the "
           "patient's age of 70 is atypical for germinoma. Alternative considerations include "
           "metastatic cancer given the thyroid nodules suspicious for metastases, primary CNS "
           "lymphoma, or neurosarcoidosis. The dural thickening and multifocal enhancing "
           "lesions favor a neoplastic process.</think>\n" +
           numbered(soap_list()) + "<answer>Intracranial Germinoma</answer>\n";
}

std::string web_plan_completion() {
    return R"({
  "queries": [
    "cns lymphoma differential multifocal enhancing lesions elderly",
    "https://pubmed.ncbi.nlm.nih.gov/123456/",
    "https://huggingface.co/datasets/clinical-cases",
    "https://neurology-reference.example.org/cns-lymphoma",
    "csf findings igg index lymphoma"
  ],
  "tools": ["search", "navigate", "navigate", "navigate", "extract"],
  "steps": 5
})";
}

namespace {

// Distinct phrases keying the three memory updates; the memory completions
// paraphrase so a later prompt never re-matches an earlier key.
constexpr const char* kSearchKeyPhrase = "raise primary CNS lymphoma";
constexpr const char* kPageKeyPhrase = "cytology is frequently negative";
constexpr const char* kPassageKeyPhrase = "favors primary CNS lymphoma over carcinomatous";

std::string memory_after_search() {
    return "Search: multifocal enhancing lesions with dural involvement in an older adult point "
           "to primary CNS lymphoma, metastatic disease, or neurosarcoidosis.";
}

std::string memory_after_page() {
    return memory_after_search() +
           " Reference page: PCNSL peaks after age 60; CSF shows lymphocytic pleocytosis with "
           "an elevated IgG index and often negative cytology; leading mimics are carcinomatous "
           "meningitis and neurosarcoidosis.";
}

std::string memory_after_extract() {
    return memory_after_page() +
           " Extracted: an elevated IgG index with negative cytology points away from "
           "carcinomatous meningitis and toward PCNSL.";
}

} // namespace

std::string web_diagnosis_completion() {
    return "<think>The case involves a 70-year-old woman with a history of atrial fibrillation "
           "on enoxaparin, liver cirrhosis, type 2 diabetes mellitus, hypertension, and venous "
           "thrombus. She presented with acute neurological symptoms and imaging showed "
           "enhancing lesions in suprasellar, pineal, and periatrial regions with dural "
           "thickening. CSF analysis indicated lymphocytic pleocytosis, elevated protein, and "
           "elevated IgG index without malignant cells. This clinical picture is highly "
           "suggestive of a neoplastic process with CNS involvement, most likely carcinomatous "
           "meningitis given the multifocal neurological signs, CSF findings, and possible "
           "primary malignancy. Alternative diagnoses include metastatic disease, lymphoma, or "
           "inflammatory disorders.</think>\n" +
           numbered(web_list());
}

std::string case_diagnosis_completion() {
    return "<think>1. Pituitary adenoma - considered due to the suprasellar lesion on CT, but "
           "the multifocal nature and rapid progression argue against a typical adenoma. 2. "
           "Meningioma - the dural thickening could suggest meningioma, but multifocal "
           "heterogeneously enhancing lesions with rapid growth are atypical. 3. Metastatic "
           "disease - highly likely given the thyroid nodules concerning for metastases and "
           "multiple brain lesions; however, no primary was confirmed and CSF lacked malignant "
           "cells. 4. Lymphoma - primary CNS lymphoma can present with multifocal enhancing "
           "lesions and CSF pleocytosis. 5. Neurosarcoidosis - could explain multifocal lesions "
           "and CSF findings.</think>\n" +
           numbered(case_list());
}

std::string trace_diagnosis_completion() {
    return "<think>The patient is a 70-year-old woman with multiple intracranial enhancing "
           "lesions in the suprasellar, pineal, and right periatrial regions, along with dural "
           "thickening. The CSF findings show lymphocytic pleocytosis, elevated protein, and an "
           "elevated IgG index, indicative of an inflammatory or neoplastic process. The "
           "neurological symptoms and lesion progression strongly suggest a neoplastic "
           "etiology. Primary CNS lymphoma is the leading consideration due to its propensity "
           "for multifocal enhancing lesions, CSF abnormalities, and occurrence in older "
           "adults. The thyroid nodules might represent a primary source, but brain metastases "
           "from thyroid cancer are rare and typically not in these locations.</think>\n" +
           numbered(trace_list());
}

std::string integrate_completion() {
    const auto& names = final_list();
    const std::vector<std::string> justifications{
        "strongest support across all four sources; multifocal enhancing lesions, CSF "
        "pleocytosis, and elevated IgG index in an older adult fit best",
        "well supported by cranial nerve involvement, dural lesions, and the elevated IgG index",
        "plausible given the thyroid nodules, but no confirmed primary and negative CSF cytology",
        "consistent with multifocal signs but weakened by repeatedly negative cytology",
        "suprasellar and pineal locations fit, but the patient's age is atypical",
        "could account for dural thickening, though systemic correlates are missing",
        "less likely with negative infectious markers",
        "less likely with negative infectious markers and no immunocompromise",
        "possible but cytology was negative on two punctures",
        "inflammatory CSF fits, but the aggressive course favors a neoplasm",
    };
    std::string items;
    for (std::size_t i = 0; i < names.size(); ++i) {
        items += std::to_string(i + 1) + ". " + names[i] + " - " + justifications[i] + "\n";
    }
    return "<think>After consolidating the reasoning traces from the four sources, several key "
           "points emerge. The multifocal CNS lesions, rapid progression, and CSF abnormalities "
           "strongly suggest an aggressive neoplastic or inflammatory process. Primary CNS "
           "lymphoma is highly supported due to its typical presentation with multifocal "
           "enhancing lesions, CSF pleocytosis, elevated IgG index, and occurrence in older "
           "adults; the lack of malignant cells in CSF does not rule it out, as cytology can be "
           "negative. Neurosarcoidosis is also well supported given the cranial nerve "
           "involvement, dural lesions, and elevated IgG index. Metastatic disease is plausible "
           "due to the thyroid nodules and brain lesions, but the absence of a confirmed "
           "primary and negative CSF cytology reduces its likelihood. Infectious etiologies are "
           "less likely with negative markers. Based on the degree of support across sources "
           "and medical plausibility, primary CNS lymphoma is the most likely diagnosis, "
           "followed by neurosarcoidosis.</think>\n" +
           items;
}

std::vector<MockEntry> golden_script() {
    std::vector<MockEntry> script;
    auto on = [&script](std::string pattern, std::string completion) {
        MockEntry entry;
        entry.pattern = std::move(pattern);
        entry.completion = std::move(completion);
        script.push_back(std::move(entry));
    };

    // Order matters: composite prompts (integration, web diagnosis) are
    // matched before the entries whose keys they may embed.
    on("[Deep Search Reasoning Trace]", integrate_completion());
    on("Classify all extracted facts", soap_structuring_completion());
    on("Produce a short retrieval plan", web_plan_completion());
    on("WEB RESEARCH EVIDENCE", web_diagnosis_completion());
    on(kPassageKeyPhrase, memory_after_extract());
    on(kPageKeyPhrase, memory_after_page());
    on(kSearchKeyPhrase, memory_after_search());
    on("CASE PRESENTATION (SOAP)", soap_diagnosis_completion());
    on("Here are some reasoning examples:", case_diagnosis_completion());
    on("Some possible disease-related symptoms are listed", trace_diagnosis_completion());
    return script;
}

std::shared_ptr<ScriptedMockClient> golden_client() {
    auto client = std::make_shared<ScriptedMockClient>();
    for (auto& entry : golden_script()) client->add(std::move(entry));
    return client;
}

std::vector<CorpusInstance> golden_corpus() {
    std::vector<CorpusInstance> corpus;
    auto add = [&corpus](std::string case_text, std::string reasoning, std::string diagnosis) {
        CorpusInstance instance;
        instance.case_text = std::move(case_text);
        instance.reasoning = std::move(reasoning);
        instance.diagnosis = std::move(diagnosis);
        instance.corpus_index = corpus.size();
        corpus.push_back(std::move(instance));
    };

    add("A 68-year-old man presented with confusion, progressive left arm weakness, and vision "
        "loss. MRI showed multifocal enhancing lesions with dural thickening; CSF studies "
        "demonstrated lymphocytic pleocytosis and an elevated IgG index without malignant "
        "cells.",
        "1. Embolic stroke was considered given atrial fibrillation but the multifocal "
        "enhancing lesions argued against it. 2. Primary central nervous system lymphoma was "
        "favored given the age, confusion, and CSF lymphocytic pleocytosis with an elevated "
        "IgG index. 3. Neurosarcoidosis remained possible given the dural thickening.",
        "Primary central nervous system lymphoma");

    add("A 59-year-old woman with fever, productive cough, and chest pain. Examination showed "
        "tachycardia; imaging demonstrated a lobar consolidation.",
        "1. Community-acquired pneumonia was considered first given fever and productive "
        "cough. 2. Pulmonary embolism was considered given tachycardia and chest pain but no "
        "risk factors were present.",
        "Pneumonia");

    add("A 72-year-old man with weight loss, night sweats, and lymphadenopathy. CT "
        "demonstrated thyroid nodules and mediastinal adenopathy.",
        "1. Systemic lymphoma was considered given weight loss, night sweats, and "
        "lymphadenopathy. 2. Metastatic carcinoma from a thyroid primary was considered given "
        "the thyroid nodules.",
        "Systemic lymphoma");

    return corpus;
}

std::string golden_corpus_jsonl() {
    std::string out;
    for (const auto& instance : golden_corpus()) {
        nlohmann::json j{{"case", instance.case_text},
                         {"reasoning", instance.reasoning},
                         {"diagnosis", instance.diagnosis}};
        out += j.dump() + "\n";
    }
    return out;
}

void write_golden_web_fixtures(const std::string& dir) {
    RecordedWebBackend backend(dir);

    backend.store_search(
        "cns lymphoma differential multifocal enhancing lesions elderly",
        {{"CNS Lymphoma Differential Overview",
          "https://neurology-reference.example.org/cns-lymphoma",
          "Multifocal enhancing lesions with dural involvement in older adults raise primary "
          "CNS lymphoma, metastases, and neurosarcoidosis."},
         {"Archived benchmark mirror", "https://huggingface.co/datasets/mirror",
          "Benchmark case collections with annotated diagnoses."}});

    backend.store_navigate(
        "https://neurology-reference.example.org/cns-lymphoma",
        "Primary CNS lymphoma typically presents in patients over 60 with multifocal "
        "periventricular or dural-based enhancing lesions. CSF shows lymphocytic pleocytosis "
        "with an elevated IgG index; cytology is frequently negative. Carcinomatous meningitis "
        "and neurosarcoidosis are the leading mimics.");

    backend.store_extract(
        "csf findings igg index lymphoma",
        "An elevated IgG index with lymphocytic pleocytosis and negative cytology favors "
        "primary CNS lymphoma over carcinomatous meningitis.");
}

std::string make_temp_dir(const std::string& prefix) {
    static std::mt19937_64 rng{std::random_device{}()};
    auto dir = std::filesystem::temp_directory_path() / (prefix + "-" + std::to_string(rng()));
    std::filesystem::create_directories(dir);
    return dir.string();
}

std::string write_file(const std::string& dir, const std::string& name,
                       const std::string& content) {
    auto path = (std::filesystem::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

} // namespace polydx::testfix
