#include "polydx/types.hpp"

#include "polydx/errors.hpp"

#include <nlohmann/json.hpp>

namespace polydx {

const char* to_string(Source source) {
    switch (source) {
    case Source::Soap: return "soap";
    case Source::Web: return "web";
    case Source::Case: return "case";
    case Source::Trace: return "trace";
    case Source::Final: return "final";
    }
    return "unknown";
}

std::optional<Source> source_from_string(std::string_view name) {
    if (name == "soap") return Source::Soap;
    if (name == "web") return Source::Web;
    if (name == "case") return Source::Case;
    if (name == "trace") return Source::Trace;
    if (name == "final") return Source::Final;
    return std::nullopt;
}

void validate(const DiseaseList& list) {
    int expected = 1;
    for (const auto& item : list.items) {
        if (item.rank != expected) {
            throw ConfigError("disease list ranks must be consecutive 1..n, found rank " +
                              std::to_string(item.rank) + " at position " + std::to_string(expected));
        }
        if (item.name.empty()) {
            throw ConfigError("disease list item at rank " + std::to_string(item.rank) +
                              " has an empty name");
        }
        ++expected;
    }
}

const SourceResult& EvidenceBundle::by_source(Source source) const {
    switch (source) {
    case Source::Soap: return soap;
    case Source::Web: return web;
    case Source::Case: return cases;
    case Source::Trace: return trace;
    default: break;
    }
    throw ConfigError("no bundle entry for source 'final'");
}

SourceResult& EvidenceBundle::by_source(Source source) {
    return const_cast<SourceResult&>(std::as_const(*this).by_source(source));
}

const std::vector<Source>& EvidenceBundle::source_order() {
    static const std::vector<Source> order{Source::Soap, Source::Web, Source::Case, Source::Trace};
    return order;
}

std::size_t EvidenceBundle::non_empty_sources() const {
    std::size_t count = 0;
    for (auto source : source_order()) {
        if (!by_source(source).list.empty()) ++count;
    }
    return count;
}

namespace {

nlohmann::json list_to_json(const DiseaseList& list) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& item : list.items) {
        items.push_back({{"rank", item.rank}, {"name", item.name}, {"evidence", item.evidence}});
    }
    return {{"source", to_string(list.source)}, {"items", std::move(items)}};
}

DiseaseList list_from_json(const nlohmann::json& j) {
    DiseaseList list;
    auto source = source_from_string(j.at("source").get<std::string>());
    if (!source) throw FormatError("unknown disease list source", 0);
    list.source = *source;
    for (const auto& item : j.at("items")) {
        DiseaseCandidate candidate;
        candidate.rank = item.at("rank").get<int>();
        candidate.name = item.at("name").get<std::string>();
        candidate.evidence = item.value("evidence", std::string{});
        list.items.push_back(std::move(candidate));
    }
    return list;
}

} // namespace

std::string to_json(const DiseaseList& list) { return list_to_json(list).dump(2); }

DiseaseList disease_list_from_json(const std::string& json_text) {
    try {
        return list_from_json(nlohmann::json::parse(json_text));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad disease list record: ") + e.what(), 0);
    }
}

std::string to_json(const EvidenceBundle& bundle) {
    auto entry = [](const SourceResult& result) {
        return nlohmann::json{{"list", list_to_json(result.list)},
                              {"reasoning", result.reasoning},
                              {"failure", result.failure}};
    };
    nlohmann::json j{{"soap", entry(bundle.soap)},
                     {"web", entry(bundle.web)},
                     {"case", entry(bundle.cases)},
                     {"trace", entry(bundle.trace)}};
    return j.dump(2);
}

} // namespace polydx
