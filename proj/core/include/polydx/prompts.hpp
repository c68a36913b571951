#pragma once

#include <map>
#include <string>
#include <vector>

namespace polydx {

/// Catalog of prompt templates keyed by name, with built-in defaults.
/// Templates use {placeholder} substitution. Overridable per key or from a
/// directory of <key>.txt files to support prompt experimentation.
class PromptCatalog {
public:
    PromptCatalog();

    /// Throws ConfigError for an unknown key.
    const std::string& get(const std::string& key) const;
    void set(const std::string& key, std::string text);

    /// Replaces each {name} for the provided vars; unknown placeholders are
    /// left untouched.
    std::string render(const std::string& key, const std::map<std::string, std::string>& vars) const;

    /// Loads <key>.txt overrides from a directory; unknown filenames become
    /// new keys.
    void load_overrides(const std::string& dir);

    static const std::vector<std::string>& builtin_keys();

private:
    std::map<std::string, std::string> templates_;
};

} // namespace polydx
