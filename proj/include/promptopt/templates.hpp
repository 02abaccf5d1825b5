#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "promptopt/core.hpp"

namespace promptopt {

struct MissingBinding : Error {
    explicit MissingBinding(const std::string& name) : Error("MissingBinding", name) {}
};

struct UnknownBinding : Error {
    explicit UnknownBinding(const std::string& name) : Error("UnknownBinding", name) {}
};

struct TemplateError : Error {
    explicit TemplateError(const std::string& message) : Error("TemplateError", message) {}
};

enum class AgentRole { Explainer, Diagnostician, Synthesizer, Analyzer, Refiner, Combined };
std::string to_string(AgentRole role);

/// A template file has two sections separated by a line containing only
/// "%%": the role instructions (sent verbatim as the system message) and a
/// user-payload skeleton whose {{name}} slots are filled per call.
struct AgentTemplate {
    AgentRole role = AgentRole::Explainer;
    std::string system_text;
    std::string payload_text;
    std::vector<std::string> placeholders;  // in order of appearance, each used once
};

struct BaselineTemplate {
    Strategy strategy = Strategy::Direct;
    std::string system_text;
    std::string payload_text;
    std::vector<std::string> placeholders;
};

using Bindings = std::map<std::string, std::string>;

/// Replaces each {{name}} with its binding. Bindings must cover the
/// placeholders exactly: MissingBinding / UnknownBinding otherwise. No "{{"
/// survives in the output.
std::string render(const std::string& template_text, const Bindings& bindings);

std::vector<std::string> extract_placeholders(const std::string& text);

AgentTemplate parse_agent_template(AgentRole role, const std::string& file_text);

/// Placeholders appear exactly once each, only in the payload section, and
/// the five core roles start with their required opening lines.
void validate_template(const AgentTemplate& tpl);

class TemplateSet {
public:
    /// Compiled-in copies of the files under templates/.
    static const TemplateSet& builtin();

    /// Loads overrides from a directory ("explainer.txt", "baseline_rag.txt",
    /// ...). Files that are absent fall back to the builtin version.
    static TemplateSet load_directory(const std::filesystem::path& dir);

    const AgentTemplate& agent(AgentRole role) const;
    const BaselineTemplate& baseline(Strategy strategy) const;

private:
    std::map<AgentRole, AgentTemplate> agents_;
    std::map<Strategy, BaselineTemplate> baselines_;
};

}  // namespace promptopt
