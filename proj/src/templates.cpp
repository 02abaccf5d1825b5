#include "promptopt/templates.hpp"

#include <algorithm>

#include "promptopt/util.hpp"

namespace promptopt {

namespace {

struct RawTemplate {
    const char* name;
    const char* text;
};

const RawTemplate kRawTemplates[] = {
#include "builtin_templates.inc"
};

const char* opening_for(AgentRole role) {
    switch (role) {
        case AgentRole::Explainer: return "You are an evaluation explainer.";
        case AgentRole::Diagnostician: return "You are a precise evaluation doctor for LLM outputs.";
        case AgentRole::Synthesizer:
            return "Mission: Based on the structured diagnosis (Diagnostician Agent), "
                   "provide a single actionable prompt suggestion";
        case AgentRole::Analyzer: return "You are the Analyzer Agent.";
        case AgentRole::Refiner: return "You are the Refiner Agent.";
        case AgentRole::Combined: return nullptr;
    }
    return nullptr;
}

std::string raw_text(const std::string& name) {
    for (const auto& raw : kRawTemplates) {
        if (name == raw.name) return raw.text;
    }
    throw TemplateError("no builtin template named " + name);
}

bool valid_placeholder_name(const std::string& name) {
    if (name.empty()) return false;
    return std::all_of(name.begin(), name.end(), [](unsigned char c) {
        return (c >= 'a' && c <= 'z') || c == '_';
    });
}

}  // namespace

std::string to_string(AgentRole role) {
    switch (role) {
        case AgentRole::Explainer: return "explainer";
        case AgentRole::Diagnostician: return "diagnostician";
        case AgentRole::Synthesizer: return "synthesizer";
        case AgentRole::Analyzer: return "analyzer";
        case AgentRole::Refiner: return "refiner";
        case AgentRole::Combined: return "combined";
    }
    return "unknown";
}

std::vector<std::string> extract_placeholders(const std::string& text) {
    std::vector<std::string> names;
    size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string::npos) {
        size_t end = text.find("}}", pos + 2);
        if (end == std::string::npos) throw TemplateError("unterminated {{ placeholder");
        std::string name = text.substr(pos + 2, end - pos - 2);
        if (!valid_placeholder_name(name)) throw TemplateError("bad placeholder name: " + name);
        names.push_back(std::move(name));
        pos = end + 2;
    }
    return names;
}

std::string render(const std::string& template_text, const Bindings& bindings) {
    std::string out;
    out.reserve(template_text.size());
    std::vector<std::string> used;

    size_t pos = 0;
    while (pos < template_text.size()) {
        size_t open = template_text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(template_text, pos, std::string::npos);
            break;
        }
        out.append(template_text, pos, open - pos);
        size_t close = template_text.find("}}", open + 2);
        if (close == std::string::npos) throw TemplateError("unterminated {{ placeholder");
        std::string name = template_text.substr(open + 2, close - open - 2);
        auto it = bindings.find(name);
        if (it == bindings.end()) throw MissingBinding(name);
        out += it->second;
        used.push_back(std::move(name));
        pos = close + 2;
    }

    for (const auto& [name, value] : bindings) {
        (void)value;
        if (std::find(used.begin(), used.end(), name) == used.end()) {
            throw UnknownBinding(name);
        }
    }
    return out;
}

AgentTemplate parse_agent_template(AgentRole role, const std::string& file_text) {
    const std::string separator = "\n%%\n";
    size_t split = file_text.find(separator);
    if (split == std::string::npos) {
        throw TemplateError("template for " + to_string(role) +
                            " is missing the %% payload separator");
    }
    AgentTemplate tpl;
    tpl.role = role;
    tpl.system_text = file_text.substr(0, split);
    tpl.payload_text = file_text.substr(split + separator.size());
    tpl.placeholders = extract_placeholders(tpl.payload_text);
    validate_template(tpl);
    return tpl;
}

void validate_template(const AgentTemplate& tpl) {
    if (is_blank(tpl.system_text)) throw TemplateError("empty system section");
    if (is_blank(tpl.payload_text)) throw TemplateError("empty payload section");
    if (tpl.system_text.find("{{") != std::string::npos) {
        throw TemplateError("placeholders are only allowed in the payload section");
    }

    auto names = extract_placeholders(tpl.payload_text);
    for (const auto& name : names) {
        if (std::count(names.begin(), names.end(), name) != 1) {
            throw TemplateError("placeholder {{" + name + "}} appears more than once");
        }
    }
    if (names.empty()) throw TemplateError("payload section has no placeholders");

    if (const char* opening = opening_for(tpl.role)) {
        if (!starts_with(tpl.system_text, opening)) {
            throw TemplateError(to_string(tpl.role) + " template must begin with \"" +
                                opening + "\"");
        }
    }
}

const TemplateSet& TemplateSet::builtin() {
    static const TemplateSet set = [] {
        TemplateSet s;
        auto load_agent = [&](AgentRole role) {
            s.agents_[role] = parse_agent_template(role, raw_text(to_string(role)));
        };
        load_agent(AgentRole::Explainer);
        load_agent(AgentRole::Diagnostician);
        load_agent(AgentRole::Synthesizer);
        load_agent(AgentRole::Analyzer);
        load_agent(AgentRole::Refiner);
        load_agent(AgentRole::Combined);

        auto load_baseline = [&](Strategy strategy) {
            AgentTemplate parsed = parse_agent_template(
                AgentRole::Combined, raw_text("baseline_" + to_string(strategy)));
            BaselineTemplate b;
            b.strategy = strategy;
            b.system_text = parsed.system_text;
            b.payload_text = parsed.payload_text;
            b.placeholders = parsed.placeholders;
            s.baselines_[strategy] = std::move(b);
        };
        load_baseline(Strategy::Direct);
        load_baseline(Strategy::Cot);
        load_baseline(Strategy::Role);
        load_baseline(Strategy::Rag);
        return s;
    }();
    return set;
}

TemplateSet TemplateSet::load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw TemplateError("template directory not found: " + dir.string());
    }
    TemplateSet set = builtin();
    for (auto& [role, tpl] : set.agents_) {
        auto path = dir / (to_string(role) + ".txt");
        if (std::filesystem::exists(path)) {
            tpl = parse_agent_template(role, read_file(path));
        }
    }
    for (auto& [strategy, tpl] : set.baselines_) {
        auto path = dir / ("baseline_" + to_string(strategy) + ".txt");
        if (std::filesystem::exists(path)) {
            AgentTemplate parsed = parse_agent_template(AgentRole::Combined, read_file(path));
            tpl.system_text = parsed.system_text;
            tpl.payload_text = parsed.payload_text;
            tpl.placeholders = parsed.placeholders;
        }
    }
    return set;
}

const AgentTemplate& TemplateSet::agent(AgentRole role) const {
    auto it = agents_.find(role);
    if (it == agents_.end()) throw TemplateError("no template for " + to_string(role));
    return it->second;
}

const BaselineTemplate& TemplateSet::baseline(Strategy strategy) const {
    auto it = baselines_.find(strategy);
    if (it == baselines_.end()) {
        throw TemplateError("no baseline template for " + to_string(strategy));
    }
    return it->second;
}

}  // namespace promptopt
