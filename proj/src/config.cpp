#include "delayid/config.hpp"

#include "delayid/errors.hpp"
#include "delayid/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace delayid {

std::string Diagnostic::str() const {
    std::ostringstream os;
    os << source;
    if (line > 0) os << ':' << line;
    os << ": " << (severity == Severity::error ? "error" : "warning") << ": ";
    if (!key.empty()) os << '[' << section << "] " << key << ": ";
    else if (!section.empty()) os << '[' << section << "]: ";
    os << message;
    return os.str();
}

bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(),
                       [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::error; });
}

namespace {

std::string strip_comment(const std::string& line) {
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] != '#' && line[i] != ';') continue;
        if (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t') return line.substr(0, i);
    }
    return line;
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '.' ||
               c == '-';
    });
}

}  // namespace

Config::Section* Config::get(const std::string& name) {
    for (auto& s : sections_)
        if (s.name == name) return &s;
    return nullptr;
}

const Config::Section* Config::get(const std::string& name) const {
    for (const auto& s : sections_)
        if (s.name == name) return &s;
    return nullptr;
}

Config Config::parse(std::istream& is, const std::string& source, std::vector<Diagnostic>& diags) {
    Config cfg;
    cfg.source_ = source;
    cfg.sections_.push_back({"", 0, {}});
    std::size_t current = 0;
    std::string raw;
    int lineno = 0;
    auto fail = [&](const std::string& section, const std::string& key, const std::string& msg) {
        diags.push_back({Diagnostic::Severity::error, source, lineno, section, key, msg});
    };
    while (std::getline(is, raw)) {
        ++lineno;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                fail("", "", "section header missing ']'");
                continue;
            }
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (!valid_name(name)) {
                fail(name, "", "invalid section name");
                continue;
            }
            if (cfg.get(name)) {
                fail(name, "", "section repeated (first at line " + std::to_string(cfg.get(name)->line) + ")");
                continue;
            }
            cfg.sections_.push_back({name, lineno, {}});
            current = cfg.sections_.size() - 1;
            continue;
        }
        const auto eq = line.find('=');
        const std::string& section = cfg.sections_[current].name;
        if (eq == std::string::npos) {
            fail(section, "", "expected 'key = value'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!valid_name(key)) {
            fail(section, key, "invalid key name");
            continue;
        }
        auto& entries = cfg.sections_[current].entries;
        const auto dup = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.first == key; });
        if (dup != entries.end()) {
            fail(section, key, "key repeated (first at line " + std::to_string(dup->second.line) + ")");
            continue;
        }
        entries.push_back({key, {value, lineno}});
    }
    return cfg;
}

Config Config::load(const std::string& path, std::vector<Diagnostic>& diags) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    return parse(in, path, diags);
}

std::vector<std::string> Config::sections() const {
    std::vector<std::string> out;
    for (const auto& s : sections_)
        if (!s.name.empty() || !s.entries.empty()) out.push_back(s.name);
    return out;
}

bool Config::has_section(const std::string& name) const { return get(name) != nullptr; }

int Config::section_line(const std::string& name) const {
    const auto* s = get(name);
    return s ? s->line : 0;
}

const ConfigValue* Config::find(const std::string& section, const std::string& key) const {
    const auto* s = get(section);
    if (!s) return nullptr;
    for (const auto& [k, v] : s->entries)
        if (k == key) return &v;
    return nullptr;
}

std::vector<std::string> Config::keys(const std::string& section) const {
    std::vector<std::string> out;
    if (const auto* s = get(section))
        for (const auto& e : s->entries) out.push_back(e.first);
    return out;
}

void ConfigReader::add(Diagnostic::Severity sev, const std::string& section, const std::string& key,
                       const std::string& message) {
    const ConfigValue* v = key.empty() ? nullptr : cfg_.find(section, key);
    const int line = v ? v->line : cfg_.section_line(section);
    diags_.push_back({sev, cfg_.source(), line, section, key, message});
}

void ConfigReader::error(const std::string& section, const std::string& key, const std::string& message) {
    add(Diagnostic::Severity::error, section, key, message);
}

void ConfigReader::warning(const std::string& section, const std::string& key, const std::string& message) {
    add(Diagnostic::Severity::warning, section, key, message);
}

bool ConfigReader::has(const std::string& section, const std::string& key) const {
    return cfg_.find(section, key) != nullptr;
}

std::optional<std::string> ConfigReader::get_optional_string(const std::string& section, const std::string& key) {
    note(section, key);
    const ConfigValue* v = cfg_.find(section, key);
    if (!v) return std::nullopt;
    return v->text;
}

std::string ConfigReader::get_string(const std::string& section, const std::string& key,
                                     const std::string& fallback) {
    return get_optional_string(section, key).value_or(fallback);
}

std::optional<double> ConfigReader::get_optional_double(const std::string& section, const std::string& key) {
    const auto text = get_optional_string(section, key);
    if (!text) return std::nullopt;
    try {
        const double v = parse_double(*text);
        if (!std::isfinite(v)) {
            error(section, key, "value must be finite");
            return std::nullopt;
        }
        return v;
    } catch (const ParameterError&) {
        error(section, key, "expected a number, got '" + *text + "'");
        return std::nullopt;
    }
}

double ConfigReader::get_double(const std::string& section, const std::string& key, double fallback) {
    return get_optional_double(section, key).value_or(fallback);
}

long long ConfigReader::get_int(const std::string& section, const std::string& key, long long fallback) {
    const auto text = get_optional_string(section, key);
    if (!text) return fallback;
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(*text, &pos);
        if (pos == text->size()) return v;
    } catch (const std::exception&) {
    }
    error(section, key, "expected an integer, got '" + *text + "'");
    return fallback;
}

bool ConfigReader::get_bool(const std::string& section, const std::string& key, bool fallback) {
    const auto text = get_optional_string(section, key);
    if (!text) return fallback;
    if (*text == "true" || *text == "yes" || *text == "on" || *text == "1") return true;
    if (*text == "false" || *text == "no" || *text == "off" || *text == "0") return false;
    error(section, key, "expected true or false, got '" + *text + "'");
    return fallback;
}

std::vector<std::string> ConfigReader::get_list(const std::string& section, const std::string& key,
                                                const std::vector<std::string>& fallback) {
    const auto text = get_optional_string(section, key);
    if (!text) return fallback;
    auto items = split_csv(*text);
    if (std::any_of(items.begin(), items.end(), [](const std::string& s) { return s.empty(); })) {
        error(section, key, "empty list item");
        return fallback;
    }
    return items;
}

std::vector<double> ConfigReader::get_doubles(const std::string& section, const std::string& key,
                                              const std::vector<double>& fallback) {
    const auto text = get_optional_string(section, key);
    if (!text) return fallback;
    std::vector<double> out;
    for (const auto& item : split_csv(*text)) {
        try {
            const double v = parse_double(item);
            if (!std::isfinite(v)) throw ParameterError("non-finite");
            out.push_back(v);
        } catch (const ParameterError&) {
            error(section, key, "expected a list of numbers, got '" + *text + "'");
            return fallback;
        }
    }
    return out;
}

std::optional<std::pair<double, double>> ConfigReader::get_bounds(const std::string& section,
                                                                  const std::string& key) {
    if (!has(section, key)) {
        note(section, key);
        return std::nullopt;
    }
    const auto v = get_doubles(section, key, {});
    if (v.size() != 2) {
        if (!v.empty()) error(section, key, "expected 'lower, upper'");
        return std::nullopt;
    }
    if (!(v[0] < v[1])) {
        error(section, key, "lower bound must be below upper bound");
        return std::nullopt;
    }
    return std::make_pair(v[0], v[1]);
}

void ConfigReader::report_unknown(const std::string& section) {
    const auto& used = used_[section];
    for (const auto& key : cfg_.keys(section))
        if (std::find(used.begin(), used.end(), key) == used.end()) error(section, key, "unknown key");
}

}  // namespace delayid
