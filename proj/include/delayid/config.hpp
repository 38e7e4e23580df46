#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace delayid {

/// A problem found while reading or checking a config, located by line and key.
struct Diagnostic {
    enum class Severity { error, warning };
    Severity severity = Severity::error;
    std::string source;
    int line = 0;  // 0 when the problem is not tied to a line
    std::string section;
    std::string key;
    std::string message;

    std::string str() const;
};

bool has_errors(const std::vector<Diagnostic>& diags);

struct ConfigValue {
    std::string text;
    int line = 0;
};

/// Flat "key = value" text with [section] headers. '#' and ';' start comments
/// (whole-line or after whitespace). Keys before the first header belong to
/// the unnamed section "".
class Config {
public:
    /// Syntax problems (malformed line, duplicate key or section) are appended
    /// to diags; parsing continues with the next line.
    static Config parse(std::istream& is, const std::string& source, std::vector<Diagnostic>& diags);
    /// Throws ConfigError when the file cannot be read.
    static Config load(const std::string& path, std::vector<Diagnostic>& diags);

    const std::string& source() const { return source_; }
    /// Section names in file order.
    std::vector<std::string> sections() const;
    bool has_section(const std::string& name) const;
    int section_line(const std::string& name) const;
    const ConfigValue* find(const std::string& section, const std::string& key) const;
    /// Keys of a section in file order.
    std::vector<std::string> keys(const std::string& section) const;

private:
    struct Section {
        std::string name;
        int line = 0;
        std::vector<std::pair<std::string, ConfigValue>> entries;
    };
    Section* get(const std::string& name);
    const Section* get(const std::string& name) const;

    std::string source_;
    std::vector<Section> sections_;
};

/// Typed access with diagnostics. Every getter records an error and returns the
/// fallback when the value does not parse; keys() lists what was read so
/// unknown keys can be reported.
class ConfigReader {
public:
    ConfigReader(const Config& cfg, std::vector<Diagnostic>& diags) : cfg_(cfg), diags_(diags) {}

    const Config& config() const { return cfg_; }
    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key, const std::string& fallback);
    std::optional<std::string> get_optional_string(const std::string& section, const std::string& key);
    double get_double(const std::string& section, const std::string& key, double fallback);
    std::optional<double> get_optional_double(const std::string& section, const std::string& key);
    long long get_int(const std::string& section, const std::string& key, long long fallback);
    bool get_bool(const std::string& section, const std::string& key, bool fallback);
    std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                      const std::vector<std::string>& fallback);
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback);
    /// Reads "lo, hi" with lo < hi.
    std::optional<std::pair<double, double>> get_bounds(const std::string& section, const std::string& key);

    void error(const std::string& section, const std::string& key, const std::string& message);
    void warning(const std::string& section, const std::string& key, const std::string& message);

    /// Reports every key of `section` that no getter has asked for.
    void report_unknown(const std::string& section);

private:
    void note(const std::string& section, const std::string& key) { used_[section].push_back(key); }
    void add(Diagnostic::Severity sev, const std::string& section, const std::string& key, const std::string& message);

    const Config& cfg_;
    std::vector<Diagnostic>& diags_;
    std::map<std::string, std::vector<std::string>> used_;
};

}  // namespace delayid
