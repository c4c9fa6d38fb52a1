#pragma once

// Plain-text configuration format: `[section]` headers and `key = value`
// lines, `#` comments. Parsing never throws on user mistakes — every problem
// is collected so a config file's full violation list is reported at once.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"

namespace taprec {

inline std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

struct KvFile {
    // keys are "section.key" (or bare "key" for the top-level section)
    std::map<std::string, std::string> values;
    std::vector<std::string> syntax_errors;

    bool has(const std::string& key) const { return values.count(key) > 0; }
};

inline KvFile parse_kv(const std::string& text) {
    KvFile out;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                out.syntax_errors.push_back("line " + std::to_string(lineno) +
                                            ": malformed section header '" + line + "'");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                out.syntax_errors.push_back("line " + std::to_string(lineno) +
                                            ": empty section name");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            out.syntax_errors.push_back("line " + std::to_string(lineno) +
                                        ": expected 'key = value', got '" + line + "'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            out.syntax_errors.push_back("line " + std::to_string(lineno) + ": empty key");
            continue;
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (out.values.count(full)) {
            out.syntax_errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" +
                                        full + "'");
            continue;
        }
        out.values[full] = value;
    }
    return out;
}

// Typed, range-checked access over a parsed KvFile. Violations accumulate;
// callers read every field and then ask for the complete error list, which
// includes any keys nobody consumed (unknown-key rejection).
class KvReader {
public:
    explicit KvReader(KvFile file) : file_(std::move(file)) {
        for (const std::string& e : file_.syntax_errors) violations_.push_back(e);
    }

    double get_double(const std::string& key, double def,
                      double lo = -std::numeric_limits<double>::infinity(),
                      double hi = std::numeric_limits<double>::infinity()) {
        consumed_.insert(key);
        auto it = file_.values.find(key);
        if (it == file_.values.end()) return def;
        double v;
        if (!parse_double(it->second, v)) {
            violations_.push_back(key + ": '" + it->second + "' is not a number");
            return def;
        }
        if (v < lo || v > hi) {
            violations_.push_back(key + ": " + it->second + " outside " + range_str(lo, hi));
            return def;
        }
        return v;
    }

    int64_t get_int(const std::string& key, int64_t def,
                    int64_t lo = std::numeric_limits<int64_t>::min(),
                    int64_t hi = std::numeric_limits<int64_t>::max()) {
        consumed_.insert(key);
        auto it = file_.values.find(key);
        if (it == file_.values.end()) return def;
        int64_t v;
        if (!parse_int(it->second, v)) {
            violations_.push_back(key + ": '" + it->second + "' is not an integer");
            return def;
        }
        if (v < lo || v > hi) {
            violations_.push_back(key + ": " + it->second + " outside [" + std::to_string(lo) +
                                  ", " + std::to_string(hi) + "]");
            return def;
        }
        return v;
    }

    bool get_bool(const std::string& key, bool def) {
        consumed_.insert(key);
        auto it = file_.values.find(key);
        if (it == file_.values.end()) return def;
        const std::string& s = it->second;
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        violations_.push_back(key + ": '" + s + "' is not a boolean (true/false)");
        return def;
    }

    std::string get_string(const std::string& key, const std::string& def) {
        consumed_.insert(key);
        auto it = file_.values.find(key);
        return it == file_.values.end() ? def : it->second;
    }

    std::string get_enum(const std::string& key, const std::string& def,
                         const std::vector<std::string>& choices) {
        consumed_.insert(key);
        auto it = file_.values.find(key);
        if (it == file_.values.end()) return def;
        for (const std::string& c : choices)
            if (it->second == c) return it->second;
        std::string opts;
        for (size_t i = 0; i < choices.size(); ++i) opts += (i ? ", " : "") + choices[i];
        violations_.push_back(key + ": '" + it->second + "' is not one of {" + opts + "}");
        return def;
    }

    // Add a cross-field violation (ranges affecting several keys at once).
    void add_violation(const std::string& msg) { violations_.push_back(msg); }

    // Call after all fields are read: flags unknown keys and returns the
    // complete violation list.
    std::vector<std::string> finish() {
        for (const auto& [key, value] : file_.values)
            if (!consumed_.count(key)) violations_.push_back("unknown key '" + key + "'");
        return violations_;
    }

private:
    static bool parse_double(const std::string& s, double& out) {
        try {
            size_t pos = 0;
            out = std::stod(s, &pos);
            return pos == s.size() && std::isfinite(out);
        } catch (...) {
            return false;
        }
    }

    static bool parse_int(const std::string& s, int64_t& out) {
        try {
            size_t pos = 0;
            out = std::stoll(s, &pos);
            return pos == s.size();
        } catch (...) {
            return false;
        }
    }

    static std::string range_str(double lo, double hi) {
        std::ostringstream os;
        os << "[";
        if (std::isinf(lo))
            os << "-inf";
        else
            os << lo;
        os << ", ";
        if (std::isinf(hi))
            os << "inf";
        else
            os << hi;
        os << (std::isinf(hi) ? ")" : "]");
        return os.str();
    }

    KvFile file_;
    std::set<std::string> consumed_;
    std::vector<std::string> violations_;
};

// Ordered writer for manifests and reports in the same format.
class KvWriter {
public:
    void section(const std::string& name) { out_ += "\n[" + name + "]\n"; }

    void put(const std::string& key, const std::string& value) {
        out_ += key + " = " + value + "\n";
    }
    void put(const std::string& key, int64_t v) { put(key, std::to_string(v)); }
    void put(const std::string& key, uint64_t v) { put(key, std::to_string(v)); }
    void put(const std::string& key, int v) { put(key, std::to_string(v)); }
    void put(const std::string& key, bool v) { put(key, std::string(v ? "true" : "false")); }
    void put(const std::string& key, double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        put(key, os.str());
    }
    void comment(const std::string& text) { out_ += "# " + text + "\n"; }

    const std::string& str() const { return out_; }

private:
    std::string out_;
};

}  // namespace taprec
