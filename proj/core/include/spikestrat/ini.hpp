#pragma once

#include <map>
#include <string>
#include <vector>

namespace spikestrat {

// Flat key-value config with optional [section] headers. Keys inside a
// section are reported as "section.key". '#' and ';' start comments. Values
// keep inner whitespace; surrounding whitespace is trimmed. Duplicate keys
// are an error. Insertion order is preserved for unknown-key reporting.
struct ini_file {
    std::vector<std::pair<std::string, std::string>> entries;

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;                 // throws if absent
    std::string get_or(const std::string& key, const std::string& dflt) const;
};

ini_file parse_ini(const std::string& path);
ini_file parse_ini_text(const std::string& text, const std::string& origin);

// Conversions with error messages naming the key.
double ini_double(const ini_file& f, const std::string& key, double dflt);
long ini_long(const ini_file& f, const std::string& key, long dflt);
// Comma-separated list of reals under key (which must be present).
std::vector<double> ini_double_list(const ini_file& f, const std::string& key);
std::vector<std::string> split_csv_list(const std::string& value);

}  // namespace spikestrat
