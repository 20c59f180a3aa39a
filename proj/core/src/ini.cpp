#include "spikestrat/ini.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spikestrat {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

bool ini_file::has(const std::string& key) const {
    return std::any_of(entries.begin(), entries.end(),
                       [&](const auto& kv) { return kv.first == key; });
}

const std::string& ini_file::get(const std::string& key) const {
    for (const auto& kv : entries) {
        if (kv.first == key) return kv.second;
    }
    throw std::invalid_argument("missing config key: " + key);
}

std::string ini_file::get_or(const std::string& key, const std::string& dflt) const {
    for (const auto& kv : entries) {
        if (kv.first == key) return kv.second;
    }
    return dflt;
}

ini_file parse_ini_text(const std::string& text, const std::string& origin) {
    ini_file out;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                            ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                        ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        if (!section.empty()) key = section + "." + key;
        if (out.has(key)) {
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                        ": duplicate key: " + key);
        }
        out.entries.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

ini_file parse_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_ini_text(buf.str(), path);
}

double ini_double(const ini_file& f, const std::string& key, double dflt) {
    if (!f.has(key)) return dflt;
    const std::string& v = f.get(key);
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": not a number: " + v);
    }
}

long ini_long(const ini_file& f, const std::string& key, long dflt) {
    if (!f.has(key)) return dflt;
    const std::string& v = f.get(key);
    try {
        std::size_t pos = 0;
        long n = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return n;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": not an integer: " + v);
    }
}

std::vector<double> ini_double_list(const ini_file& f, const std::string& key) {
    std::vector<double> out;
    for (const std::string& tok : split_csv_list(f.get(key))) {
        try {
            std::size_t pos = 0;
            double d = std::stod(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument("");
            out.push_back(d);
        } catch (const std::exception&) {
            throw std::invalid_argument("config key " + key + ": not a number: " + tok);
        }
    }
    return out;
}

std::vector<std::string> split_csv_list(const std::string& value) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(value);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

}  // namespace spikestrat
