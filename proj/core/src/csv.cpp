#include "spikestrat/csv.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace spikestrat {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_double(const std::string& cell, const std::string& where) {
    double v;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw std::invalid_argument(where + ": not a number: '" + cell + "'");
    }
    return v;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open dataset: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
    std::vector<std::string> header = split_line(line);

    std::size_t col = 0;
    auto expect = [&](const char* name) {
        if (col >= header.size() || header[col] != name) {
            throw std::invalid_argument(path + ": header: expected column '" +
                                        std::string(name) + "' at position " +
                                        std::to_string(col + 1));
        }
        ++col;
    };
    expect("id");
    expect("source");
    expect("w");
    expect("y");
    int dims = 0;
    while (col < header.size() && header[col] == "x" + std::to_string(dims + 1)) {
        ++dims;
        ++col;
    }
    bool has_yt = false, has_yc = false, has_e = false, has_prog = false;
    if (col < header.size() && header[col] == "yt") { has_yt = true; ++col; }
    if (col < header.size() && header[col] == "yc") { has_yc = true; ++col; }
    if (col < header.size() && header[col] == "e") { has_e = true; ++col; }
    if (col < header.size() && header[col] == "prog") { has_prog = true; ++col; }
    if (col != header.size()) {
        throw std::invalid_argument(path + ": header: unexpected column '" + header[col] +
                                    "' (canonical order is id,source,w,y,x1..xd,yt,yc,e,prog)");
    }
    if (has_yt != has_yc) {
        throw std::invalid_argument(path + ": header: yt and yc must appear together");
    }
    const std::size_t ncols = header.size();

    std::vector<subject> subjects;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells = split_line(line);
        std::string where = path + ":" + std::to_string(lineno);
        if (cells.size() != ncols) {
            throw std::invalid_argument(where + ": expected " + std::to_string(ncols) +
                                        " cells, got " + std::to_string(cells.size()));
        }
        subject s;
        s.id = cells[0];
        if (s.id.empty()) throw std::invalid_argument(where + ": empty id");
        std::string src = lower(cells[1]);
        if (src == "odb") {
            s.source = source_kind::odb;
        } else if (src == "rct") {
            s.source = source_kind::rct;
        } else {
            throw std::invalid_argument(where + ": source must be odb or rct, got '" +
                                        cells[1] + "'");
        }
        if (cells[2] == "0") {
            s.w = 0;
        } else if (cells[2] == "1") {
            s.w = 1;
        } else {
            throw std::invalid_argument(where + ": w must be 0 or 1, got '" + cells[2] + "'");
        }
        s.y = parse_double(cells[3], where + ": y");
        s.x.reserve(dims);
        for (int j = 0; j < dims; ++j) {
            s.x.push_back(parse_double(cells[4 + j], where + ": x" + std::to_string(j + 1)));
        }
        std::size_t c = 4 + static_cast<std::size_t>(dims);
        auto opt_cell = [&](bool present, const char* name) -> std::optional<double> {
            if (!present) return std::nullopt;
            const std::string& cell = cells[c++];
            if (cell.empty()) return std::nullopt;
            return parse_double(cell, where + ": " + name);
        };
        s.y_t = opt_cell(has_yt, "yt");
        s.y_c = opt_cell(has_yc, "yc");
        s.e = opt_cell(has_e, "e");
        s.prog = opt_cell(has_prog, "prog");
        if (s.e && (*s.e <= 0.0 || *s.e >= 1.0)) {
            throw std::invalid_argument(where + ": propensity must lie strictly in (0,1), got " +
                                        format_double(*s.e));
        }
        subjects.push_back(std::move(s));
    }

    try {
        return dataset(std::move(subjects), dims);
    } catch (const std::invalid_argument& err) {
        throw std::invalid_argument(path + ": " + err.what());
    }
}

void write_dataset(const dataset& data, const std::string& path) {
    bool has_yt = data.any_has_potential_outcomes();
    bool has_e = data.any_has_propensity();
    bool has_prog = data.any_has_prognostic();

    std::ostringstream out;
    out << "id,source,w,y";
    for (int j = 1; j <= data.dims(); ++j) out << ",x" << j;
    if (has_yt) out << ",yt,yc";
    if (has_e) out << ",e";
    if (has_prog) out << ",prog";
    out << "\n";

    for (const subject& s : data.subjects()) {
        if (s.id.find_first_of(",\"\n") != std::string::npos) {
            throw std::invalid_argument("write_dataset: id contains CSV delimiter: " + s.id);
        }
        out << s.id << ',' << to_string(s.source) << ',' << s.w << ',' << format_double(s.y);
        for (double v : s.x) out << ',' << format_double(v);
        auto opt = [&](const std::optional<double>& v) {
            out << ',';
            if (v) out << format_double(*v);
        };
        if (has_yt) { opt(s.y_t); opt(s.y_c); }
        if (has_e) opt(s.e);
        if (has_prog) opt(s.prog);
        out << "\n";
    }

    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write dataset: " + path);
    file << out.str();
    if (!file) throw std::runtime_error("write failed: " + path);
}

}  // namespace spikestrat
