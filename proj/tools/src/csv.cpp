#include "calibra_cli/cli.hpp"

#include "calibra/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace calibra::cli {

namespace {

std::string trim(std::string s) {
    auto issp = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (!s.empty() && issp(s.back())) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && issp(s[i])) ++i;
    s.erase(0, i);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}

Dataset parse_csv(const std::string& text, Arm arm, OutcomeType type, const std::string& source) {
    std::istringstream is(text);
    std::string line;
    std::vector<std::string> header;
    std::size_t lineno = 0;
    while (header.empty() && std::getline(is, line)) {
        ++lineno;
        if (!trim(line).empty()) header = split(line);
    }
    if (header.empty()) throw SchemaError(source + ": empty file, header row required");
    for (const auto& h : header)
        if (h.empty()) throw SchemaError(source + ": empty column name in header");
    std::vector<Vector> cols(header.size());
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (cells.size() != header.size())
            throw SchemaError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                              " fields, got " + std::to_string(cells.size()));
        for (std::size_t j = 0; j < cells.size(); ++j) {
            const std::string& c = cells[j];
            double v = 0.0;
            const char* b = c.data();
            if (!c.empty() && *b == '+') ++b;
            auto [p, ec] = std::from_chars(b, c.data() + c.size(), v);
            if (c.empty() || ec != std::errc() || p != c.data() + c.size())
                throw SchemaError(source + ":" + std::to_string(lineno) + ": column '" + header[j] +
                                  "' has non-numeric value '" + c + "'");
            cols[j].push_back(v);
        }
    }
    std::vector<std::pair<std::string, Vector>> named;
    for (std::size_t j = 0; j < header.size(); ++j) named.emplace_back(header[j], std::move(cols[j]));
    try {
        return Dataset(arm, type, std::move(named));
    } catch (const Error& e) {
        throw SchemaError(source + ": " + e.what());
    }
}

Dataset read_csv(const std::string& path, Arm arm, OutcomeType type) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw SchemaError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str(), arm, type, path);
}

}
