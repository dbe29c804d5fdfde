#include "hamp/io.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hamp/errors.hpp"

namespace fs = std::filesystem;

namespace hamp::io {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec && !fs::is_directory(dir))
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void atomic_write(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename " + tmp.string() + " -> " + path.string() +
                          " failed: " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

static double parse_double(const std::string& tok, const fs::path& path, long line) {
    double out = 0.0;
    const char* b = tok.data();
    const char* e = tok.data() + tok.size();
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e)
        throw ParseError(path.string(), line, "bad number '" + tok + "'");
    return out;
}

Matrix read_csv_matrix(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            std::string tok = line.substr(
                start, comma == std::string::npos ? std::string::npos : comma - start);
            // Trim surrounding whitespace.
            std::size_t a = tok.find_first_not_of(" \t\r");
            std::size_t b = tok.find_last_not_of(" \t\r");
            if (a == std::string::npos)
                throw ParseError(path.string(), lineno, "empty field");
            row.push_back(parse_double(tok.substr(a, b - a + 1), path, lineno));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError(path.string(), lineno,
                             "row has " + std::to_string(row.size()) +
                                 " fields, expected " +
                                 std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path.string(), 1, "empty matrix file");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) = rows[i][j];
    return m;
}

std::string csv_from_matrix(const MatView& m, int precision) {
    std::ostringstream ss;
    ss.precision(precision);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) ss << ',';
            ss << m.at(i, j);
        }
        ss << '\n';
    }
    return ss.str();
}

std::vector<int> read_int_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<int> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        std::size_t b = line.find_last_not_of(" \t\r");
        std::string tok = line.substr(a, b - a + 1);
        int v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size())
            throw ParseError(path.string(), lineno, "bad integer '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

std::string int_lines(const std::vector<int>& xs) {
    std::ostringstream ss;
    for (int x : xs) ss << x << '\n';
    return ss.str();
}

} // namespace hamp::io
