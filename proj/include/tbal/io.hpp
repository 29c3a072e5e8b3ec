#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tbal/dense_array.hpp"
#include "tbal/error.hpp"

namespace tbal {

enum class FileFormat { matrix_market, tensor_coordinate };

/// Layout of a MatrixMarket file; writing reuses the layout it was read with.
struct MatrixMarketLayout {
    bool coordinate = true;
    bool integer = false;
    bool symmetric = false;
};

/// An array together with the format it came from.
struct LoadedArray {
    DenseArray array;
    FileFormat format = FileFormat::matrix_market;
    MatrixMarketLayout layout;
};

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::vector<std::string_view> tokens(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

[[noreturn]] inline void parse_fail(const std::string& source, std::size_t line, const std::string& what) {
    throw Error(ErrorKind::ParseError, source + ":" + std::to_string(line) + ": " + what);
}

inline std::size_t parse_count(std::string_view tok, const std::string& source, std::size_t line) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        parse_fail(source, line, "expected a nonnegative integer, got '" + std::string(tok) + "'");
    return v;
}

inline double parse_value(std::string_view tok, bool integer, const std::string& source, std::size_t line) {
    const char* end = tok.data() + tok.size();
    if (integer) {
        long long v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), end, v);
        if (ec != std::errc() || ptr != end) parse_fail(source, line, "expected an integer, got '" + std::string(tok) + "'");
        return static_cast<double>(v);
    }
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc() || ptr != end) parse_fail(source, line, "expected a real number, got '" + std::string(tok) + "'");
    return v;
}

inline void check_entry(double v, const std::string& source, std::size_t line) {
    if (!std::isfinite(v)) parse_fail(source, line, "non-finite value");
    if (v < 0.0) throw Error(ErrorKind::NegativeEntry, source + ":" + std::to_string(line) + ": entry " + std::to_string(v));
}

/// Reads the next line that is neither blank nor a comment.
inline bool next_data_line(std::istream& in, std::string& line, std::size_t& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto t = tokens(line);
        if (t.empty() || t.front().front() == '%') continue;
        return true;
    }
    return false;
}

inline void write_value(std::ostream& os, double v, bool integer) {
    if (integer)
        os << static_cast<long long>(v);
    else
        os << std::setprecision(17) << v;
}

}  // namespace detail

inline DenseArray parse_matrix_market(std::istream& in, MatrixMarketLayout* layout_out = nullptr,
                                      const std::string& source = "<stream>") {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) detail::parse_fail(source, 1, "empty file");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto head = detail::tokens(line);
    if (head.size() != 5 || head[0] != "%%MatrixMarket" || detail::lower(head[1]) != "matrix")
        detail::parse_fail(source, lineno, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'");

    MatrixMarketLayout layout;
    const auto fmt = detail::lower(head[2]), field = detail::lower(head[3]), sym = detail::lower(head[4]);
    if (fmt == "coordinate") layout.coordinate = true;
    else if (fmt == "array") layout.coordinate = false;
    else detail::parse_fail(source, lineno, "unsupported format '" + std::string(head[2]) + "'");
    if (field == "real") layout.integer = false;
    else if (field == "integer") layout.integer = true;
    else detail::parse_fail(source, lineno, "unsupported field '" + std::string(head[3]) + "'");
    if (sym == "general") layout.symmetric = false;
    else if (sym == "symmetric") layout.symmetric = true;
    else detail::parse_fail(source, lineno, "unsupported symmetry '" + std::string(head[4]) + "'");

    if (!detail::next_data_line(in, line, lineno)) detail::parse_fail(source, lineno + 1, "missing size line");
    auto size = detail::tokens(line);
    if (size.size() != (layout.coordinate ? 3u : 2u)) detail::parse_fail(source, lineno, "malformed size line");
    const std::size_t rows = detail::parse_count(size[0], source, lineno);
    const std::size_t cols = detail::parse_count(size[1], source, lineno);
    if (rows == 0 || cols == 0) detail::parse_fail(source, lineno, "matrix dimension of 0");
    if (layout.symmetric && rows != cols) detail::parse_fail(source, lineno, "symmetric matrix must be square");

    DenseArray A = DenseArray::zeros({rows, cols});
    auto put = [&](std::size_t i, std::size_t j, double v) {
        A.data()[i * cols + j] = v;
        if (layout.symmetric) A.data()[j * cols + i] = v;
    };

    if (layout.coordinate) {
        const std::size_t nnz = detail::parse_count(size[2], source, lineno);
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (std::size_t k = 0; k < nnz; ++k) {
            if (!detail::next_data_line(in, line, lineno))
                detail::parse_fail(source, lineno + 1, "expected " + std::to_string(nnz) + " entries, found " + std::to_string(k));
            auto t = detail::tokens(line);
            if (t.size() != 3) detail::parse_fail(source, lineno, "expected 'row column value'");
            const std::size_t i = detail::parse_count(t[0], source, lineno), j = detail::parse_count(t[1], source, lineno);
            if (i < 1 || i > rows || j < 1 || j > cols)
                throw Error(ErrorKind::IndexOutOfRange, source + ":" + std::to_string(lineno) + ": index (" + std::to_string(i) +
                                                            "," + std::to_string(j) + ") outside " + std::to_string(rows) +
                                                            "x" + std::to_string(cols));
            const double v = detail::parse_value(t[2], layout.integer, source, lineno);
            detail::check_entry(v, source, lineno);
            auto key = layout.symmetric ? std::pair{std::max(i, j), std::min(i, j)} : std::pair{i, j};
            if (!seen.insert(key).second) detail::parse_fail(source, lineno, "duplicate entry");
            put(i - 1, j - 1, v);
        }
    } else {
        // Column-major; symmetric storage lists the lower triangle only.
        for (std::size_t j = 0; j < cols; ++j)
            for (std::size_t i = layout.symmetric ? j : 0; i < rows; ++i) {
                if (!detail::next_data_line(in, line, lineno)) detail::parse_fail(source, lineno + 1, "too few array values");
                auto t = detail::tokens(line);
                if (t.size() != 1) detail::parse_fail(source, lineno, "expected one value per line");
                const double v = detail::parse_value(t[0], layout.integer, source, lineno);
                detail::check_entry(v, source, lineno);
                put(i, j, v);
            }
    }
    if (detail::next_data_line(in, line, lineno)) detail::parse_fail(source, lineno, "trailing data");
    if (layout_out) *layout_out = layout;
    return A;
}

inline DenseArray parse_tensor_coordinate(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    std::size_t lineno = 0;
    if (!detail::next_data_line(in, line, lineno)) detail::parse_fail(source, lineno + 1, "missing 'N n nnz' header");
    auto head = detail::tokens(line);
    if (head.size() != 3) detail::parse_fail(source, lineno, "expected 'N n nnz'");
    const std::size_t order = detail::parse_count(head[0], source, lineno);
    const std::size_t n = detail::parse_count(head[1], source, lineno);
    const std::size_t nnz = detail::parse_count(head[2], source, lineno);
    if (order < 1 || n < 1) detail::parse_fail(source, lineno, "order and side must be at least 1");
    std::size_t cells = 1;
    for (std::size_t m = 0; m < order; ++m) {
        if (cells > std::numeric_limits<std::size_t>::max() / n / sizeof(double))
            detail::parse_fail(source, lineno, "array too large");
        cells *= n;
    }
    if (nnz > cells) detail::parse_fail(source, lineno, "more entries than cells");

    DenseArray A = DenseArray::filled(order, n, 0.0);
    std::vector<bool> seen(cells, false);
    std::vector<std::size_t> idx(order);
    for (std::size_t k = 0; k < nnz; ++k) {
        if (!detail::next_data_line(in, line, lineno))
            detail::parse_fail(source, lineno + 1, "expected " + std::to_string(nnz) + " entries, found " + std::to_string(k));
        auto t = detail::tokens(line);
        if (t.size() != order + 1)
            detail::parse_fail(source, lineno, "expected " + std::to_string(order) + " indices and a value");
        for (std::size_t m = 0; m < order; ++m) {
            const std::size_t v = detail::parse_count(t[m], source, lineno);
            if (v < 1 || v > n)
                throw Error(ErrorKind::IndexOutOfRange, source + ":" + std::to_string(lineno) + ": index " + std::to_string(v) +
                                                            " in mode " + std::to_string(m + 1) + " outside 1.." +
                                                            std::to_string(n));
            idx[m] = v - 1;
        }
        const double v = detail::parse_value(t[order], false, source, lineno);
        detail::check_entry(v, source, lineno);
        const std::size_t off = A.offset(idx);
        if (seen[off]) detail::parse_fail(source, lineno, "duplicate entry");
        seen[off] = true;
        A.data()[off] = v;
    }
    if (detail::next_data_line(in, line, lineno)) detail::parse_fail(source, lineno, "trailing data");
    return A;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    return in;
}

inline DenseArray load_matrix_market(const std::string& path, MatrixMarketLayout* layout = nullptr) {
    auto in = open_input(path);
    return parse_matrix_market(in, layout, path);
}

inline DenseArray load_tensor_coordinate(const std::string& path) {
    auto in = open_input(path);
    return parse_tensor_coordinate(in, path);
}

/// Picks the reader from the first line: a "%%MatrixMarket" banner or a
/// tensor coordinate header.
inline LoadedArray load_array(const std::string& path) {
    auto in = open_input(path);
    LoadedArray out;
    std::string first;
    std::getline(in, first);
    in.clear();
    in.seekg(0);
    if (first.rfind("%%MatrixMarket", 0) == 0) {
        out.format = FileFormat::matrix_market;
        out.array = parse_matrix_market(in, &out.layout, path);
    } else {
        out.format = FileFormat::tensor_coordinate;
        out.array = parse_tensor_coordinate(in, path);
    }
    return out;
}

/// Symmetric layouts fall back to general when A is not symmetric. Coordinate
/// output lists the nonzero entries.
inline void write_matrix_market(std::ostream& os, const DenseArray& A, MatrixMarketLayout layout = {}) {
    if (A.order() != 2) throw Error(ErrorKind::ShapeMismatch, "MatrixMarket holds matrices only");
    const std::size_t rows = A.shape()[0], cols = A.shape()[1];
    if (layout.symmetric) {
        bool sym = rows == cols;
        for (std::size_t i = 0; sym && i < rows; ++i)
            for (std::size_t j = 0; sym && j < i; ++j) sym = A.at(i, j) == A.at(j, i);
        layout.symmetric = sym;
    }
    if (layout.integer)
        for (double v : A.data())
            if (v != static_cast<double>(static_cast<long long>(v))) {
                layout.integer = false;
                break;
            }

    os << "%%MatrixMarket matrix " << (layout.coordinate ? "coordinate" : "array") << ' '
       << (layout.integer ? "integer" : "real") << ' ' << (layout.symmetric ? "symmetric" : "general") << '\n';
    if (layout.coordinate) {
        std::size_t nnz = 0;
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < (layout.symmetric ? i + 1 : cols); ++j) nnz += A.at(i, j) != 0.0;
        os << rows << ' ' << cols << ' ' << nnz << '\n';
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < (layout.symmetric ? i + 1 : cols); ++j)
                if (A.at(i, j) != 0.0) {
                    os << i + 1 << ' ' << j + 1 << ' ';
                    detail::write_value(os, A.at(i, j), layout.integer);
                    os << '\n';
                }
    } else {
        os << rows << ' ' << cols << '\n';
        for (std::size_t j = 0; j < cols; ++j)
            for (std::size_t i = layout.symmetric ? j : 0; i < rows; ++i) {
                detail::write_value(os, A.at(i, j), layout.integer);
                os << '\n';
            }
    }
}

inline void write_tensor_coordinate(std::ostream& os, const DenseArray& A) {
    if (!A.equilateral()) throw Error(ErrorKind::ShapeMismatch, "tensor coordinate format needs equal sides");
    std::size_t nnz = 0;
    for (double v : A.data()) nnz += v != 0.0;
    os << A.order() << ' ' << A.shape()[0] << ' ' << nnz << '\n';
    for (std::size_t off = 0; off < A.size(); ++off) {
        if (A.data()[off] == 0.0) continue;
        for (auto i : A.unravel(off)) os << i + 1 << ' ';
        detail::write_value(os, A.data()[off], false);
        os << '\n';
    }
}

inline void save_array(const std::string& path, const DenseArray& A, FileFormat format, MatrixMarketLayout layout = {}) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::IoError, "cannot write " + path);
    if (format == FileFormat::matrix_market)
        write_matrix_market(os, A, layout);
    else
        write_tensor_coordinate(os, A);
    if (!os) throw Error(ErrorKind::IoError, "write failed for " + path);
}

}  // namespace tbal
