#pragma once

// Sparse matrix aliases and plain-text I/O (Matrix Market coordinate and
// one-value-per-line vectors). Values are written with 17 significant
// digits so files round-trip exactly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "pddsparse/types.hpp"

namespace pddsparse {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_matrix_market(const SparseMatrix& A, std::ostream& out) {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    for (int i = 0; i < A.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(A, i); it; ++it) {
            out << (it.row() + 1) << ' ' << (it.col() + 1) << ' ' << format_double(it.value()) << '\n';
        }
    }
}

inline void write_matrix_market(const SparseMatrix& A, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    write_matrix_market(A, out);
}

inline SparseMatrix read_matrix_market(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
        throw ConfigError("not a Matrix Market file");
    }
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (object != "matrix" || format != "coordinate" || field != "real" || symmetry != "general") {
        throw ConfigError("only 'matrix coordinate real general' is supported");
    }
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '%') break;
    }
    long rows = 0, cols = 0, nnz = 0;
    std::istringstream(line) >> rows >> cols >> nnz;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(nnz));
    for (long k = 0; k < nnz; ++k) {
        long i, j;
        double v;
        if (!(in >> i >> j >> v)) throw ConfigError("truncated Matrix Market file");
        triplets.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1), v);
    }
    SparseMatrix A(rows, cols);
    A.setFromTriplets(triplets.begin(), triplets.end());
    return A;
}

inline SparseMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_matrix_market(in);
}

inline void write_vector(const Vector& v, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    for (Eigen::Index k = 0; k < v.size(); ++k) out << format_double(v[k]) << '\n';
}

inline Vector read_vector(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<double> values;
    double x;
    while (in >> x) values.push_back(x);
    return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// Infinity norm (max absolute row sum).
inline double norm_inf(const SparseMatrix& A) {
    double best = 0.0;
    for (int i = 0; i < A.outerSize(); ++i) {
        double s = 0.0;
        for (SparseMatrix::InnerIterator it(A, i); it; ++it) s += std::abs(it.value());
        best = std::max(best, s);
    }
    return best;
}

inline double norm_inf(const DenseMatrix& A) { return A.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace pddsparse
