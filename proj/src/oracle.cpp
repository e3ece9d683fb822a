#include "convmg/oracle.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace convmg {

namespace {

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
as_eigen(const DenseOperator& op) {
    return {op.data(), op.dim(), op.dim()};
}

}  // namespace

DenseOperator::DenseOperator(int n) : n_(n), entries_(std::size_t(n) * n, 0.0) {
    if (n <= 0 || n > kMaxDim) throw std::invalid_argument("DenseOperator: dimension cap exceeded");
}

bool DenseOperator::is_symmetric(double tol) const {
    for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j)
            if (std::abs(at(i, j) - at(j, i)) > tol) return false;
    return true;
}

double DenseOperator::max_abs() const {
    double m = 0.0;
    for (double v : entries_) m = std::max(m, std::abs(v));
    return m;
}

DenseOperator DenseOperator::transposed() const {
    DenseOperator t(n_);
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) t.at(j, i) = at(i, j);
    return t;
}

DenseOperator DenseOperator::multiply(const DenseOperator& rhs) const {
    if (rhs.n_ != n_) throw std::invalid_argument("DenseOperator::multiply: size mismatch");
    DenseOperator out(n_);
    for (int i = 0; i < n_; ++i)
        for (int k = 0; k < n_; ++k) {
            const double a = at(i, k);
            if (a == 0.0) continue;
            for (int j = 0; j < n_; ++j) out.at(i, j) += a * rhs.at(k, j);
        }
    return out;
}

GridField DenseOperator::apply(const GridField& x) const {
    if (static_cast<int>(x.size()) != n_)
        throw std::invalid_argument("DenseOperator::apply: size mismatch");
    GridField y(x.rows(), x.cols());
    const double* xv = x.data();
    double* yv = y.data();
    for (int i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n_; ++j) acc += at(i, j) * xv[j];
        yv[i] = acc;
    }
    return y;
}

DenseOperator assemble(const FieldMap& apply, int rows, int cols) {
    const int n = rows * cols;
    DenseOperator op(n);
    for (int j = 0; j < n; ++j) {
        GridField e(rows, cols);
        e.data()[j] = 1.0;
        GridField col = apply(e);
        if (static_cast<int>(col.size()) != n)
            throw std::invalid_argument("assemble: map does not preserve shape");
        for (int i = 0; i < n; ++i) op.at(i, j) = col.data()[i];
    }
    return op;
}

double exact_spectral_radius(const DenseOperator& op) {
    Eigen::MatrixXd m = as_eigen(op);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("exact_spectral_radius: QR iteration did not converge");
    double rho = 0.0;
    for (int i = 0; i < m.rows(); ++i) rho = std::max(rho, std::abs(solver.eigenvalues()[i]));
    return rho;
}

GridField exact_solve(const DenseOperator& op, const GridField& b) {
    if (static_cast<int>(b.size()) != op.dim())
        throw std::invalid_argument("exact_solve: size mismatch");
    Eigen::MatrixXd m = as_eigen(op);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    Eigen::Map<const Eigen::VectorXd> rhs(b.data(), b.size());
    Eigen::VectorXd x = lu.solve(rhs);
    const double residual = (m * x - rhs).norm();
    if (!(residual <= 1e-10 * std::max(1.0, rhs.norm())))
        throw std::runtime_error("exact_solve: singular or ill-conditioned system");
    GridField out(b.rows(), b.cols());
    for (int i = 0; i < op.dim(); ++i) out.data()[i] = x[i];
    return out;
}

int dense_rank(const DenseOperator& op) {
    Eigen::MatrixXd m = as_eigen(op);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    return static_cast<int>(lu.rank());
}

}  // namespace convmg
