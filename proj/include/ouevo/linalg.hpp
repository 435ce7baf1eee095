#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace ouevo {

/// Largest spatial dimension supported. Vectors and matrices are stack
/// allocated up to this size so the quadrature inner loops never touch the heap.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Dense rank-3 array T(i,j,k) for third derivatives.
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n, 0.0) {}

    [[nodiscard]] int dim() const noexcept { return n_; }
    double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
    double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }

    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }
    [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

private:
    [[nodiscard]] std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
    }
    int n_ = 0;
    std::vector<double> data_;
};

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
struct SymEigen {
    Vec values;
    Mat vectors;
};

inline SymEigen sym_eigen(const Mat& m) {
    const Mat sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> solver(sym);
    return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Spectral norm via the symmetric eigenproblem of MᵀM.
inline double spectral_norm(const Mat& m) {
    if (m.size() == 0) return 0.0;
    const Mat mtm = m.transpose() * m;
    const SymEigen e = sym_eigen(mtm);
    return std::sqrt(std::max(0.0, e.values.maxCoeff()));
}

/// Applies `fn` to the eigenvalues of a symmetric matrix.
template <typename Fn>
Mat sym_function(const SymEigen& e, Fn&& fn) {
    const int n = static_cast<int>(e.values.size());
    Vec mapped(n);
    for (int i = 0; i < n; ++i) mapped(i) = fn(e.values(i));
    return e.vectors * mapped.asDiagonal() * e.vectors.transpose();
}

inline Mat identity(int n) { return Mat::Identity(n, n); }

inline Vec zeros(int n) { return Vec::Zero(n); }

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace ouevo
