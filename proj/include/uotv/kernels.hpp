#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "uotv/support.hpp"

namespace uotv {

/// Extra factor w(a, b) folded into a reduction along one axis, where a is the
/// output coordinate and b the input coordinate. Cost and displacement
/// moments of the plan are obtained this way without forming it.
enum class AxisWeight { one, cost, pos, neg };

inline double axis_weight(AxisWeight w, double a, double b) noexcept {
    switch (w) {
        case AxisWeight::one: return 1.0;
        case AxisWeight::cost: return 0.5 * (b - a) * (b - a);
        case AxisWeight::pos: return b > a ? b - a : 0.0;
        case AxisWeight::neg: return a > b ? a - b : 0.0;
    }
    return 1.0;
}

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

/// log sum exp over a range, with -inf entries ignored.
inline double log_sum_exp(std::span<const double> v) {
    double m = neg_inf;
    for (double x : v) m = x > m ? x : m;
    if (m == neg_inf) return neg_inf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

inline double log_add_exp(double a, double b) {
    if (a == neg_inf) return b;
    if (b == neg_inf) return a;
    const double m = a > b ? a : b;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

namespace detail {

/// Below this a product sum is recomputed entry by entry in the log domain.
inline constexpr double underflow_floor = 1e-280;

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

struct AxisKernel {
    Mat k;      ///< w(a,b) exp(-(a-b)^2 / (2 eps)), rows = output points
    Mat log_k;  ///< same in the log domain
};

inline AxisKernel make_axis_kernel(const std::vector<double>& out, const std::vector<double>& in, double eps,
                                   AxisWeight w) {
    const auto n = static_cast<Eigen::Index>(out.size());
    const auto m = static_cast<Eigen::Index>(in.size());
    AxisKernel ak{Mat(n, m), Mat(n, m)};
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = out[i] - in[j];
            const double wt = axis_weight(w, out[i], in[j]);
            const double lk = wt > 0.0 ? std::log(wt) - 0.5 * d * d / eps : neg_inf;
            ak.log_k(i, j) = lk;
            ak.k(i, j) = std::exp(lk);
        }
    return ak;
}

}  // namespace detail

/// Softmin reductions between two grid windows with the separable cost
/// C = ((x - x')^2 + (y - y')^2) / 2. Computes
///   r_i = log sum_j wx(x_i, x_j) wy(y_i, y_j) exp(h_j - C_ij / eps)
/// as two stabilized per-axis matrix products, one axis at a time.
class SeparableOperator {
public:
    SeparableOperator(const GridSupport& out, const GridSupport& in, double eps)
        : out_xs_(out.xs), out_ys_(out.ys), in_xs_(in.xs), in_ys_(in.ys), eps_(eps) {
        if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
    }

    [[nodiscard]] std::size_t out_size() const noexcept { return out_xs_.size() * out_ys_.size(); }
    [[nodiscard]] std::size_t in_size() const noexcept { return in_xs_.size() * in_ys_.size(); }
    [[nodiscard]] double epsilon() const noexcept { return eps_; }

    void lse(std::span<const double> h, AxisWeight wx, AxisWeight wy, std::span<double> r) const {
        using detail::Mat;
        const auto nxo = static_cast<Eigen::Index>(out_xs_.size());
        const auto nyo = static_cast<Eigen::Index>(out_ys_.size());
        const auto nxi = static_cast<Eigen::Index>(in_xs_.size());
        const auto nyi = static_cast<Eigen::Index>(in_ys_.size());
        if (h.size() != in_size() || r.size() != out_size()) throw std::invalid_argument("lse: size mismatch");
        if (nxo * nyo == 0) return;
        if (nxi * nyi == 0) {
            std::fill(r.begin(), r.end(), neg_inf);
            return;
        }
        const auto& kx = axis(0, wx);
        const auto& ky = axis(1, wy);
        Eigen::Map<const Mat> H(h.data(), nxi, nyi);

        // Reduce over the input x axis: T(ix, jy) = log sum_jx Kx(ix, jx) exp(H(jx, jy)).
        Eigen::VectorXd m1(nyi);
        Mat E(nxi, nyi);
        for (Eigen::Index jy = 0; jy < nyi; ++jy) {
            double m = neg_inf;
            for (Eigen::Index jx = 0; jx < nxi; ++jx) m = H(jx, jy) > m ? H(jx, jy) : m;
            m1(jy) = m;
            if (m == neg_inf)
                E.col(jy).setZero();
            else
                E.col(jy) = (H.col(jy).array() - m).exp();
        }
        const Mat S1 = kx.k * E;
        Mat T = S1.array().log().matrix();
        for (Eigen::Index jy = 0; jy < nyi; ++jy) {
            if (m1(jy) == neg_inf) {
                T.col(jy).setConstant(neg_inf);
                continue;
            }
            T.col(jy).array() += m1(jy);
            for (Eigen::Index ix = 0; ix < nxo; ++ix)
                if (!(S1(ix, jy) > detail::underflow_floor))
                    T(ix, jy) = exact_row(kx.log_k, ix, [&](Eigen::Index jx) { return H(jx, jy); }, nxi);
        }

        // Reduce over the input y axis: R(ix, iy) = log sum_jy Ky(iy, jy) exp(T(ix, jy)).
        Eigen::VectorXd m2 = T.rowwise().maxCoeff();
        Eigen::VectorXd shift = m2.unaryExpr([](double v) { return v == neg_inf ? 0.0 : v; });
        const Mat E2 = (T.colwise() - shift).array().exp().matrix();
        const Mat S2 = E2 * ky.k.transpose();
        // Aligned scratch: results must not depend on the caller's buffer address.
        Mat R = S2.array().log().matrix();
        R.colwise() += shift;
        for (Eigen::Index iy = 0; iy < nyo; ++iy)
            for (Eigen::Index ix = 0; ix < nxo; ++ix) {
                if (m2(ix) == neg_inf)
                    R(ix, iy) = neg_inf;
                else if (!(S2(ix, iy) > detail::underflow_floor))
                    R(ix, iy) = exact_row(ky.log_k, iy, [&](Eigen::Index jy) { return T(ix, jy); }, nyi);
            }
        std::copy(R.data(), R.data() + R.size(), r.begin());
    }

    void lse(std::span<const double> h, std::span<double> r) const { lse(h, AxisWeight::one, AxisWeight::one, r); }

private:
    template <class F>
    static double exact_row(const detail::Mat& log_k, Eigen::Index row, F&& value, Eigen::Index n) {
        double m = neg_inf;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = log_k(row, j) + value(j);
            m = v > m ? v : m;
        }
        if (m == neg_inf) return neg_inf;
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = log_k(row, j) + value(j);
            if (v != neg_inf) s += std::exp(v - m);
        }
        return m + std::log(s);
    }

    const detail::AxisKernel& axis(int a, AxisWeight w) const {
        auto& slot = cache_[a][static_cast<std::size_t>(w)];
        if (!slot)
            slot = std::make_unique<detail::AxisKernel>(
                a == 0 ? detail::make_axis_kernel(out_xs_, in_xs_, eps_, w) : detail::make_axis_kernel(out_ys_, in_ys_, eps_, w));
        return *slot;
    }

    std::vector<double> out_xs_, out_ys_, in_xs_, in_ys_;
    double eps_;
    mutable std::array<std::array<std::unique_ptr<detail::AxisKernel>, 4>, 2> cache_{};
};

/// Same reductions with the cost matrix materialized; no separability assumed.
class DenseOperator {
public:
    static constexpr std::size_t max_entries = 10'000'000;

    DenseOperator(const PointSupport& out, const PointSupport& in, double eps)
        : out_xs_(out.xs), out_ys_(out.ys), in_xs_(in.xs), in_ys_(in.ys), eps_(eps) {
        if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
        const std::size_t n = out.size(), m = in.size();
        if (n * m > max_entries)
            throw std::length_error("dense kernel of " + std::to_string(n) + "x" + std::to_string(m) +
                                    " exceeds the 1e7 entry guard");
        neg_c_.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double dx = out.xs[i] - in.xs[j], dy = out.ys[i] - in.ys[j];
                neg_c_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = -0.5 * (dx * dx + dy * dy) / eps;
            }
    }

    [[nodiscard]] std::size_t out_size() const noexcept { return out_xs_.size(); }
    [[nodiscard]] std::size_t in_size() const noexcept { return in_xs_.size(); }
    [[nodiscard]] double epsilon() const noexcept { return eps_; }

    void lse(std::span<const double> h, AxisWeight wx, AxisWeight wy, std::span<double> r) const {
        if (h.size() != in_size() || r.size() != out_size()) throw std::invalid_argument("lse: size mismatch");
        const auto m = static_cast<Eigen::Index>(in_size());
        if (m == 0) {
            std::fill(r.begin(), r.end(), neg_inf);
            return;
        }
        Eigen::Map<const Eigen::ArrayXd> H(h.data(), m);
        Eigen::ArrayXd v(m);
        for (std::size_t i = 0; i < out_size(); ++i) {
            v = neg_c_.col(static_cast<Eigen::Index>(i)).array() + H;
            if (wx != AxisWeight::one || wy != AxisWeight::one)
                for (Eigen::Index j = 0; j < m; ++j) {
                    const double w = axis_weight(wx, out_xs_[i], in_xs_[j]) * axis_weight(wy, out_ys_[i], in_ys_[j]);
                    v(j) = w > 0.0 ? v(j) + std::log(w) : neg_inf;
                }
            const double mx = v.maxCoeff();
            r[i] = mx == neg_inf ? neg_inf : mx + std::log((v - mx).exp().sum());
        }
    }

    void lse(std::span<const double> h, std::span<double> r) const { lse(h, AxisWeight::one, AxisWeight::one, r); }

private:
    std::vector<double> out_xs_, out_ys_, in_xs_, in_ys_;
    double eps_;
    Eigen::MatrixXd neg_c_;  ///< column i holds -C(i, .) / eps
};

inline SeparableOperator make_operator(const GridSupport& out, const GridSupport& in, double eps) {
    return SeparableOperator(out, in, eps);
}

inline DenseOperator make_operator(const PointSupport& out, const PointSupport& in, double eps) {
    return DenseOperator(out, in, eps);
}

}  // namespace uotv
