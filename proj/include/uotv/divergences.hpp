#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "uotv/field.hpp"

namespace uotv {

enum class DivergenceKind { kl, tv };

inline std::string_view to_string(DivergenceKind k) { return k == DivergenceKind::kl ? "kl" : "tv"; }

inline DivergenceKind parse_divergence(std::string_view s) {
    if (s == "kl" || s == "KL") return DivergenceKind::kl;
    if (s == "tv" || s == "TV") return DivergenceKind::tv;
    throw std::invalid_argument("unknown penalty '" + std::string(s) + "' (expected kl or tv)");
}

/// KL(lambda | gamma) = sum lambda (log(lambda/gamma) - 1) + sum gamma, with 0 log 0 = 0.
/// Returns +inf when lambda has mass where gamma has none.
inline double kl_divergence(std::span<const double> lambda, std::span<const double> gamma) {
    if (lambda.size() != gamma.size()) throw std::invalid_argument("kl_divergence: size mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < lambda.size(); ++k) {
        const double l = lambda[k];
        const double g = gamma[k];
        if (g == 0.0) {
            if (l > 0.0) return std::numeric_limits<double>::infinity();
            continue;
        }
        acc += g;
        if (l > 0.0) acc += l * (std::log(l / g) - 1.0);
    }
    return acc;
}

/// TV(lambda | gamma) = sum |lambda - gamma| over gamma's support, +inf off it.
inline double tv_divergence(std::span<const double> lambda, std::span<const double> gamma) {
    if (lambda.size() != gamma.size()) throw std::invalid_argument("tv_divergence: size mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < lambda.size(); ++k) {
        if (gamma[k] == 0.0) {
            if (lambda[k] > 0.0) return std::numeric_limits<double>::infinity();
            continue;
        }
        acc += std::abs(lambda[k] - gamma[k]);
    }
    return acc;
}

inline double kl_divergence(const DensityField& lambda, const DensityField& gamma) {
    if (!(lambda.grid() == gamma.grid())) throw std::invalid_argument("kl_divergence: grid mismatch");
    return kl_divergence(std::span<const double>(lambda.weights()), std::span<const double>(gamma.weights()));
}

inline double tv_divergence(const DensityField& lambda, const DensityField& gamma) {
    if (!(lambda.grid() == gamma.grid())) throw std::invalid_argument("tv_divergence: grid mismatch");
    return tv_divergence(std::span<const double>(lambda.weights()), std::span<const double>(gamma.weights()));
}

inline double divergence(DivergenceKind kind, std::span<const double> lambda, std::span<const double> gamma) {
    return kind == DivergenceKind::kl ? kl_divergence(lambda, gamma) : tv_divergence(lambda, gamma);
}

}  // namespace uotv
