#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace uotv {

/// Regular lattice of cell centers. Index i runs west to east, j south to north,
/// both zero-based in code; the first center sits at (x0, y0).
struct Grid2D {
    std::size_t nx = 1;
    std::size_t ny = 1;
    double x0 = 1.0;
    double y0 = 1.0;
    double dx = 1.0;
    double dy = 1.0;

    [[nodiscard]] std::size_t size() const noexcept { return nx * ny; }
    [[nodiscard]] double x(std::size_t i) const noexcept { return x0 + static_cast<double>(i) * dx; }
    [[nodiscard]] double y(std::size_t j) const noexcept { return y0 + static_cast<double>(j) * dy; }
    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const noexcept { return j * nx + i; }

    void validate() const {
        if (nx < 1 || ny < 1) throw std::invalid_argument("grid must have at least one point per axis");
        if (!(dx > 0.0) || !(dy > 0.0)) throw std::invalid_argument("grid spacing must be positive");
        if (!std::isfinite(x0) || !std::isfinite(y0) || !std::isfinite(dx) || !std::isfinite(dy))
            throw std::invalid_argument("grid header must be finite");
    }

    friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

/// The 200x200 domain used by the idealised cases, indexed (1,1) to (200,200).
inline Grid2D unit_grid(std::size_t nx, std::size_t ny) { return Grid2D{nx, ny, 1.0, 1.0, 1.0, 1.0}; }

/// Nonnegative intensities on a grid, row-major with the southern row first.
class DensityField {
public:
    DensityField() = default;

    explicit DensityField(Grid2D grid) : grid_(grid), weights_(grid.size(), 0.0) { grid_.validate(); }

    DensityField(Grid2D grid, std::vector<double> weights) : grid_(grid), weights_(std::move(weights)) {
        grid_.validate();
        if (weights_.size() != grid_.size())
            throw std::invalid_argument("weight count " + std::to_string(weights_.size()) + " does not match grid size " +
                                        std::to_string(grid_.size()));
        for (double w : weights_) {
            if (!std::isfinite(w)) throw std::invalid_argument("non-finite weight");
            if (w < 0.0) throw std::invalid_argument("negative weight");
        }
    }

    [[nodiscard]] const Grid2D& grid() const noexcept { return grid_; }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
    [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }

    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return weights_[grid_.index(i, j)]; }

    void set(std::size_t i, std::size_t j, double w) {
        if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("weights must be finite and nonnegative");
        weights_[grid_.index(i, j)] = w;
    }

    friend bool operator==(const DensityField&, const DensityField&) = default;

private:
    Grid2D grid_{};
    std::vector<double> weights_ = std::vector<double>(1, 0.0);
};

inline double total_mass(const DensityField& field) {
    return std::accumulate(field.weights().begin(), field.weights().end(), 0.0);
}

/// Length and mass units removed before solving. Reported costs multiply by L^2;
/// the mass scale is never reintroduced.
struct ScalingContext {
    double L = 1.0;
    double M = 1.0;

    void validate() const {
        if (!(L > 0.0) || !std::isfinite(L)) throw std::invalid_argument("length scale must be positive");
        if (!(M > 0.0) || !std::isfinite(M)) throw std::invalid_argument("mass scale must be positive");
    }
};

/// M is the mean total mass of the given fields.
inline ScalingContext make_scaling(const std::vector<const DensityField*>& fields, double L) {
    if (fields.empty()) throw std::invalid_argument("make_scaling needs at least one field");
    double sum = 0.0;
    for (const auto* f : fields) sum += total_mass(*f);
    const double M = sum / static_cast<double>(fields.size());
    if (!(M > 0.0)) throw std::invalid_argument("no mass: mass scale undefined for null fields");
    ScalingContext s{L, M};
    s.validate();
    return s;
}

inline ScalingContext make_scaling(const DensityField& a, const DensityField& b, double L) {
    return make_scaling(std::vector<const DensityField*>{&a, &b}, L);
}

/// Largest physical extent of the grid, the default length scale.
inline double default_length(const Grid2D& grid) {
    return std::max(static_cast<double>(grid.nx) * grid.dx, static_cast<double>(grid.ny) * grid.dy);
}

class field_parse_error : public std::runtime_error {
public:
    field_parse_error(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

template <class T>
bool parse_number(std::string_view tok, T& value) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, value);
    return ec == std::errc() && ptr == end;
}

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace detail

/// Parses the `uotfield v1` text format.
inline DensityField parse_field(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&](const char* what) -> const std::string& {
        if (!std::getline(in, line)) throw field_parse_error(lineno + 1, std::string("unexpected end of file, expected ") + what);
        ++lineno;
        return line;
    };

    {
        auto toks = detail::split_ws(next_line("header"));
        if (toks.size() != 2 || toks[0] != "uotfield" || toks[1] != "v1")
            throw field_parse_error(lineno, "expected 'uotfield v1'");
    }

    Grid2D grid;
    {
        auto toks = detail::split_ws(next_line("grid size"));
        if (toks.size() != 2 || !detail::parse_number(toks[0], grid.nx) || !detail::parse_number(toks[1], grid.ny))
            throw field_parse_error(lineno, "expected 'nx ny'");
        if (grid.nx < 1 || grid.ny < 1) throw field_parse_error(lineno, "nx and ny must be positive");
    }
    {
        auto toks = detail::split_ws(next_line("grid origin and spacing"));
        if (toks.size() != 4 || !detail::parse_number(toks[0], grid.x0) || !detail::parse_number(toks[1], grid.y0) ||
            !detail::parse_number(toks[2], grid.dx) || !detail::parse_number(toks[3], grid.dy))
            throw field_parse_error(lineno, "expected 'x0 y0 dx dy'");
        try {
            grid.validate();
        } catch (const std::invalid_argument& e) {
            throw field_parse_error(lineno, e.what());
        }
    }

    std::vector<double> weights;
    weights.reserve(grid.size());
    for (std::size_t row = 1; row <= grid.ny; ++row) {
        auto toks = detail::split_ws(next_line("data row"));
        if (toks.size() != grid.nx)
            throw field_parse_error(lineno, "row " + std::to_string(row) + " has " + std::to_string(toks.size()) +
                                                " values, expected " + std::to_string(grid.nx));
        for (auto tok : toks) {
            double w = 0.0;
            if (!detail::parse_number(tok, w))
                throw field_parse_error(lineno, "malformed value '" + std::string(tok) + "' at row " + std::to_string(row));
            if (!std::isfinite(w)) throw field_parse_error(lineno, "non-finite weight at row " + std::to_string(row));
            if (w < 0.0) throw field_parse_error(lineno, "negative weight at row " + std::to_string(row));
            weights.push_back(w);
        }
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (!detail::split_ws(line).empty()) throw field_parse_error(lineno, "trailing data after last row");
    }
    return DensityField(grid, std::move(weights));
}

inline DensityField load_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open field file '" + path + "'");
    return parse_field(in);
}

/// Writes shortest round-trip decimal representations, so reloads are bit-exact.
inline void write_field(std::ostream& out, const DensityField& field) {
    const auto& g = field.grid();
    out << "uotfield v1\n" << g.nx << ' ' << g.ny << '\n';
    out << detail::format_double(g.x0) << ' ' << detail::format_double(g.y0) << ' ' << detail::format_double(g.dx) << ' '
        << detail::format_double(g.dy) << '\n';
    for (std::size_t j = 0; j < g.ny; ++j) {
        for (std::size_t i = 0; i < g.nx; ++i) {
            if (i) out << ' ';
            out << detail::format_double(field(i, j));
        }
        out << '\n';
    }
}

inline void save_field(const std::string& path, const DensityField& field) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write field file '" + path + "'");
    write_field(out, field);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace uotv
