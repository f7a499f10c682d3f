#include <gtest/gtest.h>

#include <sstream>

#include "helpers.hpp"

using namespace uotv;

TEST(Field, RoundTripIsExact) {
    DensityField f(Grid2D{3, 2, -1.5, 0.25, 0.5, 2.0});
    f.set(0, 0, 1.0 / 3.0);
    f.set(2, 1, 1e-300);
    f.set(1, 1, 12345.678);
    std::stringstream ss;
    write_field(ss, f);
    EXPECT_EQ(parse_field(ss), f);
}

TEST(Field, RowsRunSouthToNorth) {
    std::istringstream in("uotfield v1\n2 2\n1 1 1 1\n1 2\n3 4\n");
    const auto f = parse_field(in);
    EXPECT_EQ(f(0, 0), 1.0);
    EXPECT_EQ(f(1, 0), 2.0);
    EXPECT_EQ(f(0, 1), 3.0);
    EXPECT_EQ(f.grid().x(1), 2.0);
}

TEST(Field, ParseErrorsNameTheLine) {
    auto error_of = [](const std::string& text) {
        std::istringstream in(text);
        try {
            parse_field(in);
        } catch (const field_parse_error& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_EQ(error_of("uotfield v2\n"), "line 1: expected 'uotfield v1'");
    EXPECT_EQ(error_of("uotfield v1\n2\n"), "line 2: expected 'nx ny'");
    EXPECT_EQ(error_of("uotfield v1\n1 1\n1 1 0 1\n"), "line 3: grid spacing must be positive");
    EXPECT_EQ(error_of("uotfield v1\n2 1\n1 1 1 1\n1 -2\n"), "line 4: negative weight at row 1");
    EXPECT_EQ(error_of("uotfield v1\n2 1\n1 1 1 1\n1 nan\n"), "line 4: non-finite weight at row 1");
    EXPECT_EQ(error_of("uotfield v1\n2 1\n1 1 1 1\n1\n"), "line 4: row 1 has 1 values, expected 2");
    EXPECT_EQ(error_of("uotfield v1\n1 1\n1 1 1 1\n1\n2\n"), "line 5: trailing data after last row");
    EXPECT_EQ(error_of("uotfield v1\n1 2\n1 1 1 1\n1\n"), "line 5: unexpected end of file, expected data row");
}

TEST(Field, RejectsInvalidWeights) {
    DensityField f(unit_grid(2, 2));
    EXPECT_THROW(f.set(0, 0, -1.0), std::invalid_argument);
    EXPECT_THROW(DensityField(unit_grid(2, 2), {1.0, 2.0}), std::invalid_argument);
}

TEST(Field, ScalingUsesMeanMass) {
    DensityField a(unit_grid(4, 2)), b(unit_grid(4, 2));
    a.set(0, 0, 3.0);
    b.set(1, 1, 1.0);
    const auto s = make_scaling(a, b, 10.0);
    EXPECT_DOUBLE_EQ(s.M, 2.0);
    EXPECT_DOUBLE_EQ(s.L, 10.0);
    EXPECT_DOUBLE_EQ(default_length(Grid2D{4, 2, 0, 0, 1.0, 3.0}), 6.0);
    EXPECT_THROW(make_scaling(DensityField(unit_grid(2, 2)), DensityField(unit_grid(2, 2)), 1.0), std::invalid_argument);
}

TEST(Support, CropsToPositiveBoundingBox) {
    DensityField f(unit_grid(10, 8));
    f.set(2, 3, 1.0);
    f.set(5, 6, 2.0);
    const auto s = make_grid_support(f, ScalingContext{10.0, 3.0});
    EXPECT_EQ(s.nx, 4u);
    EXPECT_EQ(s.ny, 4u);
    EXPECT_DOUBLE_EQ(s.mass, 1.0);
    EXPECT_DOUBLE_EQ(s.raw_x(0), 3.0);
    EXPECT_DOUBLE_EQ(s.x(0), 0.3);
    EXPECT_EQ(s.grid_index(s.size() - 1), f.grid().index(5, 6));
    EXPECT_EQ(s.log_weights[1], neg_inf);

    const auto p = make_point_support(f, ScalingContext{10.0, 3.0});
    EXPECT_EQ(p.size(), 2u);
    EXPECT_DOUBLE_EQ(p.raw_y(1), 7.0);
    EXPECT_EQ(make_grid_support(DensityField(unit_grid(3, 3)), ScalingContext{}).size(), 0u);
}
