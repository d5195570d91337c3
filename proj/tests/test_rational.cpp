#include <gtest/gtest.h>

#include "condrep/rational.hpp"

using namespace condrep;

TEST(Rational, ParsesFractionsDecimalsAndExponents) {
    EXPECT_EQ(parse_rational("3/8"), Rational(3, 8));
    EXPECT_EQ(parse_rational("-3/8"), Rational(-3, 8));
    EXPECT_EQ(parse_rational("0.375"), Rational(3, 8));
    EXPECT_EQ(parse_rational("1.5e-3"), Rational(3, 2000));
    EXPECT_EQ(parse_rational("2E2"), Rational(200));
    EXPECT_EQ(parse_rational(" 7 "), Rational(7));
}

TEST(Rational, RejectsMalformedLiterals) {
    EXPECT_THROW(parse_rational(""), InvalidInput);
    EXPECT_THROW(parse_rational("1/0"), InvalidInput);
    EXPECT_THROW(parse_rational("abc"), InvalidInput);
    EXPECT_THROW(parse_rational("1e"), InvalidInput);
    EXPECT_THROW(parse_rational("."), InvalidInput);
}

TEST(Rational, FormatsTerminatingAsDecimal) {
    EXPECT_EQ(to_string(Rational(3, 8)), "0.375");
    EXPECT_EQ(to_string(Rational(-1, 4)), "-0.25");
    EXPECT_EQ(to_string(Rational(5)), "5");
    EXPECT_EQ(to_string(Rational(1, 3)), "1/3");
    EXPECT_EQ(to_string(Rational(21, 20)), "1.05");
}

TEST(Rational, RoundTripsThroughText) {
    for (auto r : {Rational(1, 7), Rational(-22, 5), Rational(1, 1024), Rational(123456789, 1000)})
        EXPECT_EQ(parse_rational(to_string(r)), r);
}

TEST(Rational, DoubleConversions) {
    EXPECT_EQ(rational_from_double_decimal(0.1), Rational(1, 10));
    EXPECT_EQ(rational_from_double_exact(0.5), Rational(1, 2));
    EXPECT_NE(rational_from_double_exact(0.1), Rational(1, 10));
    EXPECT_DOUBLE_EQ(to_double(rational_from_double_exact(0.1)), 0.1);
    EXPECT_EQ(pow4_inv(2), Rational(1, 16));
    EXPECT_EQ(pow2_inv(-3), Rational(8));
}
