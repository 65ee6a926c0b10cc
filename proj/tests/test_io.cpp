#include "lcmi/io.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace lcmi {
namespace {

TEST(Io, ShortestFormatRoundTrips) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-30.0, 30.0);
    for (int i = 0; i < 5000; ++i) {
        const double v = std::ldexp(U(rng), static_cast<int>(U(rng)));
        EXPECT_EQ(parse_double(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_TRUE(std::isnan(parse_double("NA")));
    EXPECT_TRUE(std::isnan(parse_double(format_double(std::nan("")))));
    EXPECT_THROW(parse_double("1.2x"), Error);
}

TEST(Io, CsvWriterRoundTrip) {
    std::ostringstream out;
    {
        CsvWriter w(out, {"age", "theta", "mean"});
        w.cell(35.0).cell(0.2).cell(-1.0 / 3.0).end_row();
        w.cell(36.0).cell(1.0).cell(1e-300).end_row();
    }
    std::istringstream in(out.str());
    const CsvTable t = read_csv(in);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.column("mean"), 2);
    EXPECT_EQ(parse_double(t.rows[0][2]), -1.0 / 3.0);
    EXPECT_EQ(parse_double(t.rows[1][2]), 1e-300);
}

TEST(Io, RejectsRaggedRows) {
    std::istringstream in("a,b\n1,2\n3\n");
    EXPECT_THROW(read_csv(in), Error);
}

TEST(Io, RangeListAndInterval) {
    const auto r = parse_range("0:1:0.05");
    ASSERT_EQ(r.size(), 21u);
    EXPECT_DOUBLE_EQ(r.back(), 1.0);
    EXPECT_EQ(parse_list("3,5,10"), (std::vector<double>{3, 5, 10}));
    const auto iv = parse_interval("-0.1454:0.1454");
    EXPECT_EQ(iv.first, -0.1454);
    EXPECT_EQ(iv.second, 0.1454);
    EXPECT_THROW(parse_range("1:0:0.1"), Error);
    EXPECT_THROW(parse_interval("2:1"), Error);
}

}  // namespace
}  // namespace lcmi
