#include <doctest.h>

#include <atomic>
#include <cmath>
#include <sstream>

#include "sciline/common.hpp"

using namespace sciline;

TEST_SUITE("common") {
    TEST_CASE("format_double round trips and folds edge cases") {
        CHECK(format_double(0.1) == "0.1");
        CHECK(format_double(-0.0) == "0");
        CHECK(format_double(std::nan("")) == "NA");
        CHECK(format_double(std::optional<double>{}) == "NA");
        CHECK(format_double(1e308 * 10) == "NA");
        const double x = 0.1 + 0.2;
        CHECK(std::stod(format_double(x)) == x);
        CHECK(format_fixed(-0.0001, 2) == "0.00");
        CHECK(format_fixed(2.345, 1) == "2.3");
    }

    TEST_CASE("csv quoting") {
        CHECK(csv_escape("plain") == "plain");
        CHECK(csv_escape("a,b") == "\"a,b\"");
        CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
        const auto f = csv_split("x,\"a,b\",\"q\"\"q\",");
        REQUIRE(f.size() == 4);
        CHECK(f[1] == "a,b");
        CHECK(f[2] == "q\"q");
        CHECK(f[3].empty());
        std::ostringstream o;
        CsvWriter w(o);
        w.comment("seed=1");
        w.row({"a", "b,c"});
        CHECK(o.str() == "# seed=1\na,\"b,c\"\n");
    }

    TEST_CASE("dates") {
        CHECK(parse_iso_date("1970-01-01") == 0);
        CHECK(*parse_iso_date("2020-03-01") - *parse_iso_date("2020-01-01") == 60);
        CHECK(*parse_iso_date("2000-03-01") - *parse_iso_date("2000-02-28") == 2);  // leap year
        CHECK_FALSE(parse_iso_date("2021-02-29").has_value());
        CHECK_FALSE(parse_iso_date("2021-13-01").has_value());
        CHECK_FALSE(parse_iso_date("junk").has_value());
        CHECK(format_iso_date(*parse_iso_date("1999-12-31")) == "1999-12-31");
        CHECK(format_iso_date(*parse_iso_date("1850-06-15")) == "1850-06-15");
    }

    TEST_CASE("seeded samplers are reproducible") {
        Rng a(mix_seed(5, 1)), b(mix_seed(5, 1)), c(mix_seed(5, 2));
        CHECK(uniform01(a) == uniform01(b));
        CHECK(standard_normal(a) == standard_normal(b));
        CHECK(uniform01(b) != uniform01(c));
        CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
        CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    }

    TEST_CASE("sampler moments") {
        Rng r(123);
        double s = 0, s2 = 0, p = 0, pl = 0;
        const int n = 200000;
        for (int i = 0; i < n; ++i) {
            const double z = standard_normal(r);
            s += z;
            s2 += z * z;
            p += poisson_draw(r, 3.5);
            pl += poisson_draw(r, 40.0);
            const double u = uniform01(r);
            REQUIRE(u >= 0.0);
            REQUIRE(u < 1.0);
        }
        CHECK(std::abs(s / n) < 0.01);
        CHECK(std::abs(s2 / n - 1.0) < 0.02);
        CHECK(std::abs(p / n - 3.5) < 0.03);
        CHECK(std::abs(pl / n - 40.0) < 0.1);
        std::array<int, 4> hits{};
        for (int i = 0; i < 40000; ++i) ++hits[uniform_index(r, 4)];
        for (int h : hits) CHECK(std::abs(h - 10000) < 300);
        CHECK_THROWS_AS(uniform_index(r, 0), Error);
    }

    TEST_CASE("parallel_for covers each index once for any worker count") {
        for (unsigned t : {1u, 2u, 8u}) {
            set_thread_count(t);
            std::vector<int> seen(1000, 0);
            parallel_for(seen.size(), [&](std::size_t i) { seen[i] += 1; });
            for (int v : seen) CHECK(v == 1);
            // nested loops run serially inside workers
            std::vector<std::atomic<int>> nested(50);
            parallel_for(10, [&](std::size_t i) {
                parallel_for(5, [&](std::size_t j) { nested[i * 5 + j].fetch_add(1); });
            });
            for (auto& v : nested) CHECK(v.load() == 1);
        }
        set_thread_count(0);
    }

    TEST_CASE("small statistics") {
        CHECK(mean({1, 2, 3, 6}) == 3.0);
        CHECK(median({3, 1, 2}) == 2.0);
        CHECK(median({4, 1, 3, 2}) == 2.5);
        CHECK(population_stddev({-0.5, 0.0}) == 0.25);
        CHECK(population_stddev({7}) == 0.0);
    }
}
