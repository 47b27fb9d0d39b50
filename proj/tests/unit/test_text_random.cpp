#include <doctest.h>

#include <algorithm>
#include <set>

#include "tabrag/random.hpp"
#include "tabrag/text.hpp"

using namespace tabrag;

TEST_CASE("csv parsing handles quotes, escapes and line breaks") {
  const auto r = parse_csv("a,b\n\"x,1\",\"say \"\"hi\"\"\"\n\"two\nlines\",3\n");
  REQUIRE(r.size() == 3);
  CHECK(r[1][0] == "x,1");
  CHECK(r[1][1] == "say \"hi\"");
  CHECK(r[2][0] == "two\nlines");
  CHECK(r[2][1] == "3");
}

TEST_CASE("csv parsing skips a BOM and tolerates CRLF") {
  const auto r = parse_csv("\xEF\xBB\xBFh1,h2\r\n1,2\r\n");
  REQUIRE(r.size() == 2);
  CHECK(r[0][0] == "h1");
  CHECK(r[1][1] == "2");
}

TEST_CASE("csv_line quotes only when needed") {
  CHECK(csv_line({"a", "b,c", "d\"e"}) == "a,\"b,c\",\"d\"\"e\"\n");
  CHECK(parse_csv(csv_line({"a", "b,c", "d\"e", "x\ny"}))[0] == CsvRecord{"a", "b,c", "d\"e", "x\ny"});
}

TEST_CASE("parse_number accepts whole decimal strings only") {
  CHECK(parse_number(" 42.5 ").value() == 42.5);
  CHECK(parse_number("-1e3").value() == -1000.0);
  CHECK_FALSE(parse_number("abc"));
  CHECK_FALSE(parse_number("12abc"));
  CHECK_FALSE(parse_number(""));
  CHECK_FALSE(parse_number("nan"));
  CHECK_FALSE(parse_number("inf"));
}

TEST_CASE("format_number is the shortest round trip") {
  CHECK(format_number(1.5) == "1.5");
  CHECK(format_number(42.0) == "42");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(std::nan("")) == "");
  for (double v : {1.0 / 3.0, 2.0 / 7.0, 1e-300, 123456789.123}) {
    CHECK(parse_number(format_number(v)).value() == v);
  }
}

TEST_CASE("rng is deterministic and derive_seed separates streams") {
  Rng a(7);
  Rng b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  CHECK(derive_seed(1, "split") == derive_seed(1, "split"));
  CHECK(derive_seed(1, "split") != derive_seed(1, "subset"));
  CHECK(derive_seed(1, "split") != derive_seed(2, "split"));
}

TEST_CASE("uniform and below stay in range") {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.below(7) < 7);
  }
}

TEST_CASE("normal has roughly unit moments") {
  Rng r(11);
  double s = 0.0;
  double ss = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    ss += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(ss / n - 1.0) < 0.02);
}

TEST_CASE("permutation and sampling") {
  auto p = permutation(50, 9);
  CHECK(p == permutation(50, 9));
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == i);

  std::vector<std::size_t> pop(100);
  for (std::size_t i = 0; i < pop.size(); ++i) pop[i] = i * 3;
  const auto s = sample_without_replacement(pop, 10, 5);
  CHECK(s.size() == 10);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 10);
  for (auto v : s) CHECK(v % 3 == 0);
  CHECK(s == sample_without_replacement(pop, 10, 5));
  CHECK(sample_without_replacement(pop, 500, 5) == pop);
}
