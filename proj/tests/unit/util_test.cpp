#include "doctest.h"

#include "labloom/error.hpp"
#include "labloom/hash.hpp"
#include "labloom/iteration.hpp"
#include "labloom/table.hpp"

#include <cmath>
#include <limits>

using namespace labloom;

TEST_SUITE_BEGIN("util");

TEST_CASE("sha256 matches published test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_u64("abc") == 0xba7816bf8f01cfeaULL);
}

TEST_CASE("iteration vectors render and parse") {
  IterationVector v;
  CHECK(v.render() == "root");
  CHECK(IterationVector::parse("root").empty());
  v.entries = {{"outer", 3}, {"inner", 12}};
  CHECK(v.render() == "outer=3.inner=12");
  CHECK(IterationVector::parse(v.render()) == v);
  CHECK(v.innermost_index() == 12);
  CHECK_THROWS_AS(IterationVector::parse("outer"), Error);
  CHECK_THROWS_AS(IterationVector::parse("outer=x"), Error);
}

TEST_CASE("numbers format to their shortest round-trip form") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(2.0) == "2");
  CHECK(format_number(-1.5e-7) == "-1.5e-07");
  for (double v : {1.0 / 3.0, 2.0 / 7.0, 1e300, -4.9e-324}) CHECK(parse_number(format_number(v)) == v);
  CHECK(parse_number(" 3.25") == 3.25);
  CHECK_THROWS_AS(parse_number("1.5x"), Error);
  CHECK_THROWS_AS(parse_number(""), Error);
}

TEST_CASE("tables round-trip through CSV") {
  Table t({"name", "x"});
  t.add_row({"a,b", "1"});
  t.add_row({"say \"hi\"", "2.5"});
  t.add_numeric_row({3, 4});
  const auto text = t.to_csv();
  const auto back = Table::from_csv(text);
  CHECK(back == t);
  CHECK(back.cell(0, 0) == "a,b");
  CHECK(back.column_values("x") == std::vector<double>{1, 2.5, 4});
  CHECK(back.numeric_rows({"x"}).size() == 3);
  CHECK_THROWS_AS(back.column_index("missing"), Error);
  CHECK_THROWS_AS(back.number(0, 0), Error);
  CHECK_THROWS_AS(Table::from_csv("a,b\n1\n"), Error);
}

TEST_CASE("error codes have stable names") {
  CHECK(to_string(ErrorCode::not_found) == "not-found");
  const ParseError e("unexpected token", 3, 7);
  CHECK(e.code() == ErrorCode::parse);
  CHECK(e.line() == 3);
  CHECK(e.column() == 7);
}

TEST_SUITE_END();
