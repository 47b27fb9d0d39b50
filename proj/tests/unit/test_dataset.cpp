#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "tabrag/dataset.hpp"
#include "tabrag/error.hpp"
#include "tabrag/text.hpp"

using namespace tabrag;

namespace {

const char* kSchema = R"({"columns": [
  {"name": "f1", "kind": "numerical", "role": "feature"},
  {"name": "f2", "kind": "categorical", "role": "feature"},
  {"name": "y", "kind": "categorical", "role": "label"}],
  "task": "classification"})";

std::set<std::size_t> as_set(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

void check_disjoint(const SplitAssignment& s) {
  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (auto r : *part) CHECK(all.insert(r).second);
  }
}

}  // namespace

TEST_CASE("load_dataset with a three-column schema") {
  testing::TempDir dir;
  write_text_file(dir / "t.csv", "f1,f2,y\n1.5,red,A\nabc,blue,B\n3,,A\n");
  write_text_file(dir / "s.json", kSchema);
  const Dataset d = load_dataset(dir / "t.csv", dir / "s.json");
  CHECK(d.num_rows() == 3);
  CHECK(d.feature_columns().size() == 2);
  CHECK(d.task() == TaskKind::kClassification);
  CHECK(d.class_labels() == std::vector<std::string>{"A", "B"});
  // Numerical parse failure becomes a missing marker.
  CHECK(is_missing(d.column(0).numbers[1]));
  CHECK(d.column(0).numbers[0] == 1.5);
  // Empty categorical cell is its own category.
  CHECK(d.column(1).categories == std::vector<std::string>{"red", "blue", ""});
  CHECK(d.label_class(1) == 1);
}

TEST_CASE("schema errors") {
  CHECK_THROWS_AS(parse_schema(R"({"columns": [
      {"name": "a", "kind": "numerical", "role": "label"},
      {"name": "b", "kind": "numerical", "role": "label"}]})"),
                  InputError);
  CHECK_THROWS_AS(parse_schema(R"({"columns": [{"name": "a", "kind": "numerical", "role": "feature"}]})"),
                  InputError);
  CHECK_THROWS_AS(parse_schema(R"({"columns": [
      {"name": "a", "kind": "numerical", "role": "feature"},
      {"name": "a", "kind": "numerical", "role": "label"}]})"),
                  InputError);
  CHECK_THROWS_AS(parse_schema("not json"), InputError);
}

TEST_CASE("table errors") {
  const TableSchema schema = parse_schema(kSchema);
  CHECK_THROWS_AS(dataset_from_csv("", schema), InputError);
  CHECK_THROWS_AS(dataset_from_csv("f1,f2,y\n", schema), InputError);
  CHECK_THROWS_AS(dataset_from_csv("f1,zz,y\n1,a,b\n", schema), InputError);
  CHECK_THROWS_AS(dataset_from_csv("f1,f2,y\n1,a\n", schema), InputError);
}

TEST_CASE("header order may differ from the schema") {
  const Dataset d = dataset_from_csv("y,f2,f1\nA,red,1\nB,blue,2\n", parse_schema(kSchema));
  CHECK(d.column(0).numbers[1] == 2.0);
  CHECK(d.cell_text(0, 1) == "red");
}

TEST_CASE("regression labels must be numbers") {
  const TableSchema schema = parse_schema(R"({"columns": [
      {"name": "x", "kind": "numerical", "role": "feature"},
      {"name": "y", "kind": "numerical", "role": "label"}], "task": "regression"})");
  CHECK(dataset_from_csv("x,y\n1,2\n", schema).label_value(0) == 2.0);
  CHECK_THROWS_AS(dataset_from_csv("x,y\n1,oops\n", schema), InputError);
}

TEST_CASE("task follows the label kind when absent") {
  const TableSchema s = parse_schema(R"({"columns": [
      {"name": "x", "kind": "numerical", "role": "feature"},
      {"name": "y", "kind": "numerical", "role": "label"}]})");
  CHECK(s.task == TaskKind::kRegression);
}

TEST_CASE("csv round trip is cell-identical") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset d = testing::random_mixed(seed, 60, 6, seed % 2 == 0);
    const TableSchema schema{d.schema(), d.task()};
    const Dataset back = dataset_from_csv(dataset_to_csv(d), schema);
    CHECK(back == d);
    testing::TempDir dir;
    write_dataset(d, dir / "d.csv");
    write_text_file(dir / "s.json", schema_to_json(schema));
    CHECK(load_dataset(dir / "d.csv", dir / "s.json") == d);
  }
}

TEST_CASE("make_split sizes and determinism") {
  std::vector<double> x(100, 1.0);
  const Dataset d = testing::regression_1d(x, x);
  const auto s = make_split(d, {0.8, 0.1, 0.1}, 3);
  CHECK(s.train.size() == 80);
  CHECK(s.validation.size() == 10);
  CHECK(s.test.size() == 10);
  check_disjoint(s);
  CHECK(s == make_split(d, {0.8, 0.1, 0.1}, 3));
  CHECK(s != make_split(d, {0.8, 0.1, 0.1}, 4));
  CHECK(std::is_sorted(s.train.begin(), s.train.end()));
}

TEST_CASE("make_split caps train at 100000") {
  std::vector<double> x(200000, 1.0);
  const Dataset d = testing::regression_1d(x, x);
  const auto s = make_split(d, {0.8, 0.1, 0.1}, 1);
  CHECK(s.train.size() == 100000);
  CHECK(s.test.size() <= 512);
  check_disjoint(s);
}

TEST_CASE("make_split downsamples the test set to 512") {
  std::vector<double> x(10000, 1.0);
  const Dataset d = testing::regression_1d(x, x);
  const auto a = make_split(d, {0.0, 0.0, 1.0}, 2);
  const auto b = make_split(d, {0.0, 0.0, 1.0}, 2);
  CHECK(a.test.size() == 512);
  CHECK(a.test == b.test);
}

TEST_CASE("make_split preconditions") {
  const Dataset tiny = testing::regression_1d({1, 2}, {1, 2});
  CHECK_THROWS_AS(make_split(tiny, {0.8, 0.1, 0.1}, 0), ContractError);
  const Dataset d = testing::regression_1d({1, 2, 3, 4}, {1, 2, 3, 4});
  CHECK_THROWS_AS(make_split(d, {0.5, 0.1, 0.1}, 0), ContractError);
  CHECK_THROWS_AS(make_split(d, {0.8, 0.1, 0.1}, 0, 0, 10), ContractError);
}

TEST_CASE("load_external_split") {
  const auto s = load_external_split(4, {0, 1}, {2}, {3}, 0);
  CHECK(s.train == std::vector<std::size_t>{0, 1});
  CHECK(s.validation == std::vector<std::size_t>{2});
  CHECK(s.test == std::vector<std::size_t>{3});
  CHECK_THROWS_AS(load_external_split(4, {0, 1}, {}, {1}, 0), InputError);
  CHECK_THROWS_AS(load_external_split(4, {0, 9}, {}, {1}, 0), InputError);

  std::vector<std::size_t> test(600);
  for (std::size_t i = 0; i < test.size(); ++i) test[i] = i + 10;
  const auto a = load_external_split(1000, {0, 1}, {}, test, 5);
  const auto b = load_external_split(1000, {0, 1}, {}, test, 5);
  CHECK(a.test.size() == 512);
  CHECK(a.test == b.test);
  const auto all = as_set(test);
  for (auto r : a.test) CHECK(all.count(r) == 1);
}

TEST_CASE("split file round trip") {
  testing::TempDir dir;
  const auto s = load_external_split(10, {0, 1, 2, 3}, {4}, {5, 6}, 7);
  write_text_file(dir / "split.json", split_to_json(s));
  CHECK(load_split_file(dir / "split.json", 10) == s);
  write_text_file(dir / "bad.json", R"({"train": [0], "test": [0]})");
  CHECK_THROWS_AS(load_split_file(dir / "bad.json", 10), InputError);
}
