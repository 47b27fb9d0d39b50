#include <doctest.h>

#include <memory>

#include "helpers.hpp"
#include "tabrag/error.hpp"
#include "tabrag/predictors.hpp"
#include "tabrag/prompt.hpp"
#include "tabrag/retrieval.hpp"

using namespace tabrag;

namespace {

std::shared_ptr<const Dataset> share(Dataset d) { return std::make_shared<const Dataset>(std::move(d)); }

RetrievedContext context_of(std::vector<std::size_t> rows) {
  RetrievedContext ctx;
  ctx.rows = std::move(rows);
  ctx.distances.assign(ctx.rows.size(), 0.0);
  ctx.provenance.assign(ctx.rows.size(), Provenance::kMerged);
  return ctx;
}

std::shared_ptr<const Dataset> colors() {
  DatasetBuilder b({{"size", ColumnKind::kNumerical, ColumnRole::kFeature},
                    {"color", ColumnKind::kCategorical, ColumnRole::kFeature},
                    {"label", ColumnKind::kCategorical, ColumnRole::kLabel}},
                   TaskKind::kClassification);
  b.add_row({1.5, std::string("red"), std::string("A")});
  b.add_row({2.0, std::string("blue"), std::string("A")});
  b.add_row({std::monostate{}, std::string(""), std::string("B")});
  b.add_row({4.0, std::string("red"), std::string("C")});
  b.add_row({5.25, std::string("blue"), std::string("D")});
  return share(std::move(b).build());
}

}  // namespace

TEST_CASE("knn frequencies and means") {
  const auto data = colors();
  const auto pool = ContextPool::build(data, {0, 1, 2, 3, 4});
  const auto rec = knn_predict(pool, context_of({0, 1, 2}), 4);
  CHECK(rec.class_probabilities[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(rec.class_probabilities[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(rec.class_probabilities[2] == 0.0);
  CHECK(rec.row == 4);

  const auto empty = knn_predict(pool, context_of({}));
  CHECK(empty.class_probabilities == std::vector<double>{0.25, 0.25, 0.25, 0.25});
  CHECK(empty.context_size == 0);

  const auto reg = share(testing::regression_1d({0, 0, 0, 0}, {1, 2, 3, 10}));
  const auto rpool = ContextPool::build(reg, {0, 1, 2, 3});
  CHECK(knn_predict(rpool, context_of({0, 1, 2})).estimate == 2.0);
  CHECK(knn_predict(rpool, context_of({})).estimate == 4.0);
}

TEST_CASE("knn equals the label multiset statistics") {
  const Dataset d = testing::random_mixed(5, 100, 3, true);
  const auto data = share(d);
  const auto pool = ContextPool::build(data, testing::iota_rows(100));
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto rows = sample_without_replacement(testing::iota_rows(100), 1 + rng.below(30), rng.next());
    const auto rec = knn_predict(pool, context_of(rows));
    std::vector<double> count(d.num_classes(), 0.0);
    for (auto r : rows) count[d.label_class(r)] += 1.0;
    double total = 0.0;
    for (std::size_t c = 0; c < count.size(); ++c) {
      CHECK(rec.class_probabilities[c] == count[c] / static_cast<double>(rows.size()));
      total += rec.class_probabilities[c];
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("ingest predictions") {
  const auto data = colors();
  const std::vector<std::size_t> test{1, 3};
  const auto recs = parse_predictions("row_index,p_A,p_B,p_C,p_D\n3,0.7,0.3,0,0\n", *data, test, "ext");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].row == 3);
  CHECK(recs[0].class_probabilities == std::vector<double>{0.7, 0.3, 0, 0});
  const auto renorm = parse_predictions("row_index,p_B,p_A,p_C,p_D\n1,0.49,0.5,0,0\n", *data, test, "ext");
  CHECK(renorm[0].class_probabilities[0] == doctest::Approx(0.5 / 0.99));
  double s = 0.0;
  for (double p : renorm[0].class_probabilities) s += p;
  CHECK(std::abs(s - 1.0) <= 1e-9);
  CHECK_THROWS_AS(parse_predictions("row_index,p_A,p_B,p_C,p_D\n1,0.2,0.2,0,0\n", *data, test, "x"), InputError);
  CHECK_THROWS_AS(parse_predictions("row_index,p_A,p_B,p_C,p_D\n2,1,0,0,0\n", *data, test, "x"), InputError);
  CHECK_THROWS_AS(parse_predictions("row_index,p_A,p_B,p_C,p_D\n1,1,0\n", *data, test, "x"), InputError);
  CHECK_THROWS_AS(parse_predictions("row_index,p_A,p_B,p_C,p_Z\n1,1,0,0,0\n", *data, test, "x"), InputError);

  const auto reg = testing::regression_1d({0, 0}, {1, 2});
  const std::vector<std::size_t> rt{0, 1};
  CHECK(parse_predictions("row_index,estimate\n1,42\n", reg, rt, "x")[0].estimate == 42.0);
  CHECK_THROWS_AS(parse_predictions("row_index,estimate\n1,abc\n", reg, rt, "x"), InputError);
}

TEST_CASE("prediction csv round trip") {
  const auto data = colors();
  PredictionRecord r;
  r.row = 2;
  r.class_probabilities = {0.25, 0.25, 0.5, 0.0};
  const std::vector<PredictionRecord> recs{r};
  const std::vector<std::size_t> test{2};
  const auto back = parse_predictions(predictions_to_csv(recs, *data), *data, test, "p");
  CHECK(back[0].class_probabilities == r.class_probabilities);
}

TEST_CASE("ensemble") {
  PredictionRecord a;
  a.row = 0;
  a.class_probabilities = {1.0, 0.0};
  PredictionRecord b = a;
  b.class_probabilities = {0.0, 1.0};
  const std::vector<std::vector<PredictionRecord>> in{{a}, {b}};
  CHECK(ensemble(in)[0].class_probabilities == std::vector<double>{0.5, 0.5});
  const std::vector<std::vector<PredictionRecord>> rev{{b}, {a}};
  CHECK(ensemble(rev)[0].class_probabilities == ensemble(in)[0].class_probabilities);
  const std::vector<std::vector<PredictionRecord>> same{{a}, {a}};
  CHECK(ensemble(same)[0].class_probabilities == a.class_probabilities);

  std::vector<std::vector<PredictionRecord>> reg(3);
  for (int i = 0; i < 3; ++i) {
    PredictionRecord r;
    r.task = TaskKind::kRegression;
    r.estimate = 10.0 * (i + 1);
    reg[i].push_back(r);
  }
  CHECK(ensemble(reg)[0].estimate == 20.0);

  PredictionRecord other = a;
  other.row = 5;
  const std::vector<std::vector<PredictionRecord>> bad{{a}, {other}};
  CHECK_THROWS_AS(ensemble(bad), ContractError);
}

TEST_CASE("prompt rendering") {
  const auto data = colors();
  const auto pool = ContextPool::build(data, {0, 1, 2, 3});
  PromptTemplate tmpl;
  const std::vector<std::size_t> rows{0, 2};
  const std::string text = serialize_prompt(tmpl, pool, rows, pool.query_from_row(4));
  CHECK(text ==
        "Predict the value of label for the last row. Answer with one of: A, B, C, D.\n\n"
        "size: 1.5, color: red, Answer: A\n"
        "size: NA, color: NA, Answer: B\n"
        "size: 5.25, color: blue, Answer:");
  CHECK(text == serialize_prompt(tmpl, pool, rows, pool.query_from_row(4)));

  const std::string zero = serialize_prompt(tmpl, pool, {}, pool.query_from_row(4));
  CHECK(zero ==
        "Predict the value of label for the last row. Answer with one of: A, B, C, D.\n\n"
        "size: 5.25, color: blue, Answer:");

  tmpl.anonymize = true;
  const std::string anon = serialize_prompt(tmpl, pool, rows, pool.query_from_row(4));
  CHECK(anon.find("size") == std::string::npos);
  CHECK(anon.find("color") == std::string::npos);
  CHECK(anon.find("f1: 1.5, f2: red, Answer: A") != std::string::npos);
  CHECK(anon.find("f1: 5.25, f2: blue, Answer:") != std::string::npos);
  CHECK(anon.find("target") != std::string::npos);
}

TEST_CASE("prompt truncation drops the farthest rows") {
  std::vector<double> x;
  std::vector<double> y;
  for (int i = 0; i < 200; ++i) {
    x.push_back(1000.0 + i);
    y.push_back(i);
  }
  const auto data = share(testing::regression_1d(x, y));
  const auto pool = ContextPool::build(data, testing::iota_rows(200));
  PromptTemplate tmpl;
  const auto rows = testing::iota_rows(128);
  const std::size_t budget = 300;
  const Prompt p = build_prompt(tmpl, pool, rows, pool.query_from_row(199), budget);
  CHECK(p.token_estimate <= budget);
  CHECK(p.context_rows.size() < 128);
  CHECK(p.context_rows.size() > 0);
  // Kept rows are a prefix, and one more row would overflow.
  for (std::size_t i = 0; i < p.context_rows.size(); ++i) CHECK(p.context_rows[i] == i);
  const std::vector<std::size_t> one_more(rows.begin(), rows.begin() + static_cast<long>(p.context_rows.size() + 1));
  CHECK(estimate_tokens(tmpl, serialize_prompt(tmpl, pool, one_more, pool.query_from_row(199))) > budget);
  CHECK(p.text == serialize_prompt(tmpl, pool, p.context_rows, pool.query_from_row(199)));

  const Prompt all = build_prompt(tmpl, pool, rows, pool.query_from_row(199));
  CHECK(all.context_rows.size() == 128);
  CHECK_THROWS_AS(build_prompt(tmpl, pool, rows, pool.query_from_row(199), 5), ContractError);
}

TEST_CASE("prompt template file") {
  testing::TempDir dir;
  write_text_file(dir / "t.txt", "{preamble}\n{rows}\n>> {query} {answer_slot}\n");
  const auto tmpl = PromptTemplate::from_file(dir / "t.txt");
  const auto data = colors();
  const auto pool = ContextPool::build(data, {0, 1});
  const std::vector<std::size_t> rows{1};
  const std::string text = serialize_prompt(tmpl, pool, rows, pool.query_from_row(3));
  CHECK(text.substr(text.find('\n') + 1) == "size: 2, color: blue, Answer: A\n>> size: 4, color: red Answer:");
  write_text_file(dir / "bad.txt", "{rows}");
  CHECK_THROWS_AS(PromptTemplate::from_file(dir / "bad.txt"), InputError);
}
