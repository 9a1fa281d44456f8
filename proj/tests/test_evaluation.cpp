#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <vector>

#include "damf/evaluation.hpp"
#include "damf/rng.hpp"

using namespace damf;

namespace {

PredictionSet random_set(Rng& rng, int n) {
  PredictionSet s;
  s.logits = Matrix(n, kNumClasses);
  s.gold = Matrix(n, kNumClasses);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < kNumClasses; ++c) {
      s.logits(i, c) = rng.normal(0.0, 2.0);
      s.gold(i, c) = rng.bernoulli(0.3) ? 1.0 : 0.0;
    }
  return s;
}

}  // namespace

TEST_CASE("binarize thresholds at logit zero") {
  Vector logits = Vector::Constant(kNumClasses, -1.0);
  MoralLabelVector v = binarize(logits);
  CHECK(!v.any());  // all-false = non-moral

  logits.setZero();
  v = binarize(logits);
  for (bool f : v.flags) CHECK(f);  // 0 counts as positive (≥ rule)

  logits.setConstant(-2.0);
  logits[0] = 2.0;
  logits[3] = 1e-12;
  v = binarize(logits);
  CHECK(v.flags[0]);
  CHECK(!v.flags[1]);
  CHECK(v.flags[3]);

  logits[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(binarize(logits), std::invalid_argument);
  CHECK_THROWS_AS(binarize(Vector::Zero(9)), std::invalid_argument);
}

TEST_CASE("per-class P/R/F1 on pencil-and-paper cases") {
  // doc layout: 3 docs; class 0 exercised, others empty
  PredictionSet s;
  s.logits = Matrix::Constant(3, kNumClasses, -5.0);
  s.gold = Matrix::Zero(3, kNumClasses);

  // TP=1 (doc0), FP=1 (doc1), FN=1 (doc2) on class 0
  s.logits(0, 0) = 1.0;
  s.gold(0, 0) = 1.0;
  s.logits(1, 0) = 1.0;
  s.gold(2, 0) = 1.0;

  ClassReport r = per_class_prf(s);
  CHECK(r.precision[0] == doctest::Approx(0.5));
  CHECK(r.recall[0] == doctest::Approx(0.5));
  CHECK(r.f1[0] == doctest::Approx(0.5));
  CHECK(r.support[0] == 2);
  CHECK(r.support[1] == 0);
  CHECK(r.recall[1] == 0.0);   // zero-support convention
  CHECK(r.precision[1] == 0.0);

  // perfect predictions
  Rng rng(3);
  PredictionSet p = random_set(rng, 20);
  p.logits = (2.0 * p.gold.array() - 1.0).matrix();  // +1 where gold, −1 else
  ClassReport rp = per_class_prf(p);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (rp.support[c] > 0) CHECK(rp.f1[c] == doctest::Approx(1.0));

  // all-false predictions with support → recall 0, F1 0
  p.logits.setConstant(-1.0);
  ClassReport rz = per_class_prf(p);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (rz.support[c] > 0) {
      CHECK(rz.recall[c] == 0.0);
      CHECK(rz.f1[c] == 0.0);
    }
}

TEST_CASE("weighted F1 worked example: supports (3,1), F1s (1,0) -> 0.75") {
  PredictionSet s;
  s.logits = Matrix::Constant(4, kNumClasses, -5.0);
  s.gold = Matrix::Zero(4, kNumClasses);
  for (int i = 0; i < 3; ++i) {  // class 0: three perfect docs
    s.gold(i, 0) = 1.0;
    s.logits(i, 0) = 3.0;
  }
  s.gold(3, 1) = 1.0;  // class 1: one missed doc

  ClassReport r = per_class_prf(s);
  CHECK(r.support[0] == 3);
  CHECK(r.support[1] == 1);
  CHECK(r.f1[0] == doctest::Approx(1.0));
  CHECK(r.f1[1] == doctest::Approx(0.0));
  CHECK(weighted_f1(r) == doctest::Approx(0.75));
}

TEST_CASE("metrics match a brute-force confusion matrix on random sets") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(30));
    PredictionSet s = random_set(rng, n);
    ClassReport r = per_class_prf(s);

    double min_f1 = 2.0, max_f1 = -1.0;
    long total_support = 0;
    double weighted_acc = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      long tp = 0, fp = 0, fn = 0, tn = 0;
      for (int i = 0; i < n; ++i) {
        const bool hat = s.logits(i, c) >= 0.0;
        const bool gold = s.gold(i, c) == 1.0;
        if (hat && gold)
          ++tp;
        else if (hat && !gold)
          ++fp;
        else if (!hat && gold)
          ++fn;
        else
          ++tn;
      }
      const double prec = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
      const double rec = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
      const double f1 =
          (prec + rec > 0.0) ? 2.0 * prec * rec / (prec + rec) : 0.0;
      CHECK(r.precision[std::size_t(c)] == doctest::Approx(prec).epsilon(1e-12));
      CHECK(r.recall[std::size_t(c)] == doctest::Approx(rec).epsilon(1e-12));
      CHECK(r.f1[std::size_t(c)] == doctest::Approx(f1).epsilon(1e-12));
      CHECK(r.support[std::size_t(c)] == tp + fn);  // TP+FN = support exactly
      CHECK(tp + fp + fn + tn == n);
      if (tp + fn > 0) {
        min_f1 = std::min(min_f1, f1);
        max_f1 = std::max(max_f1, f1);
        total_support += tp + fn;
        weighted_acc += double(tp + fn) * f1;
      }
    }

    if (total_support > 0) {
      const double wf1 = weighted_f1(r);
      CHECK(wf1 == doctest::Approx(weighted_acc / double(total_support))
                       .epsilon(1e-12));
      CHECK(wf1 >= min_f1 - 1e-12);  // convex combination bounds
      CHECK(wf1 <= max_f1 + 1e-12);
    } else {
      CHECK_THROWS_AS(weighted_f1(r), std::invalid_argument);
    }
  }
}

TEST_CASE("metrics ignore document order") {
  Rng rng(12);
  PredictionSet s = random_set(rng, 25);
  ClassReport r1 = per_class_prf(s);

  std::vector<int> perm(25);
  for (int i = 0; i < 25; ++i) perm[std::size_t(i)] = i;
  rng.shuffle(perm);
  PredictionSet t;
  t.logits = Matrix(25, kNumClasses);
  t.gold = Matrix(25, kNumClasses);
  for (int i = 0; i < 25; ++i) {
    t.logits.row(i) = s.logits.row(perm[std::size_t(i)]);
    t.gold.row(i) = s.gold.row(perm[std::size_t(i)]);
  }
  ClassReport r2 = per_class_prf(t);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    CHECK(r1.f1[c] == r2.f1[c]);
    CHECK(r1.support[c] == r2.support[c]);
  }
}

TEST_CASE("per_class_prf input validation") {
  PredictionSet s;
  s.logits = Matrix::Zero(0, kNumClasses);
  s.gold = Matrix::Zero(0, kNumClasses);
  CHECK_THROWS_AS(per_class_prf(s), std::invalid_argument);

  s.logits = Matrix::Zero(2, kNumClasses);
  s.gold = Matrix::Zero(3, kNumClasses);
  CHECK_THROWS_AS(per_class_prf(s), std::invalid_argument);

  s.gold = Matrix::Zero(2, kNumClasses);
  s.gold(0, 0) = 0.5;
  CHECK_THROWS_AS(per_class_prf(s), std::invalid_argument);
}

TEST_CASE("seed aggregation: mean and population std") {
  std::vector<std::map<std::string, Scalar>> runs = {
      {{"f1", 0.3}}, {{"f1", 0.5}}};
  SeedAggregate agg = aggregate_seeds(runs);
  CHECK(agg.mean.at("f1") == doctest::Approx(0.4));
  CHECK(agg.stddev.at("f1") == doctest::Approx(0.1));

  runs = {{{"f1", 0.4}, {"acc", 1.0}},
          {{"f1", 0.4}, {"acc", 1.0}},
          {{"f1", 0.4}, {"acc", 1.0}},
          {{"f1", 0.4}, {"acc", 1.0}},
          {{"f1", 0.4}, {"acc", 1.0}}};
  agg = aggregate_seeds(runs);
  CHECK(agg.mean.at("f1") == doctest::Approx(0.4));
  CHECK(agg.stddev.at("f1") == doctest::Approx(0.0));
  CHECK(agg.stddev.at("acc") == doctest::Approx(0.0));

  CHECK_THROWS_AS(aggregate_seeds({{{"f1", 0.4}}}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate_seeds({{{"f1", 0.4}}, {{"acc", 0.4}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(aggregate_seeds({}), std::invalid_argument);
}
