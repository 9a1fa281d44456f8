#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "damf/ddr.hpp"
#include "damf/embeddings.hpp"
#include "damf/evaluation.hpp"
#include "damf/rng.hpp"
#include "damf/types.hpp"

using namespace damf;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path(name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

// All ten sections, two made-up words each.
std::string full_lexicon_text() {
  std::ostringstream out;
  for (int c = 0; c < kNumClasses; ++c) {
    out << "[" << kClassNames[c] << "]\n";
    out << "w" << c << "a\n";
    out << "w" << c << "b\n";
  }
  return out.str();
}

EmbeddingTable table_for_lexicon(int dim, std::uint64_t seed) {
  EmbeddingTable table;
  Rng rng(seed);
  for (int c = 0; c < kNumClasses; ++c) {
    for (char suffix : {'a', 'b'}) {
      Vector v(dim);
      for (int j = 0; j < dim; ++j) v(j) = rng.normal();
      table.insert("w" + std::to_string(c) + suffix, v);
    }
  }
  return table;
}

}  // namespace

TEST_CASE("embedding loader round-trips the word2vec text format") {
  TempFile f("test_ddr_vec.txt",
             "3 2\n"
             "cat 1.0 2.0\n"
             "dog -0.5 0.25\n"
             "mouse 0 3\n");
  EmbeddingTable table = EmbeddingTable::load_word2vec_text(f.path);
  CHECK(table.dim() == 2);
  CHECK(table.size() == 3);
  CHECK(table.contains("cat"));
  CHECK(!table.contains("lion"));
  CHECK(table.vec("dog")(0) == doctest::Approx(-0.5));
  CHECK(table.vec("mouse")(1) == doctest::Approx(3.0));
  CHECK_THROWS_AS(table.vec("lion"), std::out_of_range);
}

TEST_CASE("embedding loader rejects malformed files") {
  CHECK_THROWS(EmbeddingTable::load_word2vec_text("/nonexistent/vec.txt"));

  TempFile truncated("test_ddr_vec_trunc.txt", "1 3\ncat 1.0 2.0\n");
  CHECK_THROWS(EmbeddingTable::load_word2vec_text(truncated.path));

  TempFile excess("test_ddr_vec_excess.txt", "1 2\ncat 1.0 2.0 3.0\n");
  CHECK_THROWS(EmbeddingTable::load_word2vec_text(excess.path));

  TempFile dup("test_ddr_vec_dup.txt", "2 1\ncat 1.0\ncat 2.0\n");
  CHECK_THROWS(EmbeddingTable::load_word2vec_text(dup.path));

  TempFile short_count("test_ddr_vec_short.txt", "3 1\ncat 1.0\ndog 2.0\n");
  CHECK_THROWS(EmbeddingTable::load_word2vec_text(short_count.path));

  TempFile bad_header("test_ddr_vec_header.txt", "many 1\ncat 1.0\n");
  CHECK_THROWS(EmbeddingTable::load_word2vec_text(bad_header.path));
}

TEST_CASE("lexicon loader handles comments, inline lists, and errors") {
  TempFile f("test_ddr_lex.txt",
             "# dictionary\n" + full_lexicon_text() +
                 "[care]\nextra1 extra2  # trailing comment\n");
  Lexicon lex = Lexicon::load(f.path);
  // second [care] section appends
  REQUIRE(lex.words[0].size() == 4);
  CHECK(lex.words[0][0] == "w0a");
  CHECK(lex.words[0][2] == "extra1");
  CHECK(lex.words[0][3] == "extra2");
  for (int c = 1; c < kNumClasses; ++c) CHECK(lex.words[c].size() == 2);

  CHECK_THROWS(Lexicon::load("/nonexistent/lexicon.txt"));

  TempFile unknown("test_ddr_lex_unknown.txt",
                   full_lexicon_text() + "[kindness]\nnice\n");
  CHECK_THROWS_WITH(Lexicon::load(unknown.path),
                    doctest::Contains("unknown class"));

  TempFile missing("test_ddr_lex_missing.txt", "[care]\nhelp\n");
  CHECK_THROWS_WITH(Lexicon::load(missing.path), doctest::Contains("missing"));

  TempFile headerless("test_ddr_lex_headerless.txt", "help\n" +
                                                         full_lexicon_text());
  CHECK_THROWS_WITH(Lexicon::load(headerless.path),
                    doctest::Contains("before any section"));

  TempFile malformed("test_ddr_lex_malformed.txt",
                     "[care\nhelp\n" + full_lexicon_text());
  CHECK_THROWS_WITH(Lexicon::load(malformed.path),
                    doctest::Contains("malformed"));
}

TEST_CASE("centroids are plain means of in-vocabulary class words") {
  Lexicon lex;
  for (int c = 0; c < kNumClasses; ++c) lex.words[c] = {"only"};
  lex.words[0] = {"ex", "ey"};
  lex.words[1] = {"ex", "missing"};

  EmbeddingTable table;
  table.insert("only", (Vector(2) << 7.0, -3.0).finished());
  table.insert("ex", (Vector(2) << 1.0, 0.0).finished());
  table.insert("ey", (Vector(2) << 0.0, 1.0).finished());

  std::vector<std::string> skipped;
  CentroidTable cents = build_centroids(lex, table, &skipped);
  // single-word class: centroid is that word's vector
  CHECK(cents.centroids(2, 0) == 7.0);
  CHECK(cents.centroids(2, 1) == -3.0);
  // two-word class: (1,0) and (0,1) average to (0.5, 0.5)
  CHECK(cents.centroids(0, 0) == 0.5);
  CHECK(cents.centroids(0, 1) == 0.5);
  // OOV member is skipped, not averaged in
  CHECK(cents.centroids(1, 0) == 1.0);
  CHECK(cents.centroids(1, 1) == 0.0);
  REQUIRE(skipped.size() == 1);
  CHECK(skipped[0] == "missing");
}

TEST_CASE("centroid means match a brute-force loop on random data") {
  const int dim = 7;
  EmbeddingTable table = table_for_lexicon(dim, 11);
  Lexicon lex;
  for (int c = 0; c < kNumClasses; ++c) {
    lex.words[c] = {"w" + std::to_string(c) + "a",
                    "w" + std::to_string(c) + "b"};
  }
  CentroidTable cents = build_centroids(lex, table);
  REQUIRE(cents.centroids.rows() == kNumClasses);
  REQUIRE(cents.centroids.cols() == dim);
  for (int c = 0; c < kNumClasses; ++c) {
    for (int j = 0; j < dim; ++j) {
      double expect = (table.vec(lex.words[c][0])(j) +
                       table.vec(lex.words[c][1])(j)) /
                      2.0;
      CHECK(cents.centroids(c, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("a class with no in-vocabulary words is an error") {
  Lexicon lex;
  for (int c = 0; c < kNumClasses; ++c) lex.words[c] = {"known"};
  lex.words[4] = {"ghost", "phantom"};
  EmbeddingTable table;
  table.insert("known", (Vector(3) << 1, 2, 3).finished());
  CHECK_THROWS_WITH(build_centroids(lex, table),
                    doctest::Contains("loyalty"));
}

TEST_CASE("prediction scores are cosines and the text vector is a token mean") {
  EmbeddingTable table;
  table.insert("north", (Vector(2) << 0.0, 1.0).finished());
  table.insert("east", (Vector(2) << 1.0, 0.0).finished());

  CentroidTable cents;
  cents.centroids = Matrix::Zero(kNumClasses, 2);
  cents.centroids.row(0) << 0.0, 2.0;   // aligned with "north"
  cents.centroids.row(1) << 3.0, 0.0;   // aligned with "east"
  cents.centroids.row(2) << 1.0, 1.0;   // diagonal

  DdrPrediction p = ddr_predict("north north unknownword", cents, table);
  REQUIRE(!p.abstained);
  CHECK(p.class_index == 0);
  CHECK(p.scores(0) == doctest::Approx(1.0));           // same direction
  CHECK(p.scores(1) == doctest::Approx(0.0));           // orthogonal
  CHECK(p.scores(2) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(p.scores(4) == 0.0);  // zero centroid: cosine convention

  // mean of north+east is the diagonal: ties against rows 0/1 broken by the
  // strictly-greater argmax, exact winner is row 2
  DdrPrediction q = ddr_predict("north east", cents, table);
  CHECK(q.class_index == 2);
  CHECK(q.scores(2) == doctest::Approx(1.0));
  CHECK(q.scores(0) == doctest::Approx(q.scores(1)));
}

TEST_CASE("cosine is invariant to scaling the text token vectors") {
  const int dim = 5;
  EmbeddingTable base = table_for_lexicon(dim, 21);
  EmbeddingTable scaled;
  for (int c = 0; c < kNumClasses; ++c) {
    for (char suffix : {'a', 'b'}) {
      std::string w = "w" + std::to_string(c) + suffix;
      scaled.insert(w, base.vec(w) * 5.0);
    }
  }
  Lexicon lex;
  for (int c = 0; c < kNumClasses; ++c) {
    lex.words[c] = {"w" + std::to_string(c) + "a",
                    "w" + std::to_string(c) + "b"};
  }
  CentroidTable cents = build_centroids(lex, base);

  const std::string text = "w0a w3b w7a";
  DdrPrediction p = ddr_predict(text, cents, base);
  DdrPrediction q = ddr_predict(text, cents, scaled);
  REQUIRE(!p.abstained);
  CHECK(p.class_index == q.class_index);
  for (int c = 0; c < kNumClasses; ++c) {
    CHECK(p.scores(c) == doctest::Approx(q.scores(c)).epsilon(1e-12));
  }
}

TEST_CASE("ddr argmax agrees with a brute-force oracle on 1000 texts") {
  const int dim = 6;
  const int vocab = 40;
  Rng rng(77);

  EmbeddingTable table;
  std::vector<std::string> words;
  for (int w = 0; w < vocab; ++w) {
    Vector v(dim);
    for (int j = 0; j < dim; ++j) v(j) = rng.normal();
    words.push_back("t" + std::to_string(w));
    table.insert(words.back(), v);
  }
  CentroidTable cents;
  cents.centroids = Matrix(kNumClasses, dim);
  for (int c = 0; c < kNumClasses; ++c) {
    for (int j = 0; j < dim; ++j) cents.centroids(c, j) = rng.normal();
  }

  int abstentions = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    int len = 1 + static_cast<int>(rng.below(6));
    std::string text;
    std::vector<int> ids;
    for (int t = 0; t < len; ++t) {
      if (!text.empty()) text += ' ';
      if (rng.uniform() < 0.15) {
        text += "oovword";  // not in the table
      } else {
        int w = static_cast<int>(rng.below(vocab));
        ids.push_back(w);
        text += words[static_cast<std::size_t>(w)];
      }
    }

    DdrPrediction pred = ddr_predict(text, cents, table);

    if (ids.empty()) {
      CHECK(pred.abstained);
      ++abstentions;
      continue;
    }
    // independent oracle: plain loops, no Eigen reductions
    std::vector<double> mean(dim, 0.0);
    for (int w : ids) {
      for (int j = 0; j < dim; ++j) {
        mean[static_cast<std::size_t>(j)] +=
            table.vec(words[static_cast<std::size_t>(w)])(j);
      }
    }
    for (int j = 0; j < dim; ++j) {
      mean[static_cast<std::size_t>(j)] /= static_cast<double>(ids.size());
    }
    int best = 0;
    double best_score = -2.0;
    for (int c = 0; c < kNumClasses; ++c) {
      double dot = 0.0, nm = 0.0, nc = 0.0;
      for (int j = 0; j < dim; ++j) {
        double m = mean[static_cast<std::size_t>(j)];
        double cv = cents.centroids(c, j);
        dot += m * cv;
        nm += m * m;
        nc += cv * cv;
      }
      double score = (nm == 0.0 || nc == 0.0)
                         ? 0.0
                         : dot / (std::sqrt(nm) * std::sqrt(nc));
      CHECK(pred.scores(c) == doctest::Approx(score).epsilon(1e-7));
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    REQUIRE(!pred.abstained);
    CHECK(pred.class_index == best);
    CHECK(pred.scores(pred.class_index) >= pred.scores.maxCoeff() - 1e-15);
  }
  CHECK(abstentions > 0);  // the OOV-only case was actually exercised
}

TEST_CASE("abstentions become the all-false prediction via pseudo-logits") {
  EmbeddingTable table;
  table.insert("word", (Vector(2) << 1.0, 0.0).finished());
  CentroidTable cents;
  cents.centroids = Matrix::Ones(kNumClasses, 2);

  DdrPrediction p = ddr_predict("nothing matches here", cents, table);
  CHECK(p.abstained);
  CHECK(p.class_index == -1);
  CHECK(p.scores.isZero(0.0));

  Vector logits = ddr_pseudo_logits(p);
  for (int c = 0; c < kNumClasses; ++c) CHECK(logits(c) == -1.0);
  MoralLabelVector flags = binarize(logits);
  CHECK(!flags.any());

  DdrPrediction hit = ddr_predict("word", cents, table);
  flags = binarize(ddr_pseudo_logits(hit));
  int set = 0;
  for (int c = 0; c < kNumClasses; ++c) set += flags.flags[c] ? 1 : 0;
  CHECK(set == 1);
  CHECK(flags.flags[static_cast<std::size_t>(hit.class_index)]);
}

TEST_CASE("prediction validates the centroid table shape") {
  EmbeddingTable table;
  table.insert("word", (Vector(3) << 1.0, 0.0, 0.0).finished());
  CentroidTable wrong;
  wrong.centroids = Matrix::Ones(kNumClasses, 2);  // dim mismatch
  CHECK_THROWS_AS(ddr_predict("word", wrong, table), std::invalid_argument);
}
