#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "embench/eval.hpp"
#include "test_util.hpp"

using namespace embench;

namespace {

double direct_cos(std::span<const float> a, std::span<const float> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

EmbeddingModel random_model(std::size_t n, std::size_t d, std::uint64_t seed, bool unit = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::string> words;
  std::vector<std::vector<float>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    words.push_back("w" + std::to_string(i));
    std::vector<double> r(d);
    double norm = 0;
    for (auto& x : r) {
      x = g(rng);
      norm += x * x;
    }
    std::vector<float> f;
    for (double x : r) f.push_back(static_cast<float>(unit ? x / std::sqrt(norm) : x));
    rows.push_back(f);
  }
  return fixtures::make_model(words, rows);
}

}  // namespace

TEST(TriplesScore, HandExamples) {
  auto m = fixtures::make_model({"a", "b", "c", "d"}, {{1, 0}, {1, 0}, {0, 1}, {0, 1}});
  std::vector<Triple> t1{{"a", "b", "c"}};
  EXPECT_DOUBLE_EQ(triples_score(m, t1).value, 1.0);
  std::vector<Triple> t2{{"a", "c", "d"}};
  EXPECT_DOUBLE_EQ(triples_score(m, t2).value, 0.0);
  auto s = fixtures::make_model({"qa", "qb", "qc"}, {{1, 0}, {1, 1}, {-1, 1}});
  std::vector<Triple> t3{{"qa", "qb", "qc"}};
  EXPECT_NEAR(triples_score(s, t3).value, std::sqrt(2.0), 1e-12);
}

TEST(TriplesScore, SkipsUnusableTriplesAndFailsWhenNoneRemain) {
  auto m = fixtures::make_model({"a", "b", "c"}, {{1, 0}, {1, 1}, {0, 1}});
  std::vector<Triple> t{{"a", "b", "c"}, {"a", "zz", "c"}, {"a", "a", "c"}};
  auto v = triples_score(m, t);
  EXPECT_EQ(v.skipped, 2u);
  std::vector<Triple> none{{"x", "y", "z"}};
  EXPECT_THROW(triples_score(m, none), MetricUnavailable);
}

TEST(TriplesScore, MatchesDirectCosineOnRandomSets) {
  std::mt19937_64 rng(5);
  for (int set = 0; set < 100; ++set) {
    auto m = random_model(12, 7, 1000 + set, true);
    std::vector<Triple> triples;
    double sum = 0;
    for (int k = 0; k < 10; ++k) {
      std::size_t a = rng() % 12, b, c;
      do b = rng() % 12; while (b == a);
      do c = rng() % 12; while (c == a || c == b);
      triples.push_back({m.vocab().word(a), m.vocab().word(b), m.vocab().word(c)});
      sum += direct_cos(m.row(a), m.row(b)) - direct_cos(m.row(a), m.row(c));
    }
    auto v = triples_score(m, triples).value;
    EXPECT_NEAR(v, sum / 10, 1e-10);
    EXPECT_GE(v, -2.0);
    EXPECT_LE(v, 2.0);
  }
}

TEST(TriplesScore, InvariantUnderPositiveScalingAndAntisymmetric) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> scale(0.1f, 10.0f);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_model(8, 4, trial);
    std::vector<float> data(m.data().begin(), m.data().end());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const float s = scale(rng);
      for (std::size_t c = 0; c < m.dim(); ++c) data[i * m.dim() + c] *= s;
    }
    EmbeddingModel scaled(m.vocab_ptr(), m.dim(), data);
    std::vector<Triple> t, swapped;
    for (int k = 0; k < 6; ++k) {
      t.push_back({m.vocab().word(k), m.vocab().word(k + 1), m.vocab().word(k + 2)});
      swapped.push_back({m.vocab().word(k), m.vocab().word(k + 2), m.vocab().word(k + 1)});
    }
    EXPECT_NEAR(triples_score(scaled, t).value, triples_score(m, t).value, 1e-6);
    EXPECT_NEAR(triples_score(m, swapped).value, -triples_score(m, t).value, 1e-12);
  }
}

TEST(TriplesIo, RoundTripsAndDefaultsToTrain) {
  std::istringstream in("# comment\nGood\tfine\tbad\nhot cold warm test\n");
  auto t = read_triples(in);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].anchor, "good");
  EXPECT_EQ(t[0].split, Split::Train);
  EXPECT_EQ(t[1].split, Split::Test);
  std::ostringstream out;
  write_triples(t, out);
  std::istringstream again(out.str());
  EXPECT_EQ(read_triples(again), t);
  std::istringstream bad("a b\n");
  EXPECT_THROW(read_triples(bad), FormatError);
}

TEST(Sentiment, SeparableDocumentsScorePerfectly) {
  auto m = fixtures::make_model({"good", "bad"}, {{1, 0}, {-1, 0}});
  std::vector<LabeledDocument> docs;
  for (int i = 0; i < 10; ++i) {
    docs.push_back({"good good", 1});
    docs.push_back({"bad bad", 0});
  }
  auto v = sentiment_accuracy(m, docs, 13);
  EXPECT_DOUBLE_EQ(v.value, 1.0);
  EXPECT_EQ(v.skipped, 0u);
}

TEST(Sentiment, MatchesBruteForceWeightGrid) {
  // One-dimensional embedding, so the classifier has two parameters (w, b).
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<std::string> words;
  std::vector<std::vector<float>> rows;
  for (int i = 0; i < 10; ++i) {
    words.push_back("t" + std::to_string(i));
    rows.push_back({u(rng)});
  }
  auto m = fixtures::make_model(words, rows);
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    std::vector<LabeledDocument> docs;
    std::vector<double> x;
    while (docs.size() < 20) {
      std::string text;
      double c = 0;
      for (int k = 0; k < 3; ++k) {
        const auto w = rng() % 10;
        text += words[w] + " ";
        c += rows[w][0];
      }
      c /= 3;
      const int y = c + noise(rng) > 0 ? 1 : 0;
      docs.push_back({text, y});
      x.push_back(c);
    }
    auto [train, test] = split_indices(docs.size(), seed);
    bool ok = true;
    for (const auto* idx : {&train, &test}) {
      int pos = 0;
      for (auto i : *idx) pos += docs[i].label;
      ok = ok && pos > 0 && pos < static_cast<int>(idx->size());
    }
    if (!ok) {
      EXPECT_THROW(sentiment_accuracy(m, docs, seed), MetricUnavailable);
      continue;
    }
    // Exhaustive grid over (w, b) minimizing the regularized mean log-loss
    // on the raw training centroids.
    double best_loss = std::numeric_limits<double>::infinity(), bw = 0, bb = 0;
    for (int iw = -1000; iw <= 1000; ++iw) {
      const double w = iw * 0.01;
      for (int ib = -300; ib <= 300; ++ib) {
        const double b = ib * 0.01;
        double loss = 0;
        for (auto i : train) {
          const double z = w * x[i] + b;
          loss += docs[i].label ? std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        }
        loss = loss / train.size() + 0.5e-4 * w * w;
        if (loss < best_loss) {
          best_loss = loss;
          bw = w;
          bb = b;
        }
      }
    }
    int oracle_correct = 0;
    for (auto i : test) oracle_correct += ((bw * x[i] + bb >= 0) ? 1 : 0) == docs[i].label;
    const double got = sentiment_accuracy(m, docs, seed).value;
    EXPECT_NEAR(got * test.size(), oracle_correct, 1.0 + 1e-9) << "seed " << seed;
  }
}

TEST(Sentiment, SplitIsSeedDeterministic) {
  auto [a1, b1] = split_indices(50, 7);
  auto [a2, b2] = split_indices(50, 7);
  auto [a3, b3] = split_indices(50, 8);
  EXPECT_EQ(a1, a2);
  EXPECT_EQ(b1, b2);
  EXPECT_NE(a1, a3);
  EXPECT_EQ(a1.size(), 40u);
  EXPECT_EQ(b1.size(), 10u);
}

TEST(Sentiment, SkipsEmptyDocumentsAndRequiresBothClasses) {
  auto m = fixtures::make_model({"good", "bad"}, {{1, 0}, {-1, 0}});
  std::vector<LabeledDocument> docs;
  for (int i = 0; i < 10; ++i) {
    docs.push_back({"good", 1});
    docs.push_back({"bad", 0});
  }
  docs.push_back({"unknown words only", 1});
  EXPECT_EQ(sentiment_accuracy(m, docs, 13).skipped, 1u);
  std::vector<LabeledDocument> one_class(10, {"good", 1});
  EXPECT_THROW(sentiment_accuracy(m, one_class, 13), MetricUnavailable);
  EXPECT_THROW(sentiment_accuracy(m, std::vector<LabeledDocument>{}, 13), MetricUnavailable);
}

TEST(Sentiment, ReadsLabeledDocuments) {
  std::istringstream in("pos\tGreat film!\nneg\tdull\n1\tok\n0\tbad\n");
  auto d = read_documents(in);
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d[0].label, 1);
  EXPECT_EQ(d[3].label, 0);
  std::istringstream bad("maybe\ttext\n");
  EXPECT_THROW(read_documents(bad), FormatError);
}

TEST(Analogy, ExactOffsetIsFound) {
  auto m = fixtures::make_model({"king", "queen", "man", "woman", "apple"},
                                {{1, 1, 0}, {1, -1, 0}, {0.2f, 1, 0}, {0.2f, -1, 0}, {0, 0, 1}});
  std::vector<AnalogyQuestion> q{{"man", "woman", "king", "queen"}};
  EXPECT_DOUBLE_EQ(analogy_accuracy(m, q).value, 1.0);
}

TEST(Analogy, MatchesExhaustiveScan) {
  for (int trial = 0; trial < 30; ++trial) {
    auto m = random_model(6, 3, 300 + trial);
    std::vector<AnalogyQuestion> qs;
    std::mt19937_64 rng(trial);
    int oracle_correct = 0;
    for (int k = 0; k < 10; ++k) {
      std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5};
      std::shuffle(idx.begin(), idx.end(), rng);
      const auto a = idx[0], b = idx[1], c = idx[2], e = idx[3];
      qs.push_back({m.vocab().word(a), m.vocab().word(b), m.vocab().word(c), m.vocab().word(e)});
      std::vector<double> target(3);
      for (int j = 0; j < 3; ++j) {
        auto n = [&](std::size_t w) {
          double s = 0;
          for (int t = 0; t < 3; ++t) s += double(m.row(w)[t]) * m.row(w)[t];
          return m.row(w)[j] / std::sqrt(s);
        };
        target[j] = n(b) - n(a) + n(c);
      }
      std::size_t best = 99;
      double best_cos = -2;
      for (std::size_t w = 0; w < 6; ++w) {
        if (w == a || w == b || w == c) continue;
        double ab = 0, aa = 0, bb = 0;
        for (int j = 0; j < 3; ++j) {
          ab += m.row(w)[j] * target[j];
          aa += double(m.row(w)[j]) * m.row(w)[j];
          bb += target[j] * target[j];
        }
        const double cs = ab / std::sqrt(aa * bb);
        if (cs > best_cos) {
          best_cos = cs;
          best = w;
        }
      }
      oracle_correct += best == e;
    }
    EXPECT_DOUBLE_EQ(analogy_accuracy(m, qs).value, oracle_correct / 10.0) << "trial " << trial;
  }
}

TEST(Analogy, InvariantUnderOrthogonalRotation) {
  const std::size_t d = 5;
  auto m = random_model(30, d, 77);
  // Random orthogonal matrix by Gram-Schmidt.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> q(d, std::vector<double>(d));
  for (std::size_t i = 0; i < d; ++i) {
    for (auto& x : q[i]) x = g(rng);
    for (std::size_t j = 0; j < i; ++j) {
      double p = 0;
      for (std::size_t k = 0; k < d; ++k) p += q[i][k] * q[j][k];
      for (std::size_t k = 0; k < d; ++k) q[i][k] -= p * q[j][k];
    }
    double n = 0;
    for (double x : q[i]) n += x * x;
    for (auto& x : q[i]) x /= std::sqrt(n);
  }
  std::vector<float> rotated(m.data().size());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0;
      for (std::size_t k = 0; k < d; ++k) s += q[i][k] * m.row(r)[k];
      rotated[r * d + i] = static_cast<float>(s);
    }
  EmbeddingModel rm(m.vocab_ptr(), d, rotated);
  std::vector<AnalogyQuestion> qs;
  for (int k = 0; k < 60; ++k) {
    std::vector<std::size_t> idx(30);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    qs.push_back({m.vocab().word(idx[0]), m.vocab().word(idx[1]), m.vocab().word(idx[2]), m.vocab().word(idx[3])});
  }
  EXPECT_DOUBLE_EQ(analogy_accuracy(rm, qs).value, analogy_accuracy(m, qs).value);
}

TEST(Analogy, RestrictVocabSkipsRareWords) {
  auto m = fixtures::make_model({"king", "queen", "man", "woman", "apple"},
                                {{1, 1, 0}, {1, -1, 0}, {0.2f, 1, 0}, {0.2f, -1, 0}, {0, 0, 1}});
  std::vector<AnalogyQuestion> q{{"man", "woman", "king", "queen"}, {"king", "apple", "man", "woman"}};
  AnalogyOptions opt;
  opt.restrict_vocab = 4;
  auto v = analogy_accuracy(m, q, opt);
  EXPECT_EQ(v.skipped, 1u);
  EXPECT_DOUBLE_EQ(v.value, 1.0);
  std::istringstream in(": capital\nathens greece baghdad iraq\n");
  EXPECT_EQ(read_analogies(in).size(), 1u);
}

TEST(Labels, JoinSharedWordIntoTriple) {
  LabelStore s;
  s.add("ghastly", "awful", Relation::Synonym);
  s.add("ghastly", "delightful", Relation::Antonym);
  auto t = s.to_triples();
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], (Triple{"ghastly", "awful", "delightful", Split::Train}));
}

TEST(Labels, CrudBumpsVersionAndDetectsConflicts) {
  LabelStore s;
  const auto id = s.add("hot", "cold", Relation::Antonym);
  EXPECT_EQ(s.version(), 1u);
  EXPECT_EQ(s.add("cold", "hot", Relation::Antonym), id);
  EXPECT_EQ(s.version(), 1u);
  EXPECT_THROW(s.add("cold", "hot", Relation::Synonym), ConflictError);
  EXPECT_THROW(s.add("hot", "hot", Relation::Synonym), QueryError);
  EXPECT_THROW(s.add("hot", "tepid", Relation::Synonym, [](const std::string& w) { return w != "tepid"; }), QueryError);
  s.update(id, "hot", "chilly", Relation::Antonym);
  EXPECT_EQ(s.version(), 2u);
  EXPECT_EQ(s.get(id).word_b, "chilly");
  s.remove(id);
  EXPECT_EQ(s.version(), 3u);
  EXPECT_THROW(s.remove(id), NotFound);
  EXPECT_THROW(s.get(id), NotFound);
  EXPECT_EQ(s.add("a", "b", Relation::Synonym), id + 1);
}

TEST(Labels, FileRoundTrip) {
  LabelStore s;
  s.add("ghastly", "awful", Relation::Synonym);
  s.add("ghastly", "delightful", Relation::Antonym);
  std::ostringstream out;
  s.write(out);
  std::istringstream in(out.str());
  auto back = LabelStore::read(in);
  EXPECT_EQ(back.to_triples(), s.to_triples());
  std::istringstream bad("a b maybe\n");
  EXPECT_THROW(LabelStore::read(bad), FormatError);
}

TEST(Labels, MutationChangesTriplesScoreLikeFullRecompute) {
  std::vector<EmbeddingModel> models;
  for (int i = 0; i < 3; ++i) models.push_back(random_model(10, 4, 50 + i));
  EvalSuite suite;
  suite.triples = {{"w0", "w1", "w2", Split::Train}, {"w3", "w4", "w5", Split::Test}};
  LabelStore labels;
  const auto before = suite.evaluate(models[0], &labels).scores.at(metric::kTriples);
  labels.add("w6", "w7", Relation::Synonym);
  labels.add("w6", "w8", Relation::Antonym);
  labels.add("w9", "w7", Relation::Antonym);
  for (const auto& m : models) {
    // From scratch: train triples plus the two joined label triples.
    auto c = [&](int a, int b) { return direct_cos(m.row(a), m.row(b)); };
    const double expected = ((c(0, 1) - c(0, 2)) + (c(6, 7) - c(6, 8)) + (c(7, 6) - c(7, 9))) / 3.0;
    EXPECT_NEAR(suite.evaluate(m, &labels).scores.at(metric::kTriples), expected, 1e-12);
  }
  EXPECT_NE(suite.evaluate(models[0], &labels).scores.at(metric::kTriples), before);
}

TEST(EvalSuite, CombinedIsMeanOfTriplesAndAccuracy) {
  auto m = fixtures::make_model({"good", "bad", "fine"}, {{1, 0}, {-1, 0}, {1, 0.5f}});
  EvalSuite suite;
  suite.triples = {{"good", "fine", "bad", Split::Train}};
  for (int i = 0; i < 10; ++i) {
    suite.documents.push_back({"good", 1});
    suite.documents.push_back({"bad", 0});
  }
  auto r = suite.evaluate(m);
  EXPECT_DOUBLE_EQ(r.scores.at(metric::kCombined), (r.scores.at(metric::kTriples) + r.scores.at(metric::kAccuracy)) / 2);
  EXPECT_FALSE(r.score(metric::kAnalogy));
  EXPECT_TRUE(r.score(metric::kTrainSeconds));
}
