#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lentil/classifier.hpp"

using namespace lentil;

namespace {

const std::string kFixturePath = std::string(LENTIL_FIXTURE_DIR) + "/paper_calibrated.cm";

int argmax6(const std::array<double, kClassCount>& p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

TEST_CASE("class names round-trip, Refuse aliases Reject") {
  for (int i = 0; i < kClassCount; ++i) {
    auto c = class_from_index(i);
    CHECK(class_from_name(class_name(c)) == c);
  }
  CHECK(class_from_name("Refuse") == GrainClass::Reject);
  CHECK(!class_from_name("Mystery").has_value());
}

TEST_CASE("matrix validation") {
  CHECK(!ConfusionMatrix::identity().validate().has_value());

  ConfusionMatrix bad = ConfusionMatrix::identity();
  bad.p[2][2] = 0.8;  // row sums to 0.8
  auto v = bad.validate();
  REQUIRE(v.has_value());
  CHECK(v->find("row 2") != std::string::npos);

  bad = ConfusionMatrix::identity();
  bad.p[4][1] = -0.1;
  bad.p[4][4] = 1.1;
  v = bad.validate();
  REQUIRE(v.has_value());
  CHECK(v->find("row 4") != std::string::npos);
}

TEST_CASE("oracle classifier returns the truth one-hot") {
  OracleClassifier oracle;
  Rng rng(1);
  for (int i = 0; i < kClassCount; ++i) {
    auto out = oracle.classify(class_from_index(i), rng);
    CHECK(out.predicted == class_from_index(i));
    CHECK(out.class_probs[i] == 1.0);
    CHECK(argmax6(out.class_probs) == i);
  }
}

TEST_CASE("identity matrix never mispredicts") {
  ConfusionClassifier cls(ConfusionMatrix::identity());
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    auto c = class_from_index(i % kClassCount);
    CHECK(cls.classify(c, rng).predicted == c);
  }
}

TEST_CASE("sampled frequencies track the row (law of large numbers)") {
  ConfusionMatrix m = ConfusionMatrix::identity();
  m.p[0] = {0.9, 0.02, 0.02, 0.02, 0.02, 0.02};
  ConfusionClassifier cls(m);
  Rng rng(3);
  int good = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    if (cls.classify(GrainClass::Good, rng).predicted == GrainClass::Good) ++good;
  }
  CHECK(std::abs(double(good) / n - 0.9) < 0.01);
}

TEST_CASE("classify outcome invariants: argmax recovers the draw, probs sum to 1") {
  ConfusionClassifier cls(load_confusion_matrix(kFixturePath));
  Rng rng(4);
  for (int i = 0; i < 20000; ++i) {
    auto c = class_from_index(i % kClassCount);
    auto out = cls.classify(c, rng);
    CHECK(argmax6(out.class_probs) == class_index(out.predicted));
    double sum = 0.0;
    for (double p : out.class_probs) sum += p;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("per-row sampling within 3-sigma binomial bounds at 1e6 draws") {
  ConfusionMatrix m = load_confusion_matrix(kFixturePath);
  ConfusionClassifier cls(m);
  const int n = 1000000;
  for (int t = 0; t < kClassCount; ++t) {
    Rng rng(50 + t);
    std::array<long, kClassCount> counts{};
    for (int i = 0; i < n; ++i) {
      ++counts[class_index(cls.classify(class_from_index(t), rng).predicted)];
    }
    for (int q = 0; q < kClassCount; ++q) {
      double p = m.p[t][q];
      double sigma = std::sqrt(n * p * (1.0 - p));
      CHECK(std::abs(counts[q] - n * p) <= 3.0 * sigma + 1e-9);
    }
  }
}

TEST_CASE("expected separation accuracy") {
  Mixture mix = standard_mixture();

  CHECK(expected_separation_accuracy(ConfusionMatrix::identity(), mix) == 1.0);

  ConfusionMatrix m;
  for (int t = 0; t < kClassCount; ++t) {
    for (int q = 0; q < kClassCount; ++q) m.p[t][q] = 0.0;
    if (t == 0) {
      m.p[t][0] = 0.9;
      m.p[t][1] = 0.1;
    } else {
      m.p[t][0] = 0.1;
      m.p[t][t] = 0.9;
    }
  }
  CHECK(expected_separation_accuracy(m, mix) == doctest::Approx(0.90).epsilon(1e-12));

  SUBCASE("committed fixture hits the reported accuracy") {
    ConfusionMatrix fix = load_confusion_matrix(kFixturePath);
    CHECK(std::abs(expected_separation_accuracy(fix, mix) - 0.872) <= 0.005);
  }

  SUBCASE("invariant under mixture scaling, linear in counts") {
    Mixture scaled;
    for (int i = 0; i < kClassCount; ++i) scaled[i] = mix[i] * 3;
    CHECK(expected_separation_accuracy(m, scaled) ==
          doctest::Approx(expected_separation_accuracy(m, mix)).epsilon(1e-12));
  }

  SUBCASE("empty mixture rejected") {
    CHECK_THROWS_AS(expected_separation_accuracy(m, Mixture{0, 0, 0, 0, 0, 0}),
                    std::invalid_argument);
  }

  SUBCASE("invalid matrix rejected") {
    ConfusionMatrix bad = m;
    bad.p[1][1] = 0.5;
    CHECK_THROWS_AS(expected_separation_accuracy(bad, mix), std::invalid_argument);
    CHECK_THROWS_AS(ConfusionClassifier{bad}, std::invalid_argument);
  }
}

TEST_CASE("calibrated fixture construction") {
  ConfusionMatrix m = calibrate_fixture();

  CHECK(!m.validate().has_value());

  // strong classes at or above the 0.94 floor
  for (int t : {0, 1, 2, 5}) CHECK(m.p[t][t] >= 0.94);
  // Peeled and Dotted weaker, leaking mostly into each other
  for (int t : {3, 4}) {
    CHECK(m.p[t][t] < 0.94);
    int sibling = (t == 3) ? 4 : 3;
    double max_off = 0.0;
    int arg_off = -1;
    for (int q = 0; q < kClassCount; ++q) {
      if (q == t) continue;
      if (m.p[t][q] > max_off) {
        max_off = m.p[t][q];
        arg_off = q;
      }
    }
    CHECK(arg_off == sibling);
  }

  double acc = expected_separation_accuracy(m, standard_mixture());
  CHECK(acc >= 0.867);
  CHECK(acc <= 0.877);

  SUBCASE("committed fixture file is the tool output") {
    std::string tmp = "/tmp/lentil_fixture_check.cm";
    save_confusion_matrix(m, tmp,
                          "calibrated fixture: expected separation accuracy 0.872 on the "
                          "100-grain mixture");
    std::ifstream a(tmp), b(kFixturePath);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
  }
}

TEST_CASE("matrix file io") {
  ConfusionMatrix m = calibrate_fixture();
  std::string tmp = "/tmp/lentil_cm_roundtrip.cm";
  save_confusion_matrix(m, tmp, "roundtrip");
  ConfusionMatrix r = load_confusion_matrix(tmp);
  for (int t = 0; t < kClassCount; ++t) {
    for (int q = 0; q < kClassCount; ++q) {
      CHECK(std::abs(r.p[t][q] - m.p[t][q]) <= 5e-5);  // 4-decimal file format
    }
  }

  CHECK_THROWS(load_confusion_matrix("/nonexistent/matrix.cm"));

  std::ofstream bad("/tmp/lentil_cm_bad.cm");
  bad << "0.5 0.5 0 0 0\n";  // five columns
  bad.close();
  CHECK_THROWS(load_confusion_matrix("/tmp/lentil_cm_bad.cm"));
}
