#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "lentil/grain_class.hpp"
#include "lentil/rng.hpp"

namespace lentil {

// Row-stochastic 6x6 matrix: p[t][q] is the probability that a grain of true
// class t is predicted as class q.
struct ConfusionMatrix {
  std::array<std::array<double, kClassCount>, kClassCount> p{};

  static ConfusionMatrix identity();

  // nullopt when well-formed, otherwise a description naming the first
  // offending row.
  std::optional<std::string> validate() const;
};

// Plain-text fixture format: six rows of six decimals, '#' comment lines
// allowed, row order Good, Yellow, Broken, Peeled, Dotted, Reject.
ConfusionMatrix load_confusion_matrix(const std::string& path);
void save_confusion_matrix(const ConfusionMatrix& m, const std::string& path,
                           std::string_view comment);

struct ClassifierOutcome {
  GrainClass predicted = GrainClass::Good;
  std::array<double, kClassCount> class_probs{};  // argmax == predicted, sums to 1
};

// A grain is classified exactly once, when it first enters the camera view;
// every frame of the grain then carries the same outcome. Implementations are
// immutable after construction and safe to share across concurrent runs.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ClassifierOutcome classify(GrainClass true_class, Rng& rng) const = 0;
};

// Always returns the true class with a one-hot probability vector.
class OracleClassifier final : public Classifier {
 public:
  ClassifierOutcome classify(GrainClass true_class, Rng& rng) const override;
};

// Samples the predicted class from the true class's matrix row and returns
// that row as the probability vector, with the sampled class raised above the
// row maximum by 1e-6 (then renormalised) so that downstream argmax voting
// recovers the draw.
class ConfusionClassifier final : public Classifier {
 public:
  explicit ConfusionClassifier(const ConfusionMatrix& m);  // throws on invalid m
  ClassifierOutcome classify(GrainClass true_class, Rng& rng) const override;
  const ConfusionMatrix& matrix() const { return m_; }

 private:
  ConfusionMatrix m_;
};

// Closed-form accuracy of the keep/eject rule: a grain is handled correctly
// iff a Good grain is predicted Good and a defect grain is predicted anything
// but Good. Throws on an invalid matrix or an empty mixture.
double expected_separation_accuracy(const ConfusionMatrix& m, const Mixture& mixture);

// Builds the committed fixture matrix: diagonals >= 0.94 for Good, Yellow,
// Broken and Reject, Peeled/Dotted diagonals < 0.94 with their dominant
// off-diagonal mass on each other, and expected separation accuracy on the
// standard mixture equal to target. Throws with an infeasibility report when
// the constraints cannot be met.
ConfusionMatrix calibrate_fixture(double target_accuracy = 0.872);

}  // namespace lentil
