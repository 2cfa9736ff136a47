#include "lentil/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lentil {

ConfusionMatrix ConfusionMatrix::identity() {
  ConfusionMatrix m;
  for (int i = 0; i < kClassCount; ++i) m.p[i][i] = 1.0;
  return m;
}

std::optional<std::string> ConfusionMatrix::validate() const {
  for (int t = 0; t < kClassCount; ++t) {
    double sum = 0.0;
    for (int q = 0; q < kClassCount; ++q) {
      double v = p[t][q];
      if (!(v >= 0.0) || !std::isfinite(v)) {
        return "row " + std::to_string(t) + " (" + class_name(class_from_index(t)) +
               ") has a negative or non-finite entry";
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.12f", sum);
      return "row " + std::to_string(t) + " (" + class_name(class_from_index(t)) +
             ") sums to " + buf + ", expected 1";
    }
  }
  return std::nullopt;
}

ConfusionMatrix load_confusion_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open confusion matrix file: " + path);
  }
  ConfusionMatrix m;
  int row = 0;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::array<double, kClassCount> vals{};
    int got = 0;
    double v;
    while (ss >> v) {
      if (got < kClassCount) vals[got] = v;
      ++got;
    }
    if (got == 0) continue;  // blank or comment-only line
    if (got != kClassCount) {
      throw std::runtime_error(path + ": row " + std::to_string(row) + " has " +
                               std::to_string(got) + " columns, expected 6");
    }
    if (row >= kClassCount) {
      throw std::runtime_error(path + ": more than 6 data rows");
    }
    m.p[row] = vals;
    ++row;
  }
  if (row != kClassCount) {
    throw std::runtime_error(path + ": found " + std::to_string(row) +
                             " data rows, expected 6");
  }
  if (auto bad = m.validate()) {
    throw std::runtime_error(path + ": " + *bad);
  }
  return m;
}

void save_confusion_matrix(const ConfusionMatrix& m, const std::string& path,
                           std::string_view comment) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write confusion matrix file: " + path);
  }
  if (!comment.empty()) {
    out << "# " << comment << "\n";
  }
  out << "# rows: true class, columns: predicted class\n";
  out << "# order: Good Yellow Broken Peeled Dotted Reject\n";
  char buf[32];
  for (int t = 0; t < kClassCount; ++t) {
    for (int q = 0; q < kClassCount; ++q) {
      std::snprintf(buf, sizeof(buf), "%.4f", m.p[t][q]);
      out << buf << (q + 1 < kClassCount ? " " : "\n");
    }
  }
}

ClassifierOutcome OracleClassifier::classify(GrainClass true_class, Rng&) const {
  ClassifierOutcome out;
  out.predicted = true_class;
  out.class_probs[class_index(true_class)] = 1.0;
  return out;
}

ConfusionClassifier::ConfusionClassifier(const ConfusionMatrix& m) : m_(m) {
  if (auto bad = m_.validate()) {
    throw std::invalid_argument("ConfusionClassifier: " + *bad);
  }
}

ClassifierOutcome ConfusionClassifier::classify(GrainClass true_class, Rng& rng) const {
  const auto& row = m_.p[class_index(true_class)];
  std::size_t sampled = rng.discrete(std::span<const double>(row.data(), row.size()));

  ClassifierOutcome out;
  out.predicted = class_from_index(static_cast<int>(sampled));
  out.class_probs = row;
  double row_max = *std::max_element(row.begin(), row.end());
  out.class_probs[sampled] = row_max + 1e-6;
  double sum = 0.0;
  for (double v : out.class_probs) sum += v;
  for (double& v : out.class_probs) v /= sum;
  return out;
}

double expected_separation_accuracy(const ConfusionMatrix& m, const Mixture& mixture) {
  if (auto bad = m.validate()) {
    throw std::invalid_argument("expected_separation_accuracy: " + *bad);
  }
  int total = 0;
  for (int c : mixture) {
    if (c < 0) throw std::invalid_argument("expected_separation_accuracy: negative count");
    total += c;
  }
  if (total == 0) {
    throw std::invalid_argument("expected_separation_accuracy: empty mixture");
  }
  const int good = class_index(GrainClass::Good);
  double correct = mixture[good] * m.p[good][good];
  for (int t = 0; t < kClassCount; ++t) {
    if (t == good) continue;
    correct += mixture[t] * (1.0 - m.p[t][good]);
  }
  return correct / total;
}

ConfusionMatrix calibrate_fixture(double target_accuracy) {
  // Fixed part of the matrix: the four strong classes sit at the 0.94 floor,
  // which caps their leak into Good at 0.06 per row. The free coordinate is
  // the Good-leak e shared by the Peeled and Dotted rows; separation accuracy
  // is linear in e, so the target pins it exactly.
  const double g = 0.94;       // Good diagonal
  const double leak = 0.06;    // Yellow/Broken/Reject mass on Good
  const Mixture mix = standard_mixture();
  const int total = mixture_total(mix);

  // accuracy = [ 50*g + 3*10*(1-leak) + 2*10*(1-e) ] / 100  ->  solve for e
  double fixed = mix[0] * g + 10.0 * (1.0 - leak) * 3.0 + 20.0;
  double e = (fixed - target_accuracy * total) / 20.0;

  const double sibling = e + 0.005;  // keeps the Peeled<->Dotted mass dominant
  const double small = 0.002;        // residual spread over Yellow/Broken
  const double rej = 0.003;
  double diag = 1.0 - e - sibling - 2.0 * small - rej;

  std::ostringstream why;
  if (e < 0.0 || e > 0.5) why << "required Good leak " << e << " outside [0, 0.5]; ";
  if (diag <= 0.0) why << "Peeled/Dotted diagonal would be " << diag << "; ";
  if (sibling <= e) why << "sibling mass does not dominate the Good leak; ";
  if (!why.str().empty()) {
    throw std::runtime_error("calibrate_fixture: infeasible for target " +
                             std::to_string(target_accuracy) + ": " + why.str());
  }

  ConfusionMatrix m;
  m.p[0] = {g, 0.020, 0.013, 0.012, 0.010, 0.005};          // Good
  m.p[1] = {leak, 0.94, 0.0, 0.0, 0.0, 0.0};                // Yellow
  m.p[2] = {leak, 0.0, 0.94, 0.0, 0.0, 0.0};                // Broken
  m.p[3] = {e, small, small, diag, sibling, rej};           // Peeled
  m.p[4] = {e, small, small, sibling, diag, rej};           // Dotted
  m.p[5] = {leak, 0.0, 0.0, 0.0, 0.0, 0.94};                // Reject

  if (auto bad = m.validate()) {
    throw std::runtime_error("calibrate_fixture: produced invalid matrix: " + *bad);
  }
  double acc = expected_separation_accuracy(m, mix);
  if (std::abs(acc - target_accuracy) > 1e-9) {
    throw std::runtime_error("calibrate_fixture: accuracy " + std::to_string(acc) +
                             " missed target " + std::to_string(target_accuracy));
  }
  return m;
}

}  // namespace lentil
