#pragma once

#include <array>
#include <span>
#include <vector>

#include "lentil/grain_class.hpp"

namespace lentil {

// Axis-aligned box in continuous image pixels, corner form.
// Degenerate (zero-area) boxes are valid; inverted or non-finite ones are not.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  bool valid() const;

  static BBox from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }
};

struct Detection {
  BBox bbox;
  double objectness = 0.0;  // in [0, 1]
  std::array<double, kClassCount> class_probs{};
};

// Raw per-class scores ahead of the softmax.
using Logits = std::array<double, kClassCount>;

struct LossWeights {
  double lambda_box = 1.0;
  double lambda_obj = 1.0;
  double lambda_cls = 1.0;
};

struct LossBreakdown {
  double total = 0.0;
  double box_term = 0.0;
  double obj_term = 0.0;
  double cls_term = 0.0;
};

// Intersection over union (Jaccard index). Returns 0 when the union has zero
// area, so degenerate boxes never match anything.
double iou(const BBox& a, const BBox& b);

// Greedy non-maximum suppression, class-agnostic. Candidates are visited in
// descending objectness (ties keep input order) and dropped when their IoU
// with an already kept box exceeds the threshold. Output is ordered by
// descending objectness.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold);

// Numerically stable softmax (max subtraction).
std::vector<double> softmax(std::span<const double> z);
std::array<double, kClassCount> softmax(const Logits& z);

// Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7]; y must be 0 or 1.
double bce(double p, double y);

// Weighted sum of (1 - IoU), objectness BCE and mean per-class BCE.
// target must carry a one-hot class vector and a 0/1 objectness.
LossBreakdown composite_loss(const Detection& pred, const Detection& target,
                             const LossWeights& w);

struct PxPoint {
  double x = 0.0;
  double y = 0.0;
};

struct BeltPoint {
  double along_mm = 0.0;  // belt-travel axis, increases toward the nozzles
  double cross_mm = 0.0;  // across the belt
};

// Linear pixel<->belt map. Image vertical (y) runs along belt travel and
// horizontal (x) across it; origin_px is the pixel at belt coordinate (0, 0).
struct Calibration {
  double mm_per_px_along = 100.0 / 1080.0;
  double mm_per_px_cross = 100.0 / 1920.0;
  PxPoint origin_px{0.0, 0.0};
  int image_width = 1920;
  int image_height = 1080;
};

// Maps an in-image pixel to belt coordinates; throws std::domain_error for a
// point outside the image (an out-of-image detection is a detector bug).
BeltPoint px_to_belt(PxPoint p, const Calibration& cal);
PxPoint belt_to_px(BeltPoint b, const Calibration& cal);

}  // namespace lentil
