#include "lentil/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lentil {

bool BBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min <= x_max && y_min <= y_max;
}

double iou(const BBox& a, const BBox& b) {
  double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw std::invalid_argument("nms: iou_threshold must lie in [0, 1]");
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].objectness > dets[b].objectness;
  });

  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (iou(dets[idx].bbox, k.bbox) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(dets[idx]);
  }
  return kept;
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out(z.size());
  if (z.empty()) return out;
  double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::array<double, kClassCount> softmax(const Logits& z) {
  auto v = softmax(std::span<const double>(z.data(), z.size()));
  std::array<double, kClassCount> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

double bce(double p, double y) {
  constexpr double kEps = 1e-7;
  p = std::clamp(p, kEps, 1.0 - kEps);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

LossBreakdown composite_loss(const Detection& pred, const Detection& target,
                             const LossWeights& w) {
  // A malformed fixture is a test bug, not a data condition: reject it loudly.
  int ones = 0;
  for (double p : target.class_probs) {
    if (std::abs(p - 1.0) <= 1e-9) {
      ++ones;
    } else if (std::abs(p) > 1e-9) {
      throw std::invalid_argument("composite_loss: target class vector is not one-hot");
    }
  }
  if (ones != 1) {
    throw std::invalid_argument("composite_loss: target class vector is not one-hot");
  }
  double obj = target.objectness;
  if (std::abs(obj) > 1e-9 && std::abs(obj - 1.0) > 1e-9) {
    throw std::invalid_argument("composite_loss: target objectness must be 0 or 1");
  }
  obj = std::round(obj);

  LossBreakdown out;
  out.box_term = 1.0 - iou(pred.bbox, target.bbox);
  out.obj_term = bce(pred.objectness, obj);
  double cls = 0.0;
  for (int c = 0; c < kClassCount; ++c) {
    cls += bce(pred.class_probs[c], std::round(target.class_probs[c]));
  }
  out.cls_term = cls / kClassCount;
  out.total = w.lambda_box * out.box_term + w.lambda_obj * out.obj_term +
              w.lambda_cls * out.cls_term;
  return out;
}

BeltPoint px_to_belt(PxPoint p, const Calibration& cal) {
  if (!(p.x >= 0.0 && p.x <= cal.image_width && p.y >= 0.0 && p.y <= cal.image_height)) {
    throw std::domain_error("px_to_belt: point outside image bounds");
  }
  return {(p.y - cal.origin_px.y) * cal.mm_per_px_along,
          (p.x - cal.origin_px.x) * cal.mm_per_px_cross};
}

PxPoint belt_to_px(BeltPoint b, const Calibration& cal) {
  return {cal.origin_px.x + b.cross_mm / cal.mm_per_px_cross,
          cal.origin_px.y + b.along_mm / cal.mm_per_px_along};
}

}  // namespace lentil
