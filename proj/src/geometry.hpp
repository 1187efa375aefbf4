#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace fplo {

/// Axis-aligned rectangular spatial domain.
struct Rect {
  double xmin = -1.0, xmax = 1.0;
  double ymin = -1.0, ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  bool degenerate() const { return width() <= 0.0 || height() <= 0.0; }
};

/// Outward normals of the rectangle boundary.
enum class NormalTag { XMinus = 0, XPlus = 1, YMinus = 2, YPlus = 3 };

inline constexpr int kNormalCount = 4;

inline Eigen::Vector3d unit_normal(NormalTag tag) {
  switch (tag) {
    case NormalTag::XMinus: return {-1.0, 0.0, 0.0};
    case NormalTag::XPlus: return {1.0, 0.0, 0.0};
    case NormalTag::YMinus: return {0.0, -1.0, 0.0};
    case NormalTag::YPlus: return {0.0, 1.0, 0.0};
  }
  throw std::logic_error("unit_normal: bad tag");
}

inline const char* normal_name(NormalTag tag) {
  switch (tag) {
    case NormalTag::XMinus: return "x-";
    case NormalTag::XPlus: return "x+";
    case NormalTag::YMinus: return "y-";
    case NormalTag::YPlus: return "y+";
  }
  return "?";
}

}  // namespace fplo
