#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ccdet {

// Axis-aligned box in corner form, continuous pixel coordinates.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const;
  bool valid() const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Center / size form of a box.
struct BBoxCwh {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const BBoxCwh&, const BBoxCwh&) = default;
};

BBoxCwh to_cwh(const BBox& b);
BBox to_corners(const BBoxCwh& b);

// Dense W x H binary mask stored as a row-major bitset.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t width, std::size_t height);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t pixel_count() const { return width_ * height_; }
  bool empty_extent() const { return pixel_count() == 0; }

  bool get(std::size_t x, std::size_t y) const {
    const std::size_t i = y * width_ + x;
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  void set(std::size_t x, std::size_t y, bool value = true) {
    const std::size_t i = y * width_ + x;
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    if (value) {
      words_[i >> 6] |= bit;
    } else {
      words_[i >> 6] &= ~bit;
    }
  }

  std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint64_t> words_;
};

// COCO-style uncompressed RLE: alternating 0/1 runs in column-major order,
// first run counts zeros (possibly 0).
struct RleMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint64_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

// Real-interval IoU. Zero when the boxes do not overlap or both are degenerate.
double iou_box(const BBox& a, const BBox& b);

// Pixel IoU |a & b| / |a | b|; 0 when both masks are empty.
// Throws DimensionMismatchError if the sizes differ.
double iou_mask(const BinaryMask& a, const BinaryMask& b);

std::size_t mask_area(const BinaryMask& m);
std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b);

// Tightest box around the set pixels with closed-interval extents
// (w = max - min + 1). Throws EmptyMaskError for an empty mask.
BBoxCwh mask_bbox(const BinaryMask& m);

// Throws CorruptRleError when the runs do not cover exactly H x W pixels.
BinaryMask rle_decode(const RleMask& r);
RleMask rle_encode(const BinaryMask& m);

}  // namespace ccdet
