#include "ccdet/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "ccdet/errors.hpp"

namespace ccdet {

double BBox::area() const {
  return std::max(0.0, width()) * std::max(0.0, height());
}

bool BBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
         std::isfinite(y2) && x1 <= x2 && y1 <= y2;
}

BBoxCwh to_cwh(const BBox& b) {
  return {(b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0, b.x2 - b.x1, b.y2 - b.y1};
}

BBox to_corners(const BBoxCwh& b) {
  return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0,
          b.cy + b.h / 2.0};
}

double iou_box(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) {
    return 0.0;
  }
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) {
    return 0.0;
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

BinaryMask::BinaryMask(std::size_t width, std::size_t height)
    : width_(width), height_(height), words_((width * height + 63) / 64, 0) {}

std::size_t mask_area(const BinaryMask& m) {
  std::size_t n = 0;
  for (std::uint64_t w : m.words()) {
    n += static_cast<std::size_t>(std::popcount(w));
  }
  return n;
}

namespace {

void require_same_dims(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionMismatchError(
        "mask dimensions differ: " + std::to_string(a.width()) + "x" +
        std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
        std::to_string(b.height()));
  }
}

}  // namespace

std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a, b);
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t n = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) {
    n += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
  }
  return n;
}

double iou_mask(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a, b);
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) {
    inter += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
    uni += static_cast<std::size_t>(std::popcount(wa[i] | wb[i]));
  }
  if (uni == 0) {
    return 0.0;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BBoxCwh mask_bbox(const BinaryMask& m) {
  std::size_t min_x = std::numeric_limits<std::size_t>::max();
  std::size_t min_y = min_x;
  std::size_t max_x = 0;
  std::size_t max_y = 0;
  bool any = false;
  const auto words = m.words();
  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    std::uint64_t w = words[wi];
    while (w != 0) {
      const std::size_t i = wi * 64 + static_cast<std::size_t>(std::countr_zero(w));
      w &= w - 1;
      const std::size_t x = i % m.width();
      const std::size_t y = i / m.width();
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
      any = true;
    }
  }
  if (!any) {
    throw EmptyMaskError("mask has no set pixels");
  }
  return {(static_cast<double>(min_x) + static_cast<double>(max_x)) / 2.0,
          (static_cast<double>(min_y) + static_cast<double>(max_y)) / 2.0,
          static_cast<double>(max_x - min_x + 1),
          static_cast<double>(max_y - min_y + 1)};
}

BinaryMask rle_decode(const RleMask& r) {
  const std::size_t total = r.height * r.width;
  std::size_t sum = 0;
  for (std::uint64_t c : r.counts) {
    if (c > total || sum + c > total) {
      throw CorruptRleError("RLE runs exceed mask size " +
                            std::to_string(r.height) + "x" +
                            std::to_string(r.width));
    }
    sum += c;
  }
  if (sum != total) {
    throw CorruptRleError("RLE runs sum to " + std::to_string(sum) +
                          ", expected " + std::to_string(total));
  }
  BinaryMask m(r.width, r.height);
  std::size_t pos = 0;
  bool value = false;
  for (std::uint64_t c : r.counts) {
    if (value) {
      for (std::size_t i = pos; i < pos + c; ++i) {
        // column-major position -> (x, y)
        m.set(i / r.height, i % r.height);
      }
    }
    pos += c;
    value = !value;
  }
  return m;
}

RleMask rle_encode(const BinaryMask& m) {
  RleMask r;
  r.height = m.height();
  r.width = m.width();
  bool prev = false;
  std::uint64_t run = 0;
  for (std::size_t x = 0; x < m.width(); ++x) {
    for (std::size_t y = 0; y < m.height(); ++y) {
      const bool v = m.get(x, y);
      if (v != prev) {
        r.counts.push_back(run);
        run = 0;
        prev = v;
      }
      ++run;
    }
  }
  r.counts.push_back(run);
  return r;
}

}  // namespace ccdet
