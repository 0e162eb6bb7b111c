#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fibcap {

// Row-major 2-D array. For polar IVOCT data rows index depth r and
// columns index the A-line angle theta.
template <typename T>
class Image2D {
 public:
  Image2D() : rows_(0), cols_(0) {}
  Image2D(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, fill) {
    if (rows <= 0 || cols <= 0)
      throw std::invalid_argument("Image2D: dimensions must be positive");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return v_.size(); }

  T& at(int r, int c) { return v_[static_cast<size_t>(r) * cols_ + c]; }
  const T& at(int r, int c) const {
    return v_[static_cast<size_t>(r) * cols_ + c];
  }

  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }
  std::vector<T>& raw() { return v_; }
  const std::vector<T>& raw() const { return v_; }

  bool same_shape(const Image2D& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool operator==(const Image2D& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_;
  }

 private:
  int rows_, cols_;
  std::vector<T> v_;
};

using ImageF = Image2D<float>;
using ImageU8 = Image2D<uint8_t>;

enum class MaskClass { FC, Calcification };

// Binary label aligned to a polar frame; values are 0 or 1.
struct Mask {
  ImageU8 data;
  MaskClass class_tag = MaskClass::FC;

  Mask() = default;
  Mask(int rows, int cols, MaskClass tag = MaskClass::FC)
      : data(rows, cols, 0), class_tag(tag) {}
  explicit Mask(ImageU8 img, MaskClass tag = MaskClass::FC)
      : data(std::move(img)), class_tag(tag) {
    for (uint8_t v : data.raw())
      if (v > 1) throw std::invalid_argument("Mask: values must be 0 or 1");
  }

  int rows() const { return data.rows(); }
  int cols() const { return data.cols(); }
  size_t count_ones() const {
    size_t n = 0;
    for (uint8_t v : data.raw()) n += v;
    return n;
  }
};

}  // namespace fibcap
