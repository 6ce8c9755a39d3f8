#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gddm {

/// Grid extents of a Field: rows (u), columns (v) and channels.
struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t pixels() const noexcept { return height * width; }
  std::size_t size() const noexcept { return height * width * channels; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

/// Validates a shape and returns its element count; throws DimensionError
/// on zero extents or when h*w*c does not fit in memory.
std::size_t checked_size(const Shape& shape);

/// H x W x C grid of doubles stored row-major with the channel index
/// fastest, i.e. element (u, v, c) lives at (u * W + v) * C + c.
class Field {
 public:
  Field() = default;
  explicit Field(Shape shape, double fill = 0.0);
  Field(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t u, std::size_t v, std::size_t c = 0) noexcept {
    return data_[(u * shape_.width + v) * shape_.channels + c];
  }
  double operator()(std::size_t u, std::size_t v, std::size_t c = 0) const noexcept {
    return data_[(u * shape_.width + v) * shape_.channels + c];
  }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  Field& operator+=(const Field& rhs);
  Field& operator-=(const Field& rhs);
  Field& operator*=(double a) noexcept;

  friend bool operator==(const Field&, const Field&) = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

Field operator+(Field lhs, const Field& rhs);
Field operator-(Field lhs, const Field& rhs);
Field operator*(double a, Field x);

/// Field of the given dimensions with every entry equal to `fill`.
Field new_field(std::size_t height, std::size_t width, std::size_t channels, double fill);

/// a*x + b*y elementwise.
Field lincomb(double a, const Field& x, double b, const Field& y);

/// Throws ShapeError unless both fields share a shape.
void require_same_shape(const Field& a, const Field& b, const char* what);

double dot(const Field& a, const Field& b);
double norm2(const Field& x);
double max_abs(const Field& x);
double mean(const Field& x);
bool all_finite(const Field& x) noexcept;

/// Copy of one channel as a single-channel field.
Field channel(const Field& x, std::size_t c);
/// Concatenates fields of equal height/width along the channel axis.
Field stack_channels(std::span<const Field> parts);

struct FieldStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double excess_kurtosis = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
  // Set when variance or kurtosis is undefined (one entry or zero spread);
  // the affected moments are then reported as 0.
  bool degenerate = false;
};

FieldStats field_stats(const Field& x);
FieldStats field_stats(std::span<const double> values);

}  // namespace gddm
