#include "gddm/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gddm/error.hpp"

namespace gddm {

std::string to_string(const Shape& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
         std::to_string(shape.channels);
}

std::size_t checked_size(const Shape& shape) {
  if (shape.height == 0 || shape.width == 0 || shape.channels == 0) {
    throw DimensionError("field dimensions must be positive, got " + to_string(shape));
  }
  constexpr std::size_t limit = std::numeric_limits<std::ptrdiff_t>::max() / sizeof(double);
  if (shape.height > limit / shape.width || shape.height * shape.width > limit / shape.channels) {
    throw DimensionError("field dimensions overflow: " + to_string(shape));
  }
  return shape.size();
}

Field::Field(Shape shape, double fill) : shape_(shape), data_(checked_size(shape), fill) {}

Field::Field(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != checked_size(shape)) {
    throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         to_string(shape));
  }
}

Field& Field::operator+=(const Field& rhs) {
  require_same_shape(*this, rhs, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
  return *this;
}

Field& Field::operator-=(const Field& rhs) {
  require_same_shape(*this, rhs, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
  return *this;
}

Field& Field::operator*=(double a) noexcept {
  for (auto& x : data_) x *= a;
  return *this;
}

Field operator+(Field lhs, const Field& rhs) { return lhs += rhs; }
Field operator-(Field lhs, const Field& rhs) { return lhs -= rhs; }
Field operator*(double a, Field x) { return x *= a; }

Field new_field(std::size_t height, std::size_t width, std::size_t channels, double fill) {
  return Field(Shape{height, width, channels}, fill);
}

Field lincomb(double a, const Field& x, double b, const Field& y) {
  require_same_shape(x, y, "lincomb");
  Field out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i];
  return out;
}

void require_same_shape(const Field& a, const Field& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

double dot(const Field& a, const Field& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Field& x) { return std::sqrt(dot(x, x)); }

double max_abs(const Field& x) {
  double m = 0.0;
  for (double v : x.data()) m = std::max(m, std::abs(v));
  return m;
}

double mean(const Field& x) {
  if (x.empty()) throw DimensionError("mean of empty field");
  double s = 0.0;
  for (double v : x.data()) s += v;
  return s / static_cast<double>(x.size());
}

bool all_finite(const Field& x) noexcept {
  return std::all_of(x.data().begin(), x.data().end(), [](double v) { return std::isfinite(v); });
}

Field channel(const Field& x, std::size_t c) {
  if (c >= x.channels()) throw IndexError("channel index out of range");
  Field out(Shape{x.height(), x.width(), 1});
  const std::size_t nc = x.channels();
  for (std::size_t p = 0; p < x.shape().pixels(); ++p) out[p] = x[p * nc + c];
  return out;
}

Field stack_channels(std::span<const Field> parts) {
  if (parts.empty()) throw DimensionError("stack_channels: no inputs");
  Shape shape{parts[0].height(), parts[0].width(), 0};
  for (const auto& p : parts) {
    if (p.height() != shape.height || p.width() != shape.width) {
      throw ShapeError("stack_channels: spatial extents differ");
    }
    shape.channels += p.channels();
  }
  Field out(shape);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p.channels();
    for (std::size_t px = 0; px < shape.pixels(); ++px) {
      for (std::size_t c = 0; c < pc; ++c) out[px * shape.channels + offset + c] = p[px * pc + c];
    }
    offset += pc;
  }
  return out;
}

FieldStats field_stats(std::span<const double> values) {
  if (values.empty()) throw DimensionError("field_stats of empty field");
  FieldStats st;
  st.count = values.size();
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  st.min = values[0];
  st.max = values[0];
  for (double v : values) {
    sum += v;
    st.min = std::min(st.min, v);
    st.max = std::max(st.max, v);
  }
  st.mean = std::clamp(sum / n, st.min, st.max);

  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : values) {
    const double d = v - st.mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  if (values.size() < 2 || m2 == 0.0) {
    st.variance = 0.0;
    st.excess_kurtosis = 0.0;
    st.degenerate = true;
    return st;
  }
  st.variance = m2 / (n - 1.0);
  const double pop2 = m2 / n;
  st.excess_kurtosis = (m4 / n) / (pop2 * pop2) - 3.0;
  return st;
}

FieldStats field_stats(const Field& x) { return field_stats(x.data()); }

}  // namespace gddm
