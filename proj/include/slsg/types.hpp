#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace slsg {

/// Largest state (or control) dimension supported by the fixed-capacity vectors.
inline constexpr int kMaxDim = 10;

/// Largest number of Brownian drivers (columns of the diffusion matrix).
inline constexpr int kMaxNoise = 10;

/// Raised for invalid arguments and violated preconditions.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Fixed-capacity vector of length d <= kMaxDim; keeps hot-path points off the heap.
template <class T>
class DimVector {
public:
  DimVector() = default;
  explicit DimVector(int n, T fill = T{}) : size_(n) {
    if (n < 0 || n > kMaxDim)
      throw Error("dimension " + std::to_string(n) + " outside [0, " + std::to_string(kMaxDim) + "]");
    std::fill_n(data_.begin(), n, fill);
  }
  DimVector(std::initializer_list<T> values) : DimVector(static_cast<int>(values.size())) {
    std::copy(values.begin(), values.end(), data_.begin());
  }

  int size() const { return size_; }
  bool empty() const { return size_ == 0; }

  T& operator[](int j) {
    assert(j >= 0 && j < size_);
    return data_[j];
  }
  const T& operator[](int j) const {
    assert(j >= 0 && j < size_);
    return data_[j];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* begin() { return data_.data(); }
  T* end() { return data_.data() + size_; }
  const T* begin() const { return data_.data(); }
  const T* end() const { return data_.data() + size_; }

  void push_back(T value) {
    if (size_ == kMaxDim) throw Error("DimVector capacity exceeded");
    data_[size_++] = value;
  }

  friend bool operator==(const DimVector& a, const DimVector& b) {
    return a.size_ == b.size_ && std::equal(a.begin(), a.end(), b.begin());
  }

private:
  std::array<T, kMaxDim> data_{};
  int size_ = 0;
};

/// Per-dimension hierarchical levels; level 0 marks a boundary node (exact boundary mode only).
struct MultiLevel : DimVector<int> {
  using DimVector<int>::DimVector;
};

/// Per-dimension hierarchical indices; interior entries are odd, boundary entries are 0 or 1.
struct MultiIndex : DimVector<int> {
  using DimVector<int>::DimVector;
};

using Point = DimVector<double>;
using Control = DimVector<double>;

enum class BoundaryMode { exact, modified };

std::string to_string(BoundaryMode mode);
BoundaryMode parse_boundary_mode(const std::string& text);

/// Axis-aligned box [lower_j, upper_j] per dimension.
struct Box {
  Point lower;
  Point upper;

  int dimension() const { return lower.size(); }
  bool contains(const Point& x) const {
    for (int j = 0; j < lower.size(); ++j)
      if (x[j] < lower[j] || x[j] > upper[j]) return false;
    return true;
  }
  static Box unit(int d) { return Box{Point(d, 0.0), Point(d, 1.0)}; }
};

/// Affine map of a physical point into [0,1]^d, without clamping.
inline Point to_unit(const Box& domain, const Point& x) {
  Point u(x.size());
  for (int j = 0; j < x.size(); ++j) u[j] = (x[j] - domain.lower[j]) / (domain.upper[j] - domain.lower[j]);
  return u;
}

inline Point from_unit(const Box& domain, const Point& u) {
  Point x(u.size());
  for (int j = 0; j < u.size(); ++j) x[j] = domain.lower[j] + u[j] * (domain.upper[j] - domain.lower[j]);
  return x;
}

}  // namespace slsg
