#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracflow {

inline constexpr double pi = std::numbers::pi_v<double>;
inline constexpr double two_pi = 2.0 * std::numbers::pi_v<double>;

/// Base class for all library errors; `kind()` gives a machine-readable cause.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

struct SizeError : Error {
  explicit SizeError(const std::string& w) : Error("size", w) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error("domain", w) {}
};
struct GeometryError : Error {
  explicit GeometryError(const std::string& w) : Error("geometry", w) {}
};
struct AccuracyError : Error {
  explicit AccuracyError(const std::string& w) : Error("accuracy", w) {}
};
struct MethodError : Error {
  explicit MethodError(const std::string& w) : Error("method", w) {}
};
struct AlgebraError : Error {
  explicit AlgebraError(const std::string& w) : Error("algebra", w) {}
};
struct ResolutionError : Error {
  explicit ResolutionError(const std::string& w) : Error("resolution", w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};
struct DegenerateInputError : Error {
  explicit DegenerateInputError(const std::string& w) : Error("degenerate", w) {}
};
struct FlowHaltError : Error {
  explicit FlowHaltError(const std::string& w) : Error("flow-halt", w) {}
};

/// Two-component vector in the plane.
struct Vec2 {
  double x = 0.0, y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double c) const { return {c * x, c * y}; }
  Vec2 operator-() const { return {-x, -y}; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }
inline double norm(Vec2 a) { return std::sqrt(norm2(a)); }

/// Point on the unit circle at angle theta.
inline Vec2 circle_point(double theta) { return {std::cos(theta), std::sin(theta)}; }
/// Unit tangent (counterclockwise) at angle theta.
inline Vec2 circle_tangent(double theta) { return {-std::sin(theta), std::cos(theta)}; }

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Validates a grid size per the global grid contract.
inline void require_grid_size(std::size_t n) {
  if (!is_power_of_two(n) || n < 16 || n > 4096)
    throw SizeError("grid size must be a power of two in [16, 4096], got " +
                    std::to_string(n));
}

/// Validates the fractional exponent of the kernel family.
inline void require_s(double s) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("s must lie in (0, 1)");
}

/// Wraps an angle into [0, 2*pi).
inline double wrap_angle(double a) {
  a = std::fmod(a, two_pi);
  return a < 0 ? a + two_pi : a;
}

/// Chordal distance between unit-circle points at angles a and b.
inline double chord_distance(double a, double b) {
  return 2.0 * std::abs(std::sin(0.5 * (a - b)));
}

}  // namespace fracflow
