#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdopf {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr Complex kImag{0.0, 1.0};

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Thrown on malformed or inconsistent inputs (files, schemas, model data).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical procedure cannot continue (factorization breakdown,
/// divergent iteration, ...).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Ordered subset of the three phases {a,b,c}; phase indices 0,1,2.
/// Iteration order is always a<b<c, matching the global row layout.
class PhaseSet {
 public:
  PhaseSet() = default;
  explicit PhaseSet(unsigned mask) : mask_(mask & 7u) {}

  static PhaseSet parse(const std::string& s) {
    PhaseSet p;
    for (char ch : s) {
      if (ch == 'a' || ch == 'A')
        p.mask_ |= 1u;
      else if (ch == 'b' || ch == 'B')
        p.mask_ |= 2u;
      else if (ch == 'c' || ch == 'C')
        p.mask_ |= 4u;
      else if (ch == ' ' || ch == ',')
        continue;
      else
        throw InputError("unknown phase letter '" + std::string(1, ch) + "'");
    }
    return p;
  }

  static PhaseSet all() { return PhaseSet(7u); }
  static PhaseSet single(int phase) { return PhaseSet(1u << check(phase)); }

  bool empty() const { return mask_ == 0; }
  bool has(int phase) const { return (mask_ >> check(phase)) & 1u; }
  void add(int phase) { mask_ |= 1u << check(phase); }
  int count() const { return ((mask_ & 1u) != 0) + ((mask_ & 2u) != 0) + ((mask_ & 4u) != 0); }
  unsigned mask() const { return mask_; }

  bool subset_of(PhaseSet o) const { return (mask_ & ~o.mask_) == 0; }
  PhaseSet intersect(PhaseSet o) const { return PhaseSet(mask_ & o.mask_); }
  bool operator==(const PhaseSet& o) const { return mask_ == o.mask_; }

  /// Phases in ascending order.
  std::vector<int> list() const {
    std::vector<int> v;
    for (int p = 0; p < 3; ++p)
      if (has(p)) v.push_back(p);
    return v;
  }

  /// Position of `phase` within this set's ascending order, -1 if absent.
  int index_of(int phase) const {
    if (!has(phase)) return -1;
    int k = 0;
    for (int p = 0; p < check(phase); ++p)
      if (has(p)) ++k;
    return k;
  }

  std::string str() const {
    std::string s;
    for (int p = 0; p < 3; ++p)
      if (has(p)) s += static_cast<char>('a' + p);
    return s;
  }

 private:
  static int check(int phase) {
    if (phase < 0 || phase > 2) throw InputError("phase index out of range");
    return phase;
  }
  unsigned mask_ = 0;
};

inline char phase_letter(int p) { return static_cast<char>('a' + p); }

}  // namespace sdopf
