#pragma once

#include <array>
#include <string>
#include <vector>

#include "jcdi/errors.hpp"

namespace jcdi {

inline constexpr int kNumParams = 30;

/// Indices into the 30-dimensional identification vector. Order is the
/// canonical on-disk and in-model order everywhere.
namespace pidx {
enum : int {
    Fma = 0,
    Fmb,
    Fmc,
    Fmd,
    Fel,
    FderA,
    LsA,
    EtrqA,
    LsB,
    Tp0B,
    EtrqB,
    LsC,
    Tp0C,
    EtrqC,
    Rstall,
    Xstall,
    CompPF,
    Frst,
    Kp1,
    Np1,
    Nq1,
    Np2,
    Nq2,
    P1c,
    P2c,
    PF,
    frcel,
    Qel0,
    Imax,
    Qref,
};
}  // namespace pidx

/// A point in physical parameter space, ordered as ParamSpace::names().
struct ParamVector {
    std::array<double, kNumParams> v{};

    double& operator[](int i) { return v[static_cast<size_t>(i)]; }
    double operator[](int i) const { return v[static_cast<size_t>(i)]; }
};

/// Bounds, defaults and names of the identifiable composite-load parameters.
class ParamSpace {
  public:
    /// The standard 30-parameter space (load fractions, motor constants,
    /// stall/trip characteristics, static-load and DER settings).
    static const ParamSpace& clm30();

    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(int i) const { return names_[static_cast<size_t>(i)]; }
    double lower(int i) const { return lower_[static_cast<size_t>(i)]; }
    double upper(int i) const { return upper_[static_cast<size_t>(i)]; }
    double range(int i) const { return upper(i) - lower(i); }
    ParamVector defaults() const;

    /// Index of a parameter name; throws contract_error if unknown.
    int index(const std::string& name) const;

    bool in_bounds(const ParamVector& p, double tol = 0.0) const;
    void require_in_bounds(const ParamVector& p) const;

    ParamSpace(std::vector<std::string> names, std::vector<double> lower, std::vector<double> upper,
               std::vector<double> defaults);

  private:
    std::vector<std::string> names_;
    std::vector<double> lower_, upper_, defaults_;
};

/// Affine map [lower, upper] <-> [-1, 1] per coordinate.
ParamVector normalize_params(const ParamVector& physical, const ParamSpace& space);
ParamVector denormalize_params(const ParamVector& normalized, const ParamSpace& space);

/// Rounds a physical value to float32 and nudges it back inside [lo, hi] if
/// the rounding pushed it out. Dataset parameters are stored as float32, and
/// sampling through this function makes stored records replay bit-exactly.
float snap_to_f32_bounds(double x, double lo, double hi);

}  // namespace jcdi
