#include "jcdi/params.hpp"

#include <cmath>

namespace jcdi {

ParamSpace::ParamSpace(std::vector<std::string> names, std::vector<double> lower,
                       std::vector<double> upper, std::vector<double> defaults)
    : names_(std::move(names)), lower_(std::move(lower)), upper_(std::move(upper)), defaults_(std::move(defaults)) {
    if (names_.size() != lower_.size() || names_.size() != upper_.size() || names_.size() != defaults_.size())
        throw contract_error("ParamSpace: mismatched table sizes");
    for (size_t i = 0; i < names_.size(); ++i) {
        if (!(lower_[i] < upper_[i])) throw contract_error("ParamSpace: lower >= upper for " + names_[i]);
        if (defaults_[i] < lower_[i] || defaults_[i] > upper_[i])
            throw contract_error("ParamSpace: default out of bounds for " + names_[i]);
    }
}

const ParamSpace& ParamSpace::clm30() {
    static const ParamSpace space(
        {"Fma",    "Fmb",  "Fmc",  "Fmd",    "Fel",  "FderA", "LsA",   "EtrqA", "LsB",   "Tp0B",
         "EtrqB",  "LsC",  "Tp0C", "EtrqC",  "Rstall", "Xstall", "CompPF", "Frst", "Kp1", "Np1",
         "Nq1",    "Np2",  "Nq2",  "P1c",    "P2c",  "PF",    "frcel", "Qel0",  "Imax",  "Qref"},
        {0.1, 0.1, 0.1, 0.1, 0.1, -0.3, 1.5, 0.0, 1.5, 0.08, 1.5, 1.5, 0.08, 1.5, 0.08,
         0.08, 0.9, 0.15, -1.0, 0.5, 1.0, 1.6, 1.25, 0.3, 0.5, 0.9, 0.5, 0.1, 1.0, 0.1},
        {0.3, 0.3, 0.3, 0.3, 0.3, -0.1, 3.0, 1.0, 3.0, 0.12, 2.5, 3.0, 0.12, 2.5, 0.12,
         0.12, 1.0, 0.3, 1.0, 1.5, 3.0, 4.8, 3.75, 0.5, 0.7, 1.0, 0.9, 0.3, 1.5, 0.3},
        {0.2, 0.2, 0.2, 0.2, 0.2, -0.2, 1.8, 0.0, 1.8, 0.1, 2.0, 1.8, 0.1, 2.0, 0.1,
         0.1, 0.98, 0.2, 0.0, 1.0, 2.0, 3.2, 2.5, 0.4, 0.6, 0.95, 0.75, 0.2, 1.2, 0.2});
    return space;
}

ParamVector ParamSpace::defaults() const {
    ParamVector p;
    for (int i = 0; i < size(); ++i) p[i] = defaults_[static_cast<size_t>(i)];
    return p;
}

int ParamSpace::index(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
        if (names_[static_cast<size_t>(i)] == name) return i;
    throw contract_error("unknown parameter name: " + name);
}

bool ParamSpace::in_bounds(const ParamVector& p, double tol) const {
    for (int i = 0; i < size(); ++i)
        if (p[i] < lower(i) - tol || p[i] > upper(i) + tol) return false;
    return true;
}

void ParamSpace::require_in_bounds(const ParamVector& p) const {
    for (int i = 0; i < size(); ++i)
        if (p[i] < lower(i) || p[i] > upper(i))
            throw contract_error("parameter " + name(i) + " out of bounds");
}

ParamVector normalize_params(const ParamVector& physical, const ParamSpace& space) {
    ParamVector x;
    for (int i = 0; i < space.size(); ++i)
        x[i] = 2.0 * (physical[i] - space.lower(i)) / space.range(i) - 1.0;
    return x;
}

ParamVector denormalize_params(const ParamVector& normalized, const ParamSpace& space) {
    ParamVector p;
    for (int i = 0; i < space.size(); ++i)
        p[i] = space.lower(i) + 0.5 * (normalized[i] + 1.0) * space.range(i);
    return p;
}

float snap_to_f32_bounds(double x, double lo, double hi) {
    float f = static_cast<float>(x);
    while (static_cast<double>(f) < lo) f = std::nextafterf(f, std::numeric_limits<float>::max());
    while (static_cast<double>(f) > hi) f = std::nextafterf(f, -std::numeric_limits<float>::max());
    return f;
}

}  // namespace jcdi
