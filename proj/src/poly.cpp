#include "hybridsde/poly.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>

#include "hybridsde/errors.hpp"

namespace hsde {

namespace {

void check_coeffs(const std::vector<double>& c) {
    if (c.empty()) throw ModelError("polynomial needs at least one coefficient");
    for (double v : c) {
        if (!std::isfinite(v)) throw ModelError("polynomial coefficient is not finite");
    }
}

}  // namespace

PolyExpr::PolyExpr() : coeffs_{0.0} {}

PolyExpr::PolyExpr(std::initializer_list<double> coeffs) : coeffs_(coeffs) {
    check_coeffs(coeffs_);
}

PolyExpr::PolyExpr(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    check_coeffs(coeffs_);
}

double PolyExpr::operator()(double x) const noexcept {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
    return acc;
}

bool PolyExpr::is_constant() const noexcept {
    for (std::size_t k = 1; k < coeffs_.size(); ++k) {
        if (coeffs_[k] != 0.0) return false;
    }
    return true;
}

bool PolyExpr::is_zero() const noexcept { return is_constant() && coeffs_[0] == 0.0; }

PolyExpr PolyExpr::derivative() const {
    if (coeffs_.size() == 1) return PolyExpr{};
    std::vector<double> d(coeffs_.size() - 1);
    for (std::size_t k = 1; k < coeffs_.size(); ++k) d[k - 1] = static_cast<double>(k) * coeffs_[k];
    return PolyExpr(std::move(d));
}

std::vector<double> PolyExpr::roots_in(double lo, double hi, int samples) const {
    std::vector<double> roots;
    if (is_constant() || !(hi > lo)) return roots;
    const auto& f = *this;
    const double step = (hi - lo) / samples;
    double x0 = lo;
    double f0 = f(x0);
    boost::math::tools::eps_tolerance<double> tol(50);
    for (int k = 1; k <= samples; ++k) {
        const double x1 = (k == samples) ? hi : lo + k * step;
        const double f1 = f(x1);
        if (f0 == 0.0) {
            roots.push_back(x0);
        } else if (f1 != 0.0 && std::signbit(f0) != std::signbit(f1)) {
            std::uintmax_t iters = 200;
            auto bracket = boost::math::tools::bisect(f, x0, x1, tol, iters);
            roots.push_back(0.5 * (bracket.first + bracket.second));
        }
        x0 = x1;
        f0 = f1;
    }
    if (f0 == 0.0) roots.push_back(x0);
    return roots;
}

std::vector<double> PolyExpr::extremum_candidates(double lo, double hi) const {
    std::vector<double> pts{lo, hi};
    if (degree() >= 2) {
        for (double r : derivative().roots_in(lo, hi)) pts.push_back(r);
    }
    return pts;
}

}  // namespace hsde
