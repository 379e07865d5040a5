#pragma once

#include <initializer_list>
#include <span>
#include <vector>

namespace hsde {

/// Polynomial x -> sum_k c_k x^k with coefficients stored lowest degree first.
class PolyExpr {
public:
    /// Zero polynomial.
    PolyExpr();
    PolyExpr(std::initializer_list<double> coeffs);
    explicit PolyExpr(std::vector<double> coeffs);

    static PolyExpr constant(double c) { return PolyExpr({c}); }

    double operator()(double x) const noexcept;

    std::size_t degree() const noexcept { return coeffs_.size() - 1; }
    std::span<const double> coeffs() const noexcept { return coeffs_; }
    bool is_constant() const noexcept;
    bool is_zero() const noexcept;

    PolyExpr derivative() const;

    /// Real roots of the polynomial inside [lo, hi], located by sign changes
    /// on a uniform sample of `samples` sub-intervals and refined by bisection.
    /// Tangential (even multiplicity) roots that never change sign are missed.
    std::vector<double> roots_in(double lo, double hi, int samples = 2000) const;

    /// Points of [lo, hi] where the polynomial may attain an extremum:
    /// the two endpoints plus the interior roots of the derivative.
    std::vector<double> extremum_candidates(double lo, double hi) const;

    friend bool operator==(const PolyExpr&, const PolyExpr&) = default;

private:
    std::vector<double> coeffs_;
};

}  // namespace hsde
