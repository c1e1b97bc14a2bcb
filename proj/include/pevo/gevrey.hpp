#ifndef PEVO_GEVREY_HPP
#define PEVO_GEVREY_HPP

// Gevrey-weighted norms, compactly supported Gevrey bumps, and the standard
// datum phi with spectrum e^{-2 rho0 <xi>^{1/theta}}.
//
// <x> denotes sqrt(1+x^2) throughout.
//
// Two bump variants are provided because one function cannot both carry an
// exact plateau and have a nonnegative Fourier transform:
//   - plateau:     h = 1 on |x| <= 1/2, h = 0 on |x| >= 1, Gevrey-theta_h
//                  smoothstep in between (normalised primitive of
//                  g(x) = exp(-(1-x^2)^{-1/(theta_h-1)})).
//   - pos_fourier: normalised autocorrelation of g, support [-1,1], max 1 at
//                  0, continuous Fourier transform |ghat|^2 >= 0.  No plateau.

#include "pevo/grid.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace pevo {

inline double bracket(double x) { return std::sqrt(1.0 + x * x); } // <x>

// --- scalar weight -------------------------------------------------------

// exp(rho * <xi>^{1/theta}); errors if the exponent exceeds 709.
double gevrey_weight(double xi, double rho, double theta);

// --- weighted norms ------------------------------------------------------

// log of || e^{rho <.>^{1/theta}} uhat ||, with the spectral measure
// dxi/(2 pi) of the grid convention (so rho -> 0 recovers l2_norm).
// Computed in log space; finite for any magnitudes.  Returns -inf for 0.
double gevrey_log_norm(const Spectrum& s, double rho, double theta);
double gevrey_log_norm(const Field& f, double rho, double theta);

// exp of the above; errors if the result would overflow, naming the
// dominating frequency.
double gevrey_norm(const Field& f, double rho, double theta);

// --- Gevrey bump ---------------------------------------------------------

enum class BumpVariant { plateau, pos_fourier };

class GevreyBump {
  public:
    double theta_h() const { return theta_h_; }
    BumpVariant variant() const { return variant_; }
    int max_order() const { return max_order_; }

    // h^{(alpha)}(s).  Exact 0 for |s| >= 1 (both variants); for the plateau
    // variant exact 1 (alpha = 0) / exact 0 (alpha >= 1) well inside the
    // plateau.  Interpolated from the private fine grid elsewhere; alpha = 0
    // values are clamped at 0 (both constructions are nonnegative).
    double eval(int alpha, double s) const;

    // sup over the fine grid of |h^{(alpha)}|.
    double sup_deriv(int alpha) const;

    // Continuous Fourier transform Int h(x) e^{-i zeta x} dx (real: h even).
    // For pos_fourier this is evaluated as |ghat(zeta/2)|^2 / (2 peak) and is
    // nonnegative by construction at every real zeta.
    double fhat(double zeta) const;

    // Smallest C such that sup|h^{(alpha)}| <= C^{alpha+1} (alpha!)^{1.15 theta_h}
    // over alpha <= limit (diagnostic for the derivative-growth property).
    double derivative_growth_constant(int limit) const;

  private:
    friend std::shared_ptr<const GevreyBump> make_bump(double, BumpVariant, int, std::int64_t);
    GevreyBump() = default;

    double theta_h_ = 0.0;
    BumpVariant variant_ = BumpVariant::plateau;
    int max_order_ = 0;
    // fine sampling grid: x = fine_x0 + j * fine_dx, j = 0..fine_n-1
    double fine_x0 = 0.0, fine_dx = 0.0;
    std::int64_t fine_n = 0;
    std::vector<std::vector<double>> deriv_;   // [alpha][j]
    std::vector<double> sup_;                  // sup |h^(alpha)|
    // generator g samples (for fhat of the pos_fourier variant)
    std::vector<double> gsamp_;
    double g_x0 = 0.0, g_dx = 0.0;
    double autocorr_peak = 0.0;
};

// Builds the bump and tabulates h^{(alpha)} on a private fine grid for
// alpha <= max_order.  Plateau derivatives come from Taylor-jet recurrences
// of the generator (full relative precision, any order); pos_fourier
// derivatives come from filtered FFT differentiation and are limited to
// about order 6 in doubles -- a 1e-6 noise guard rejects anything beyond.
// Errors if theta_h <= 1 (compact support impossible at the analytic limit).
std::shared_ptr<const GevreyBump> make_bump(double theta_h,
                                            BumpVariant variant = BumpVariant::plateau,
                                            int max_order = 32,
                                            std::int64_t fine_n = 1 << 16);

// --- standard datum ------------------------------------------------------

struct DatumSpec {
    double rho0 = 1.0;    // > 0
    double theta = 2.0;   // > 1
    double center = 0.0;  // must be an integer multiple of the grid spacing
    // Smooth spectral roll-off (anti-wraparound guard): multiplies phi_hat by
    // a plateau-bump step equal to 1 for |xi| <= taper_start * max|xi| and 0
    // beyond taper_end * max|xi|.  Band content below taper_start*max|xi| is
    // untouched and the weighted norm only decreases.  Set taper_start = 0 to
    // disable.
    double taper_start = 0.0;
    double taper_end = 0.95;
};

struct PreparedDatum {
    Field field;
    Spectrum spectrum;   // exactly what was inverted, for spectral-side reuse
    DatumSpec spec;
};

// phi_hat(xi) = e^{-2 rho0 <xi>^{1/theta}} (no modulation, no taper).
double phi_hat(double xi, double rho0, double theta);

// Samples e^{-i center xi} * taper(xi) * phi_hat(xi) on the grid spectrum and
// inverts.  Postconditions enforced: boundary tails of |phi| below 1e-14 of
// its max (error suggests a longer domain), imaginary residue below 1e-12 of
// the max, center on a grid cell.
PreparedDatum make_phi(const Grid& g, const DatumSpec& spec,
                       const GevreyBump* taper_bump = nullptr);

double snap_to_cell(const Grid& g, double x);

} // namespace pevo

#endif
