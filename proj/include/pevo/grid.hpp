#ifndef PEVO_GRID_HPP
#define PEVO_GRID_HPP

// 1-D periodic spectral core.
//
// Discrete convention (used everywhere in this project):
//
//   grid:      x_m = -L/2 + m*h,  h = L/n,  m = 0..n-1,  n a power of two
//   freqs:     xi_k = (2*pi/L) * k~,  k~ = k for k < n/2, k - n otherwise
//              (FFT index order; max |xi| = pi/h at k = n/2)
//   forward:   uhat(xi_k) = h * sum_m u(x_m) e^{-i xi_k x_m}      ~ Int u e^{-i xi x} dx
//   inverse:   u(x_m) = (1/L) * sum_k uhat(xi_k) e^{+i xi_k x_m}  ~ Int uhat e^{+i xi x} dxi/(2*pi)
//
// The pair is exactly unitary up to rounding: inverse(forward(u)) == u.
// Discrete Parseval in this convention (tested in tests/test_grid.cpp):
//
//   ||u||^2 := h * sum_m |u(x_m)|^2  ==  (1/L) * sum_k |uhat(xi_k)|^2
//
// i.e. the spectral measure is dxi/(2*pi), matching the inverse above.
// Translation by an integer number of cells s is exactly the modulation
// e^{-i xi s h} on the spectrum.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

namespace pevo {

using cplx = std::complex<double>;

struct Grid {
    std::int64_t n = 0;   // number of nodes, power of two
    double length = 0.0;  // domain [-L/2, L/2)

    double spacing() const { return length / static_cast<double>(n); }
    double node(std::int64_t m) const { return -0.5 * length + spacing() * static_cast<double>(m); }
    // Frequency of FFT-ordered index k (0..n-1).
    double freq(std::int64_t k) const {
        const std::int64_t kk = (k < n / 2) ? k : k - n;
        return 2.0 * M_PI / length * static_cast<double>(kk);
    }
    double max_abs_freq() const { return M_PI / spacing(); }

    bool operator==(const Grid&) const = default;
};

// Throws ContractError unless n is a power of two >= 16 and L > 0.
Grid make_grid(std::int64_t n, double length);

struct Field {
    Grid grid;
    std::vector<cplx> v; // x-samples, natural order (x = -L/2 .. L/2-h)
};

struct Spectrum {
    Grid grid;
    std::vector<cplx> v; // FFT index order, see Grid::freq
};

Field make_field(const Grid& g);        // zero-initialised
Spectrum make_spectrum(const Grid& g);  // zero-initialised

Spectrum forward_transform(const Field& f);
Field inverse_transform(const Spectrum& s);

// sqrt(h * sum |u|^2); >= 0, zero iff every sample is zero.
double l2_norm(const Field& f);
// sqrt(sum |uhat|^2 / L) — equals l2_norm of the inverse transform (Parseval).
double l2_norm(const Spectrum& s);

// Raw unnormalised DFT of length n (FFTW wrapper with plan cache; in != out
// allowed and expected).  sign = -1: sum u e^{-2 pi i k m / n}; sign = +1 the
// conjugate sum, NOT divided by n.  Thread-safe.
void dft_raw(std::int64_t n, const cplx* in, cplx* out, int sign);

} // namespace pevo

#endif
