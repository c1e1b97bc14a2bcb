#ifndef PEVO_SYMBOL_HPP
#define PEVO_SYMBOL_HPP

// Separable pseudodifferential symbols sampled on a grid, their application
// u -> sum_t a_t(x) (b_t(D) u), a dense-matrix reference build for small n,
// decay-weighted seminorms, and the scaled wave-packet cutoff family used by
// the energy experiments.

#include "pevo/gevrey.hpp"
#include "pevo/grid.hpp"

#include <memory>
#include <vector>

namespace pevo {

// One separable term a(x) b(D).
struct SymbolTerm {
    std::vector<cplx> xprof;  // a at the grid nodes, natural order
    std::vector<cplx> xiprof; // b at the grid frequencies, FFT index order
};

struct SampledSymbol {
    Grid grid;
    std::vector<SymbolTerm> terms;
};

// s(x,D) u via one forward transform and one inverse per term.
Field apply(const SampledSymbol& s, const Field& u);

// Row-major n*n matrix of s(x,D) in the node basis (n <= 1024: this is a
// reference object for tests and the dense oracle solver, not a fast path).
std::vector<cplx> dense_matrix(const SampledSymbol& s);

// max over the grid of <x>^{weight_pow} |f^(ell)(x)|, with f^(ell) from an
// order-8 central finite-difference stencil (Fornberg weights, periodic
// wrap).  ell <= 4.  weight_pow = 0 gives the plain derivative sup; a
// coefficient of decay class sigma is checked with weight_pow = sigma + ell.
double decay_seminorm(const std::vector<cplx>& prof, const Grid& g, int ell, double weight_pow);

// Wave-packet cutoff family at frequency nu:
//
//   w^{ab}(x,xi) = h^(a)((x - c)/nu^{p-1}) * h^(b)((xi - nu)/(nu/4)),
//   c = 4 nu^{p-1} snapped to a grid cell,
//
// so w^{00} is supported in [3,5] nu^{p-1} x [3/4,5/4] nu.  The wider pair
//
//   psi(x) = h((x - c)/(3 nu^{p-1})),  chi(xi) = h((xi - nu)/(3 nu/4))
//
// (plateau variant) equals 1 on the support box of every w^{ab} and vanishes
// outside [1,7] nu^{p-1} x [1/4,7/4] nu.  Construction requires the w-box to
// fit inside the grid; the psi/chi box is allowed to stick out (users that
// need it covered check for themselves).
struct PacketCutoffs {
    Grid grid;
    int p = 2;
    double nu = 0.0;
    int cap = 0;         // largest tabulated derivative order
    double center = 0.0; // snapped 4 nu^{p-1}
    std::shared_ptr<const GevreyBump> bump;
    std::vector<std::vector<double>> xprof;  // [alpha][node]
    std::vector<std::vector<double>> xiprof; // [beta][freq, FFT order]
    std::vector<double> psi, chi;

    SampledSymbol symbol(int alpha, int beta) const; // w^{alpha beta}(x,D)
    SampledSymbol psi_chi() const;                   // psi(x) chi(D)
};

PacketCutoffs make_packet_cutoffs(const Grid& g, std::shared_ptr<const GevreyBump> bump,
                                  int p, double nu, int cap);

} // namespace pevo

#endif
