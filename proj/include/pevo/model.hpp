#ifndef PEVO_MODEL_HPP
#define PEVO_MODEL_HPP

// The model evolution operator
//
//   D_t + a_p D_x^p + sum_j a_{p-j}(x) D_x^{p-j},
//   a_{p-j}(x) = real_part(x) + i A <x>^{-sigma},
//
// its exact Gevrey-threshold classification, the guaranteed coefficient floor
// on a packet box, and the splitting of a lower-order symbol into an elliptic
// part plus a remainder supported away from the packet.

#include "pevo/symbol.hpp"

#include <vector>

namespace pevo {

// One lower-order coefficient, order p - j.  The imaginary part is the decay
// model A <x>^{-sigma}; an optional real profile (sampled at the grid nodes,
// empty = 0) is admitted so that purely real coefficients are expressible
// (A = 0), e.g. for unitarity checks.  Threshold classification and the
// packet decomposition require A > 0.
struct LowerCoeff {
    int j = 1;                     // 1 <= j <= p
    double sigma = 1.0;            // decay rate, in [0, 1]
    double A = 1.0;                // imaginary amplitude, >= 0
    std::vector<double> real_part; // optional real profile at the nodes
};

struct ModelOperator {
    int p = 2;                     // order, >= 2
    double a_p = 1.0;              // constant principal coefficient, nonzero
    std::vector<LowerCoeff> lower; // coefficients with pairwise distinct j
};

enum class ThresholdClass { no_effect, restricts, not_wp };

// Classification of a single coefficient.  term = (p-1)(1-sigma) - j + 1;
// boundaries are closed: sigma <= (p-1-j)/(p-1) -> not_wp (growth defeats
// every Gevrey class), sigma >= (p-j)/(p-1) -> no_effect, strictly between ->
// restricts admissible indices to theta <= theta_bound = 1/term.
struct TermThreshold {
    int j = 0;
    double term = 0.0;
    ThresholdClass cls = ThresholdClass::no_effect;
    double theta_bound = 0.0; // set only when cls == restricts
};

struct ThresholdReport {
    double xi = 0.0;          // max of term over all coefficients
    int argmax_j = 0;         // smallest j attaining the max
    ThresholdClass cls = ThresholdClass::no_effect; // combined class
    double theta_bound = 0.0; // 1/xi when combined class is restricts
    std::vector<TermThreshold> per_j; // sorted by j ascending
};

// Exact threshold arithmetic.  Requires nonempty lower with every A > 0.
// Combined class: not_wp if any term is not_wp, else restricts if any term
// restricts (bound 1/xi), else no_effect.
ThresholdReport xi_threshold(const ModelOperator& op);

// A 7^{-sigma} / 4^{p-j}: the scale-free floor factor of the imaginary
// coefficient symbol on the packet box.  The full floor at packet frequency
// nu is c_lower(...) * <nu^{p-1}>^{-sigma} * nu^{p-j}.
double c_lower(int j, int p, double A, double sigma);

// sum_j a_{p-j}(x) xi^{p-j}, one separable term per coefficient (ascending
// j).  Nonempty real_part profiles must match the grid length.
SampledSymbol lower_symbol(const ModelOperator& op, const Grid& g);

// Splitting of the imaginary model part v(x) xi^{p-j}, v = A <x>^{-sigma},
// against a packet at frequency nu:
//
//   v(x) xi^{p-j} = c_nu + I(x,xi) + J(x,xi),
//   c_nu = c_lower(j,p,A,sigma) <nu^{p-1}>^{-sigma} nu^{p-j},
//   I    = (v xi^{p-j} - c_nu) psi chi,
//   J    = (v xi^{p-j} - c_nu) (1 - psi chi).
//
// With the floor-snapped packet center, v xi^{p-j} >= c_nu at every node of
// supp(psi chi), so I >= 0 on the whole grid; J vanishes identically on the
// support of every cached w^{(alpha beta)} because psi and chi are exactly 1
// there (plateau variant required).  The reconstruction identity is verified
// on a node subsample at construction (NumericError on failure).
struct IJDecomposition {
    SampledSymbol I, J;
    double c_nu = 0.0;
    double i_lower_bound = 0.0; // certified min of I over all grid nodes
    double xi_pow_min = 0.0;    // min of xi^{p-j} over supp chi
    bool I_nonneg = false;      // i_lower_bound >= -1e-12 c_nu
    bool J_disjoint = false;    // psi == 1 and chi == 1 on every w-support node
};

IJDecomposition decompose_ij(const ModelOperator& op, const PacketCutoffs& pc, int j);

} // namespace pevo

#endif
