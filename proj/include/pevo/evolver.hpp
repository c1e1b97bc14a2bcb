#ifndef PEVO_EVOLVER_HPP
#define PEVO_EVOLVER_HPP

// Spectral time integrator for the model operator.
//
// The equation integrated is (D = -i d/dx)
//
//   d/dt u = -i [ a_p D^p + sum_j a_{p-j}(x) D^{p-j} ] u,
//
// whose principal part is diagonal on the grid spectrum.  Each step
// conjugates by the exact principal phase e^{-i a_p xi^p dt} (integrating
// factor) and applies classical RK4 to the lower-order part only, so free
// propagation is exact for any step size and the stability restriction
// involves only the lower coefficients: dt * stability_radius <= 0.1 is
// enforced, never defaulted around.
//
// Solutions can grow far beyond double range, so a state carries a split
// representation: the represented solution is e^{log_scale} * field, and the
// integrator rescales the working field back to unit size whenever its norm
// leaves [1/2, 2] (checked every renormalize_every steps).  All norm
// bookkeeping stays in log space; the unscaled solution is never formed.

#include "pevo/grid.hpp"
#include "pevo/model.hpp"

#include <vector>

namespace pevo {

struct EvolutionState {
    Field field;
    double log_scale = 0.0; // represented solution = e^{log_scale} * field
    double time = 0.0;
};

// log || e^{log_scale} field ||; finite whenever the field is, -inf for 0.
double log_l2_norm(const EvolutionState& s);

struct SolveOptions {
    double dt = 0.0;    // step size; <= 0 selects 0.1 / stability_radius
    double t_end = 0.0; // must be >= the initial state's time
    int renormalize_every = 1; // norm-check cadence in steps, >= 1
    // Times to capture intermediate states, nondecreasing, each within
    // [initial time, t_end].  Steps are shortened so these are hit exactly
    // (the recorded state's time compares equal to the requested double).
    std::vector<double> record_times;
    // > 0: evolve on the modes with |xi| <= xi_cutoff only; the rest are
    // pinned to zero and drop out of the stability radius.  0 disables.
    double xi_cutoff = 0.0;
};

struct SolveResult {
    EvolutionState final_state;
    std::vector<EvolutionState> recorded; // one entry per record time
};

// Sum over lower terms of sup_x |a_{p-j}(x)| * max_xi |xi^{p-j}|, an upper
// bound for the spectral radius of the non-principal part of the generator.
// The max over xi respects xi_cutoff when it is active.  The principal term
// never enters: it is integrated exactly.
double stability_radius(const ModelOperator& op, const Grid& g, double xi_cutoff = 0.0);

// One integrating-factor RK4 step of size opts.dt (auto-selected if <= 0,
// which needs a nonempty lower part).  Applies the spectral cutoff and the
// norm check unconditionally.  Throws ContractError when dt violates the
// stability bound, NumericError when the field stops being finite.
EvolutionState step(const EvolutionState& s, const ModelOperator& op,
                    const SolveOptions& opts);

// March from the state's time to opts.t_end, landing exactly on every record
// time (each segment is split into equal substeps no longer than dt).  When
// t_end equals the initial time and nothing is recorded or cut off, the
// initial state is returned unchanged.
SolveResult solve(const EvolutionState& init, const ModelOperator& op,
                  const SolveOptions& opts);

// Reference integrator for cross-checking `solve`: materialises the dense
// n x n generator (principal diagonal plus the lower-order action built
// column by column), then runs plain RK4 with step halving until two
// successive refinements of the final spectrum agree to 1e-9 in relative
// l2.  Shares no stepping machinery with `solve` — no integrating factor,
// no FFT inside the time loop.  Guarded to n <= 256; never renormalises.
SolveResult oracle_solve(const EvolutionState& init, const ModelOperator& op,
                         const SolveOptions& opts);

} // namespace pevo

#endif
