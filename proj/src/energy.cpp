#include "pevo/energy.hpp"
#include "pevo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace pevo {

namespace {

const double kNegInf = -std::numeric_limits<double>::infinity();

// Certified ceiling for the share of the last cached derivative band when
// the cap truncates the sum.
const double kTailLogShare = std::log(1e-8);

// Spectral roll-off window for evolved-datum sweeps (the pure spectral
// datum path needs none: nothing is inverted back and forth there).
constexpr double kTaperStart = 0.85;
constexpr double kTaperEnd = 0.95;

struct IndexRange {
    std::int64_t lo = 0, hi = 0; // half-open; empty when lo >= hi
};

IndexRange nonzero_range(const std::vector<double>& prof) {
    const std::int64_t n = static_cast<std::int64_t>(prof.size());
    std::int64_t first = n, last = -1;
    for (std::int64_t i = 0; i < n; ++i) {
        if (prof[static_cast<size_t>(i)] != 0.0) {
            if (first == n) first = i;
            last = i;
        }
    }
    if (last < first) return {};
    return {first, last + 1};
}

double log_sum_exp(const std::vector<std::vector<double>>& table) {
    double mx = kNegInf;
    for (const auto& row : table)
        for (double t : row) mx = std::max(mx, t);
    if (!std::isfinite(mx)) return kNegInf;
    double acc = 0.0;
    for (const auto& row : table)
        for (double t : row) acc += std::exp(t - mx);
    return mx + std::log(acc);
}

void require_prepared(const WavePacketRun& run, const char* who) {
    if (run.N_k < 1 || run.alpha_beta_cap != std::min(run.N_k, run.cap_config))
        throw ContractError(std::string(who) + ": run not prepared; call prepare_run first");
}

void require_cutoffs_match(const PacketCutoffs& pc, const WavePacketRun& run, const char* who) {
    if (pc.cap < run.alpha_beta_cap)
        throw ContractError(std::string(who) + ": cutoff cache order " + std::to_string(pc.cap) +
                            " is below the required alpha_beta_cap = " +
                            std::to_string(run.alpha_beta_cap));
    if (pc.p != run.p || pc.nu != run.nu)
        throw ContractError(std::string(who) + ": cutoffs built for (p, nu) = (" +
                            std::to_string(pc.p) + ", " + std::to_string(pc.nu) +
                            ") but the run expects (" + std::to_string(run.p) + ", " +
                            std::to_string(run.nu) + ")");
}

// Fold a per-(alpha, beta) table of weighted log norms into the log energy.
// When the cap truncates the derivative sum, the highest cached band must be
// provably negligible, otherwise the truncated value would be meaningless.
double assemble_log_energy(const std::vector<std::vector<double>>& table,
                           const WavePacketRun& run, double time, const char* who) {
    const double total = log_sum_exp(table);
    if (std::isnan(total))
        throw NumericError(std::string(who) + ": energy is not finite at t = " +
                           std::to_string(time));
    const int cap = run.alpha_beta_cap;
    if (cap < run.N_k && std::isfinite(total)) {
        const double tail = table[static_cast<size_t>(cap)][static_cast<size_t>(cap)];
        if (!(tail - total < kTailLogShare))
            throw NumericError(std::string(who) + ": at t = " + std::to_string(time) +
                               " the highest cached band (alpha = beta = " + std::to_string(cap) +
                               ") holds more than 1e-8 of the energy; raise cap_config above " +
                               std::to_string(run.cap_config));
    }
    return total;
}

} // namespace

int compute_Nk(double nu, double lambda, double theta1) {
    if (!(nu >= 1.0))
        throw ContractError("compute_Nk: nu = " + std::to_string(nu) + " must be >= 1");
    if (!(lambda > 0.0) || !(lambda < 1.0))
        throw ContractError("compute_Nk: lambda = " + std::to_string(lambda) +
                            " must lie in (0, 1)");
    if (!(theta1 > 1.0))
        throw ContractError("compute_Nk: theta1 = " + std::to_string(theta1) + " must exceed 1");
    const double raw = std::pow(nu, lambda / theta1);
    if (!(raw < 1e6))
        throw ContractError("compute_Nk: nu^{lambda/theta1} = " + std::to_string(raw) +
                            " exceeds the 1e6 sanity guard");
    return static_cast<int>(std::floor(raw));
}

WavePacketRun prepare_run(WavePacketRun tmpl, double nu) {
    if (!(nu >= 4.0))
        throw ContractError("prepare_run: nu = " + std::to_string(nu) + " must be >= 4");
    if (tmpl.p < 2 || tmpl.p > 8)
        throw ContractError("prepare_run: p = " + std::to_string(tmpl.p) +
                            " outside the supported range [2, 8]");
    if (!(tmpl.theta_h > 1.0))
        throw ContractError("prepare_run: theta_h = " + std::to_string(tmpl.theta_h) +
                            " must exceed 1");
    if (!(tmpl.theta1 > tmpl.theta_h))
        throw ContractError("prepare_run: theta1 = " + std::to_string(tmpl.theta1) +
                            " must exceed theta_h = " + std::to_string(tmpl.theta_h));
    if (!(tmpl.theta > 1.0))
        throw ContractError("prepare_run: theta = " + std::to_string(tmpl.theta) +
                            " must exceed 1");
    if (!(tmpl.rho0 > 0.0))
        throw ContractError("prepare_run: rho0 = " + std::to_string(tmpl.rho0) +
                            " must be positive");
    if (!(tmpl.t_star > 0.0))
        throw ContractError("prepare_run: t_star = " + std::to_string(tmpl.t_star) +
                            " must be positive");
    if (tmpl.cap_config < 1)
        throw ContractError("prepare_run: cap_config = " + std::to_string(tmpl.cap_config) +
                            " must be >= 1");
    if (!(tmpl.cutoff_factor >= 0.0))
        throw ContractError("prepare_run: cutoff_factor = " + std::to_string(tmpl.cutoff_factor) +
                            " must be >= 0");
    if (!(tmpl.dt >= 0.0))
        throw ContractError("prepare_run: dt = " + std::to_string(tmpl.dt) +
                            " must be >= 0 (0 selects the automatic stability step)");
    tmpl.nu = nu;
    tmpl.N_k = compute_Nk(nu, tmpl.lambda, tmpl.theta1); // validates lambda
    tmpl.alpha_beta_cap = std::min(tmpl.N_k, tmpl.cap_config);
    return tmpl;
}

std::pair<double, double> bicharacteristic(double x0, double xi0, double t, int p, double a_p) {
    if (p < 2)
        throw ContractError("bicharacteristic: p = " + std::to_string(p) + " must be >= 2");
    return {x0 + static_cast<double>(p) * a_p * std::pow(xi0, p - 1) * t, xi0};
}

Grid experiment_grid(double nu, int p, double rho0) {
    if (!(nu >= 4.0))
        throw ContractError("experiment_grid: nu = " + std::to_string(nu) + " must be >= 4");
    if (p < 2 || p > 8)
        throw ContractError("experiment_grid: p = " + std::to_string(p) +
                            " outside the supported range [2, 8]");
    if (!(rho0 > 0.0))
        throw ContractError("experiment_grid: rho0 = " + std::to_string(rho0) +
                            " must be positive");
    const double ell = std::pow(nu, p - 1);
    const double length = std::max({10.05 * ell, 8.0 * ell + 200.0, 40.0 / rho0});
    const double min_bandwidth = std::max(2.5 * nu, 100.0);
    std::int64_t n = 16;
    while (M_PI * static_cast<double>(n) / length < min_bandwidth) {
        n *= 2;
        if (n > (std::int64_t{1} << 26))
            throw ContractError("experiment_grid: nu = " + std::to_string(nu) +
                                " needs more than 2^26 nodes on length " +
                                std::to_string(length));
    }
    return make_grid(n, length);
}

EnergyReport compute_energy(const std::vector<EvolutionState>& trajectory,
                            const PacketCutoffs& cutoffs, const WavePacketRun& run) {
    require_prepared(run, "compute_energy");
    require_cutoffs_match(cutoffs, run, "compute_energy");
    if (trajectory.empty())
        throw ContractError("compute_energy: trajectory is empty");
    const Grid& g = cutoffs.grid;
    for (const EvolutionState& s : trajectory)
        if (!(s.field.grid == g))
            throw ContractError("compute_energy: a state lives on a different grid than the cutoffs");

    const int cap = run.alpha_beta_cap;
    const double h = g.spacing();
    std::vector<IndexRange> xr(static_cast<size_t>(cap) + 1), kr(static_cast<size_t>(cap) + 1);
    std::vector<double> lw(static_cast<size_t>(cap) + 1);
    for (int a = 0; a <= cap; ++a) {
        xr[static_cast<size_t>(a)] = nonzero_range(cutoffs.xprof[static_cast<size_t>(a)]);
        kr[static_cast<size_t>(a)] = nonzero_range(cutoffs.xiprof[static_cast<size_t>(a)]);
        lw[static_cast<size_t>(a)] = -run.theta1 * std::lgamma(a + 1.0);
    }

    EnergyReport rep;
    Spectrum band = make_spectrum(g);
    std::vector<std::vector<double>> table(static_cast<size_t>(cap) + 1,
                                           std::vector<double>(static_cast<size_t>(cap) + 1));
    double best_gap = std::numeric_limits<double>::infinity();
    for (const EvolutionState& st : trajectory) {
        const Spectrum uhat = forward_transform(st.field);
        for (auto& row : table) std::fill(row.begin(), row.end(), kNegInf);
        for (int b = 0; b <= cap; ++b) {
            const IndexRange& rb = kr[static_cast<size_t>(b)];
            if (rb.lo >= rb.hi) continue;
            const std::vector<double>& xip = cutoffs.xiprof[static_cast<size_t>(b)];
            for (std::int64_t k = rb.lo; k < rb.hi; ++k)
                band.v[static_cast<size_t>(k)] =
                    xip[static_cast<size_t>(k)] * uhat.v[static_cast<size_t>(k)];
            const Field vb = inverse_transform(band);
            for (std::int64_t k = rb.lo; k < rb.hi; ++k) band.v[static_cast<size_t>(k)] = 0.0;
            for (int a = 0; a <= cap; ++a) {
                const std::vector<double>& xp = cutoffs.xprof[static_cast<size_t>(a)];
                const IndexRange& ra = xr[static_cast<size_t>(a)];
                double sq = 0.0;
                for (std::int64_t m = ra.lo; m < ra.hi; ++m) {
                    const double w = xp[static_cast<size_t>(m)];
                    if (w != 0.0) sq += w * w * std::norm(vb.v[static_cast<size_t>(m)]);
                }
                if (sq > 0.0)
                    table[static_cast<size_t>(a)][static_cast<size_t>(b)] =
                        st.log_scale + 0.5 * std::log(h * sq) + lw[static_cast<size_t>(a)] +
                        lw[static_cast<size_t>(b)];
            }
        }
        rep.times.push_back(st.time);
        rep.log_E.push_back(assemble_log_energy(table, run, st.time, "compute_energy"));
        const double gap = std::abs(st.time - run.t_star);
        if (gap < best_gap) {
            best_gap = gap;
            rep.term_table = table;
        }
    }
    rep.E0_log = rep.log_E.front();
    return rep;
}

EnergyReport datum_energy(const PacketCutoffs& cutoffs, const DatumSpec& spec,
                          const WavePacketRun& run) {
    require_prepared(run, "datum_energy");
    require_cutoffs_match(cutoffs, run, "datum_energy");
    if (!(spec.rho0 > 0.0))
        throw ContractError("datum_energy: rho0 = " + std::to_string(spec.rho0) +
                            " must be positive");
    if (!(spec.theta > 1.0))
        throw ContractError("datum_energy: theta = " + std::to_string(spec.theta) +
                            " must exceed 1");
    if (spec.center != cutoffs.center)
        throw ContractError("datum_energy: datum center " + std::to_string(spec.center) +
                            " is not the packet center " + std::to_string(cutoffs.center));

    const Grid& g = cutoffs.grid;
    const int cap = run.alpha_beta_cap;
    const double h = g.spacing();
    const auto log_phi = [&](double xi) {
        return -2.0 * spec.rho0 * std::pow(bracket(xi), 1.0 / spec.theta);
    };

    std::vector<double> lw(static_cast<size_t>(cap) + 1);
    for (int a = 0; a <= cap; ++a)
        lw[static_cast<size_t>(a)] = -run.theta1 * std::lgamma(a + 1.0);

    std::vector<std::vector<double>> table(static_cast<size_t>(cap) + 1,
                                           std::vector<double>(static_cast<size_t>(cap) + 1, kNegInf));
    Spectrum band = make_spectrum(g);
    for (int b = 0; b <= cap; ++b) {
        const std::vector<double>& xip = cutoffs.xiprof[static_cast<size_t>(b)];
        const IndexRange rb = nonzero_range(xip);
        if (rb.lo >= rb.hi) continue;
        // factor the largest in-band datum log out of the transform, so the
        // inverse works at O(1) scale however small the energy is
        double off = kNegInf;
        for (std::int64_t k = rb.lo; k < rb.hi; ++k)
            if (xip[static_cast<size_t>(k)] != 0.0) off = std::max(off, log_phi(g.freq(k)));
        for (std::int64_t k = rb.lo; k < rb.hi; ++k) {
            const double w = xip[static_cast<size_t>(k)];
            if (w == 0.0) continue;
            const double xi = g.freq(k);
            band.v[static_cast<size_t>(k)] =
                std::polar(w * std::exp(log_phi(xi) - off), -spec.center * xi);
        }
        const Field vb = inverse_transform(band);
        for (std::int64_t k = rb.lo; k < rb.hi; ++k) band.v[static_cast<size_t>(k)] = 0.0;
        for (int a = 0; a <= cap; ++a) {
            const std::vector<double>& xp = cutoffs.xprof[static_cast<size_t>(a)];
            const IndexRange ra = nonzero_range(xp);
            double sq = 0.0;
            for (std::int64_t m = ra.lo; m < ra.hi; ++m) {
                const double w = xp[static_cast<size_t>(m)];
                if (w != 0.0) sq += w * w * std::norm(vb.v[static_cast<size_t>(m)]);
            }
            if (sq > 0.0)
                table[static_cast<size_t>(a)][static_cast<size_t>(b)] =
                    off + 0.5 * std::log(h * sq) + lw[static_cast<size_t>(a)] +
                    lw[static_cast<size_t>(b)];
        }
    }

    EnergyReport rep;
    rep.times = {0.0};
    rep.log_E = {assemble_log_energy(table, run, 0.0, "datum_energy")};
    rep.term_table = std::move(table);
    rep.E0_log = rep.log_E.front();
    return rep;
}

PowerLawFit fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw ContractError("fit_power_law: sample counts differ (" + std::to_string(xs.size()) +
                            " xs vs " + std::to_string(ys.size()) + " ys)");
    if (xs.size() < 2)
        throw ContractError("fit_power_law: at least 2 samples required, got " +
                            std::to_string(xs.size()));
    const size_t m = xs.size();
    std::vector<double> lx(m), ly(m);
    for (size_t i = 0; i < m; ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw ContractError("fit_power_law: samples must be positive (xs[" +
                                std::to_string(i) + "] = " + std::to_string(xs[i]) + ", ys[" +
                                std::to_string(i) + "] = " + std::to_string(ys[i]) + ")");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(m);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < m; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0))
        throw ContractError("fit_power_law: xs are all equal; the slope is undetermined");
    PowerLawFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    for (size_t i = 0; i < m; ++i)
        f.max_residual = std::max(f.max_residual,
                                  std::abs(ly[i] - (f.intercept + f.slope * lx[i])));
    return f;
}

namespace {

void require_sweep(const ModelOperator& op, const std::vector<double>& nus,
                   const WavePacketRun& tmpl, int record_count, const char* who) {
    if (op.p != tmpl.p)
        throw ContractError(std::string(who) + ": operator order p = " + std::to_string(op.p) +
                            " does not match the template p = " + std::to_string(tmpl.p));
    if (nus.size() < 3)
        throw ContractError(std::string(who) + ": at least 3 frequencies required, got " +
                            std::to_string(nus.size()));
    if (record_count < 2)
        throw ContractError(std::string(who) + ": record_count = " +
                            std::to_string(record_count) +
                            " must be at least 2 (both endpoints are always measured)");
}

// Largest cap any frequency of the sweep will use (also validates the
// template against every nu before any expensive work starts).
int max_sweep_cap(const std::vector<double>& nus, const WavePacketRun& tmpl) {
    int cap = 1;
    for (double nu : nus) cap = std::max(cap, prepare_run(tmpl, nu).alpha_beta_cap);
    return cap;
}

// One frequency of an evolved sweep: size the grid, build the cutoffs and
// the datum at the packet center, march to t_star, measure both endpoints.
NuRun sweep_packet(const ModelOperator& op, double nu, const WavePacketRun& tmpl,
                   const std::shared_ptr<const GevreyBump>& bump, int record_count) {
    const WavePacketRun run = prepare_run(tmpl, nu);
    const Grid g = experiment_grid(nu, run.p, run.rho0);
    const PacketCutoffs pc = make_packet_cutoffs(g, bump, run.p, nu, run.alpha_beta_cap);

    DatumSpec spec;
    spec.rho0 = run.rho0;
    spec.theta = run.theta;
    spec.center = pc.center;
    spec.taper_start = kTaperStart;
    spec.taper_end = kTaperEnd;
    const PreparedDatum datum = make_phi(g, spec, bump.get());

    SolveOptions opts;
    opts.dt = run.dt;
    opts.t_end = run.t_star;
    opts.record_times.reserve(static_cast<size_t>(record_count));
    for (int i = 0; i < record_count; ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(record_count - 1);
        opts.record_times.push_back(f * run.t_star); // i = 0 and i = m-1 land exactly
    }
    opts.xi_cutoff = run.cutoff_factor > 0.0 ? run.cutoff_factor * nu : 0.0;
    const SolveResult sol = solve(EvolutionState{datum.field, 0.0, 0.0}, op, opts);

    NuRun out;
    out.nu = nu;
    out.n = g.n;
    out.length = g.length;
    out.report = compute_energy(sol.recorded, pc, run);
    out.log_E0 = out.report.log_E.front();
    out.log_Et = out.report.log_E.back();
    out.lambda_rate = (out.log_Et - out.log_E0) / run.t_star;
    return out;
}

std::vector<const NuRun*> by_frequency(const std::vector<NuRun>& runs) {
    std::vector<const NuRun*> order;
    order.reserve(runs.size());
    for (const NuRun& r : runs) order.push_back(&r);
    std::sort(order.begin(), order.end(),
              [](const NuRun* a, const NuRun* b) { return a->nu < b->nu; });
    return order;
}

// Lower bound for the weight-1 (0,0) term of the positive pair.  For the
// pos_fourier bump every factor of the spectral-side convolution
//
//   vhat(eta) = (ell/2pi) Int hhat(ell (eta - xi)) h((xi-nu)/(nu/4)) phihat(xi) dxi
//
// is nonnegative, so restricting to |xi - eta| <= 1/(2 ell) for eta within
// 1/(2 ell) of nu keeps a computable product: the xi window maps into
// |s| <= 1/4 of the bump argument whenever nu^p >= 16, phihat is smallest at
// nu + 1/ell, and the hhat window integrates to I_half.  Hence
//
//   ||w00 phi_c|| >= sqrt(1/(2 pi ell)) * (1/2pi) m1 phihat(nu + 1/ell) I_half.
double positive_pair_lower_bound(const GevreyBump& bump, const WavePacketRun& run,
                                 const DatumSpec& spec) {
    if (bump.variant() != BumpVariant::pos_fourier)
        throw ContractError("datum lower bound: needs the pos_fourier bump variant");
    const double ell = std::pow(run.nu, run.p - 1);
    if (!(ell * run.nu >= 16.0))
        throw ContractError("datum lower bound: nu^p = " + std::to_string(ell * run.nu) +
                            " must be >= 16 for the frequency window to fit");

    double m1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 64; ++i)
        m1 = std::min(m1, bump.eval(0, 0.25 * static_cast<double>(i) / 64.0));
    const int qn = 64; // Simpson over [-1/2, 1/2]; hhat is smooth and even
    double ih = 0.0;
    for (int i = 0; i <= qn; ++i) {
        const double w = (i == 0 || i == qn) ? 1.0 : ((i % 2 == 1) ? 4.0 : 2.0);
        ih += w * bump.fhat(-0.5 + static_cast<double>(i) / qn);
    }
    ih *= 1.0 / (3.0 * qn);
    if (!(m1 > 0.0) || !(ih > 0.0))
        throw NumericError("datum lower bound: degenerate window constants (m1 = " +
                           std::to_string(m1) + ", I_half = " + std::to_string(ih) + ")");

    const double log_phimin =
        -2.0 * spec.rho0 * std::pow(bracket(run.nu + 1.0 / ell), 1.0 / spec.theta);
    return 0.5 * (std::log(1.0 / ell) - std::log(2.0 * M_PI)) + std::log(m1) + std::log(ih) -
           std::log(2.0 * M_PI) + log_phimin;
}

} // namespace

NuRun packet_run(const ModelOperator& op, double nu, const WavePacketRun& tmpl,
                 int record_count) {
    require_sweep(op, {nu, nu, nu}, tmpl, record_count, "packet_run");
    const auto bump =
        make_bump(tmpl.theta_h, BumpVariant::plateau, prepare_run(tmpl, nu).alpha_beta_cap);
    return sweep_packet(op, nu, tmpl, bump, record_count);
}

GrowthResult growth_experiment(const ModelOperator& op, const std::vector<double>& nus,
                               const WavePacketRun& tmpl, int record_count,
                               const SweepObserver& on_run) {
    require_sweep(op, nus, tmpl, record_count, "growth_experiment");
    GrowthResult res;
    res.threshold = xi_threshold(op); // validates the lower part as a side effect
    const auto bump = make_bump(tmpl.theta_h, BumpVariant::plateau, max_sweep_cap(nus, tmpl));
    for (double nu : nus) {
        res.runs.push_back(sweep_packet(op, nu, tmpl, bump, record_count));
        if (on_run) on_run(res.runs.back());
    }

    std::vector<double> xs, ys;
    for (const NuRun& r : res.runs) {
        if (!(r.lambda_rate > 0.0))
            throw NumericError("growth_experiment: measured rate at nu = " + std::to_string(r.nu) +
                               " is " + std::to_string(r.lambda_rate) +
                               "; the power-law fit needs positive rates");
        xs.push_back(r.nu);
        ys.push_back(r.lambda_rate);
    }
    res.fit = fit_power_law(xs, ys);

    res.lambda_nondecreasing = true;
    const auto order = by_frequency(res.runs);
    for (size_t i = 1; i < order.size(); ++i)
        if (order[i]->lambda_rate < order[i - 1]->lambda_rate) res.lambda_nondecreasing = false;
    return res;
}

BoundednessResult boundedness_experiment(const ModelOperator& op, const std::vector<double>& nus,
                                         const WavePacketRun& tmpl, double ratio_limit,
                                         int record_count, const SweepObserver& on_run) {
    require_sweep(op, nus, tmpl, record_count, "boundedness_experiment");
    if (!(ratio_limit >= 1.0))
        throw ContractError("boundedness_experiment: ratio_limit = " +
                            std::to_string(ratio_limit) + " must be >= 1");
    const ThresholdReport thr = xi_threshold(op);
    if (!(thr.xi < 1.0 / tmpl.theta))
        throw ContractError("boundedness_experiment: needs Xi < 1/theta strictly, got Xi = " +
                            std::to_string(thr.xi) + " and 1/theta = " +
                            std::to_string(1.0 / tmpl.theta));

    BoundednessResult res;
    res.ratio_limit = ratio_limit;
    const auto bump = make_bump(tmpl.theta_h, BumpVariant::plateau, max_sweep_cap(nus, tmpl));
    for (double nu : nus) {
        res.runs.push_back(sweep_packet(op, nu, tmpl, bump, record_count));
        if (on_run) on_run(res.runs.back());
    }

    const auto order = by_frequency(res.runs);
    std::vector<double> q;
    for (const NuRun* r : order) q.push_back(r->lambda_rate / std::pow(r->nu, 1.0 / tmpl.theta));
    res.q_max = *std::max_element(q.begin(), q.end());
    res.q_min = *std::min_element(q.begin(), q.end());
    const size_t m = q.size();
    res.top_increasing = m >= 3 && q[m - 3] < q[m - 2] && q[m - 2] < q[m - 1];
    res.pass = !res.top_increasing &&
               (res.q_max <= 0.0 || (res.q_min > 0.0 && res.q_max / res.q_min <= ratio_limit));
    return res;
}

DatumDecayResult datum_decay_experiment(const std::vector<double>& nus,
                                        const WavePacketRun& tmpl, const DatumObserver& on_run) {
    if (nus.size() < 3)
        throw ContractError("datum_decay_experiment: at least 3 frequencies required, got " +
                            std::to_string(nus.size()));
    const int cap = max_sweep_cap(nus, tmpl);
    const auto plateau = make_bump(tmpl.theta_h, BumpVariant::plateau, cap);
    const auto positive = make_bump(tmpl.theta_h, BumpVariant::pos_fourier, cap);

    DatumDecayResult res;
    res.bound_ok = true;
    std::vector<double> xs, ys;
    for (double nu : nus) {
        const WavePacketRun run = prepare_run(tmpl, nu);
        const Grid g = experiment_grid(nu, run.p, run.rho0);

        DatumSpec spec;
        spec.rho0 = run.rho0;
        spec.theta = run.theta;
        spec.taper_start = 0.0; // pure spectral path: nothing evolves, no taper

        DatumDecayRun r;
        r.nu = nu;
        {
            const PacketCutoffs pc = make_packet_cutoffs(g, plateau, run.p, nu, run.alpha_beta_cap);
            spec.center = pc.center;
            r.E0_log = datum_energy(pc, spec, run).E0_log;
        }
        {
            const PacketCutoffs pc = make_packet_cutoffs(g, positive, run.p, nu, run.alpha_beta_cap);
            spec.center = pc.center;
            r.E0_pos_log = datum_energy(pc, spec, run).E0_log;
            r.B_log = positive_pair_lower_bound(*positive, run, spec);
        }
        if (!(r.E0_log < 0.0))
            throw NumericError("datum_decay_experiment: E0 at nu = " + std::to_string(nu) +
                               " is not below 1 (log E0 = " + std::to_string(r.E0_log) +
                               "); -log E0 must be positive for the decay fit");
        if (!(r.B_log <= r.E0_pos_log)) res.bound_ok = false;
        xs.push_back(nu);
        ys.push_back(-r.E0_log);
        res.runs.push_back(r);
        if (on_run) on_run(res.runs.back());
    }
    res.fit = fit_power_law(xs, ys);
    return res;
}

std::function<double(double)> gronwall_envelope(const WavePacketRun& run, double xi,
                                                double log_E0, const GronwallConstants& k) {
    require_prepared(run, "gronwall_envelope");
    if (!(k.C >= 0.0))
        throw ContractError("gronwall_envelope: C = " + std::to_string(k.C) + " must be >= 0");
    double correction = 0.0;
    for (int l = 1; l <= run.N_k; ++l)
        correction += std::pow(run.nu, l * run.lambda - run.p * (l - 1.0));
    const double A = k.c1 * std::pow(run.nu, xi) - k.C * correction;
    const bool has_tail = k.C > 0.0;
    const double logR = has_tail ? (run.N_k + 1.0) * std::log(k.C) +
                                       (k.C - k.c * static_cast<double>(run.N_k)) * std::log(run.nu)
                                 : kNegInf;
    return [A, has_tail, logR, log_E0](double t) {
        if (!(t >= 0.0))
            throw ContractError("gronwall envelope: t = " + std::to_string(t) +
                                " must be >= 0");
        if (t == 0.0) return log_E0;
        if (!has_tail) return log_E0 + A * t;
        const double x = std::exp(std::log(t) + logR - log_E0);
        if (x >= 1.0) return kNegInf;
        return A * t + log_E0 + std::log1p(-x);
    };
}

} // namespace pevo
