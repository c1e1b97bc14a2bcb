#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pevo/energy.hpp"
#include "pevo/errors.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <vector>

using namespace pevo;

namespace {

constexpr double pi = 3.14159265358979323846;

ModelOperator decay_op(int p, double sigma, double A = 1.0) {
    return ModelOperator{p, 1.0, {LowerCoeff{1, sigma, A, {}}}};
}

WavePacketRun base_template() {
    WavePacketRun r;
    r.p = 2;
    r.lambda = 0.5;
    r.theta1 = 1.2;
    r.theta_h = 1.1;
    r.theta = 2.0;
    r.rho0 = 1.0;
    r.t_star = 0.05;
    r.cap_config = 12;
    return r;
}

// Longhand transforms matching the grid convention (uhat_k = h (-1)^k DFT-,
// u_m = (1/L) sum_k (-1)^k uhat_k e^{+2 pi i k m / n}), O(n^2) on purpose.
std::vector<cplx> dft_forward_slow(const Grid& g, const std::vector<cplx>& u) {
    std::vector<cplx> uhat(static_cast<std::size_t>(g.n));
    for (std::int64_t k = 0; k < g.n; ++k) {
        cplx acc = 0.0;
        for (std::int64_t m = 0; m < g.n; ++m) {
            double ph = -2.0 * pi * static_cast<double>(k) * static_cast<double>(m) /
                        static_cast<double>(g.n);
            acc += u[static_cast<std::size_t>(m)] * std::polar(1.0, ph);
        }
        double sgn = (k % 2 != 0) ? -1.0 : 1.0;
        uhat[static_cast<std::size_t>(k)] = g.spacing() * sgn * acc;
    }
    return uhat;
}

std::vector<cplx> dft_inverse_slow(const Grid& g, const std::vector<cplx>& uhat) {
    std::vector<cplx> u(static_cast<std::size_t>(g.n));
    for (std::int64_t m = 0; m < g.n; ++m) {
        cplx acc = 0.0;
        for (std::int64_t k = 0; k < g.n; ++k) {
            double ph = 2.0 * pi * static_cast<double>(k) * static_cast<double>(m) /
                        static_cast<double>(g.n);
            double sgn = (k % 2 != 0) ? -1.0 : 1.0;
            acc += sgn * uhat[static_cast<std::size_t>(k)] * std::polar(1.0, ph);
        }
        u[static_cast<std::size_t>(m)] = acc / g.length;
    }
    return u;
}

// Direct evaluation of the energy sum: for every (alpha, beta) build
// w^{(ab)}(x,D) u by slow transforms and accumulate the weighted norms.
double energy_slow(const EvolutionState& s, const PacketCutoffs& pc, const WavePacketRun& run) {
    const Grid& g = s.field.grid;
    std::vector<cplx> uhat = dft_forward_slow(g, s.field.v);
    double total = 0.0;
    for (int a = 0; a <= run.alpha_beta_cap; ++a) {
        for (int b = 0; b <= run.alpha_beta_cap; ++b) {
            std::vector<cplx> q(static_cast<std::size_t>(g.n));
            for (std::int64_t k = 0; k < g.n; ++k)
                q[static_cast<std::size_t>(k)] =
                    pc.xiprof[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)] *
                    uhat[static_cast<std::size_t>(k)];
            std::vector<cplx> w = dft_inverse_slow(g, q);
            double sq = 0.0;
            for (std::int64_t m = 0; m < g.n; ++m) {
                cplx v = pc.xprof[static_cast<std::size_t>(a)][static_cast<std::size_t>(m)] *
                         w[static_cast<std::size_t>(m)];
                sq += std::norm(v);
            }
            double weight = std::pow(std::tgamma(a + 1.0) * std::tgamma(b + 1.0), -run.theta1);
            total += weight * std::exp(s.log_scale) * std::sqrt(g.spacing() * sq);
        }
    }
    return total;
}

Field random_field(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Field f = make_field(g);
    for (auto& z : f.v) z = cplx(uni(rng), uni(rng));
    return f;
}

// Modulated bump envelope h((x - x0)/s) e^{i nu x}: a clean packet whose
// spectrum sits at nu with width a few / s.
Field bump_packet(const Grid& g, const GevreyBump& bump, double x0, double s, double nu) {
    Field f = make_field(g);
    for (std::int64_t m = 0; m < g.n; ++m) {
        double x = g.node(m);
        double env = bump.eval(0, (x - x0) / s);
        f.v[static_cast<std::size_t>(m)] = env * std::polar(1.0, nu * x);
    }
    return f;
}

double centroid(const Field& f) {
    double mass = 0.0, first = 0.0;
    for (std::int64_t m = 0; m < f.grid.n; ++m) {
        double w = std::norm(f.v[static_cast<std::size_t>(m)]);
        mass += w;
        first += f.grid.node(m) * w;
    }
    REQUIRE(mass > 0.0);
    return first / mass;
}

double lse_pair_order(const std::vector<std::vector<double>>& table, bool reverse) {
    std::vector<double> flat;
    for (const auto& row : table)
        for (double t : row) flat.push_back(t);
    if (reverse) std::reverse(flat.begin(), flat.end());
    double mx = -std::numeric_limits<double>::infinity();
    for (double t : flat) mx = std::max(mx, t);
    if (!std::isfinite(mx)) return mx;
    double acc = 0.0;
    for (double t : flat) acc += std::exp(t - mx);
    return mx + std::log(acc);
}

} // namespace

TEST_CASE("derivative count N_k: frozen values and dyadic monotonicity") {
    CHECK(compute_Nk(1024.0, 0.5, 1.1) == 23);
    CHECK(compute_Nk(1.0, 0.5, 1.1) == 1);
    CHECK(compute_Nk(4.0, 0.95, 1.1) == 3);
    int prev = 0;
    for (double nu = 4.0; nu <= 4096.0; nu *= 2.0) {
        int nk = compute_Nk(nu, 0.5, 1.1);
        CHECK(nk >= prev);
        prev = nk;
    }
    CHECK_THROWS_AS((void)compute_Nk(0.5, 0.5, 1.1), ContractError);
    CHECK_THROWS_AS((void)compute_Nk(16.0, 0.0, 1.1), ContractError);
    CHECK_THROWS_AS((void)compute_Nk(16.0, 1.0, 1.1), ContractError);
    CHECK_THROWS_AS((void)compute_Nk(16.0, 0.5, 1.0), ContractError);
}

TEST_CASE("bicharacteristic flow: straight lines at the group speed") {
    for (int p : {2, 3, 4}) {
        auto [x, xi] = bicharacteristic(0.0, 32.0, 4.0 / p, p, 1.0);
        CHECK(x == doctest::Approx(4.0 * std::pow(32.0, p - 1)).epsilon(1e-14));
        CHECK(xi == 32.0);
    }
    auto [x0, xi0] = bicharacteristic(1.5, -7.0, 0.0, 3, 2.0);
    CHECK(x0 == 1.5);
    CHECK(xi0 == -7.0);
    // a zero frequency never moves; a_p scales the speed linearly
    CHECK(bicharacteristic(2.0, 0.0, 9.0, 4, 1.0).first == 2.0);
    CHECK(bicharacteristic(0.0, 2.0, 1.0, 2, 3.0).first ==
          doctest::Approx(3.0 * bicharacteristic(0.0, 2.0, 1.0, 2, 1.0).first).epsilon(1e-14));
}

TEST_CASE("experiment grid: sizing rule is enforced, not suggested") {
    for (int p : {2, 3}) {
        for (double nu : {16.0, 64.0}) {
            for (double rho0 : {1.0, 0.05}) {
                Grid g = experiment_grid(nu, p, rho0);
                CHECK((g.n & (g.n - 1)) == 0); // power of two
                CHECK(g.length > 10.0 * std::pow(nu, p - 1));
                CHECK(g.length >= 40.0 / rho0);
                CHECK(g.max_abs_freq() >= 2.5 * nu);
                // the packet box must actually fit on this grid
                auto bump = make_bump(1.1, BumpVariant::plateau, 2);
                CHECK_NOTHROW((void)make_packet_cutoffs(g, bump, p, nu, 2));
            }
        }
    }
    CHECK_THROWS_AS((void)experiment_grid(16.0, 1, 1.0), ContractError);
    CHECK_THROWS_AS((void)experiment_grid(16.0, 2, 0.0), ContractError);
    CHECK_THROWS_AS((void)experiment_grid(2.0, 2, 1.0), ContractError);
}

TEST_CASE("run preparation derives the cap and rejects bad parameters") {
    WavePacketRun tmpl = base_template();
    WavePacketRun r = prepare_run(tmpl, 512.0);
    CHECK(r.nu == 512.0);
    CHECK(r.N_k == compute_Nk(512.0, tmpl.lambda, tmpl.theta1));
    CHECK(r.alpha_beta_cap == std::min(r.N_k, tmpl.cap_config));

    // a tight configured cap truncates, a loose one does not
    tmpl.cap_config = 2;
    CHECK(prepare_run(tmpl, 512.0).alpha_beta_cap == 2);

    WavePacketRun bad = base_template();
    bad.lambda = 1.0;
    CHECK_THROWS_AS((void)prepare_run(bad, 16.0), ContractError);
    bad = base_template();
    bad.theta1 = bad.theta_h; // needs theta1 > theta_h
    CHECK_THROWS_AS((void)prepare_run(bad, 16.0), ContractError);
    bad = base_template();
    bad.theta_h = 1.0; // needs theta_h > 1
    CHECK_THROWS_AS((void)prepare_run(bad, 16.0), ContractError);
    bad = base_template();
    bad.theta = 1.0;
    CHECK_THROWS_AS((void)prepare_run(bad, 16.0), ContractError);
    bad = base_template();
    bad.rho0 = 0.0;
    CHECK_THROWS_AS((void)prepare_run(bad, 16.0), ContractError);
    bad = base_template();
    bad.t_star = 0.0;
    CHECK_THROWS_AS((void)prepare_run(bad, 16.0), ContractError);
    bad = base_template();
    bad.cap_config = 0;
    CHECK_THROWS_AS((void)prepare_run(bad, 16.0), ContractError);
    bad = base_template();
    bad.cutoff_factor = -1.0;
    CHECK_THROWS_AS((void)prepare_run(bad, 16.0), ContractError);
    CHECK_THROWS_AS((void)prepare_run(base_template(), 2.0), ContractError);
}

TEST_CASE("energy matches a longhand double-loop evaluation on a tiny grid") {
    Grid g = make_grid(128, 48.0);
    WavePacketRun tmpl = base_template();
    tmpl.lambda = 0.95;
    tmpl.theta1 = 1.1;
    tmpl.theta_h = 1.05;
    WavePacketRun run = prepare_run(tmpl, 4.0);
    REQUIRE(run.N_k == 3);
    REQUIRE(run.alpha_beta_cap == 3);

    auto bump = make_bump(run.theta_h, BumpVariant::plateau, run.alpha_beta_cap);
    PacketCutoffs pc = make_packet_cutoffs(g, bump, run.p, run.nu, run.alpha_beta_cap);

    EvolutionState s{random_field(g, 0x9e3779b9u), 0.3, 0.0};
    EnergyReport rep = compute_energy({s}, pc, run);
    REQUIRE(rep.times.size() == 1);
    REQUIRE(rep.log_E.size() == 1);

    double ref = energy_slow(s, pc, run);
    CHECK(std::abs(rep.log_E[0] - std::log(ref)) <= 1e-10);
    CHECK(rep.E0_log == rep.log_E[0]);

    // the (0,0) term alone is a lower bound for the whole sum
    REQUIRE(rep.term_table.size() == static_cast<std::size_t>(run.alpha_beta_cap) + 1);
    CHECK(rep.log_E[0] >= rep.term_table[0][0]);

    // assembly order cannot matter at 1e-12
    double fwd = lse_pair_order(rep.term_table, false);
    double rev = lse_pair_order(rep.term_table, true);
    CHECK(std::abs(fwd - rev) <= 1e-12);
    CHECK(std::abs(fwd - rep.log_E[0]) <= 1e-12);
}

TEST_CASE("a vanishing state reports the -inf sentinel") {
    Grid g = make_grid(128, 48.0);
    WavePacketRun tmpl = base_template();
    tmpl.lambda = 0.95;
    tmpl.theta1 = 1.1;
    tmpl.theta_h = 1.05;
    WavePacketRun run = prepare_run(tmpl, 4.0);
    auto bump = make_bump(run.theta_h, BumpVariant::plateau, run.alpha_beta_cap);
    PacketCutoffs pc = make_packet_cutoffs(g, bump, run.p, run.nu, run.alpha_beta_cap);

    EvolutionState zero{make_field(g), 0.0, 0.0};
    EnergyReport rep = compute_energy({zero}, pc, run);
    CHECK(std::isinf(rep.log_E[0]));
    CHECK(rep.log_E[0] < 0.0);
    CHECK(std::isinf(rep.E0_log));
}

TEST_CASE("truncation certificate: a plateau-confined packet passes a tight cap") {
    // nu large enough that the packet's spectral width fits well inside the
    // xi-plateau: every truncated term then lives on bump tails only.  (The
    // bump's Fourier decay is slow -- ~1e-12 only beyond zeta ~ 600 -- so the
    // envelope scale times the plateau half-width nu/8 must clear that.)
    WavePacketRun tmpl = base_template();
    tmpl.lambda = 0.9;
    tmpl.theta1 = 1.1;
    tmpl.theta_h = 1.05;
    tmpl.cap_config = 2;
    WavePacketRun run = prepare_run(tmpl, 128.0);
    REQUIRE(run.N_k > run.alpha_beta_cap); // the sum really is truncated

    Grid g = experiment_grid(run.nu, run.p, 1.0);
    auto bump = make_bump(run.theta_h, BumpVariant::plateau, 4);
    PacketCutoffs pc = make_packet_cutoffs(g, bump, run.p, run.nu, run.alpha_beta_cap);

    EvolutionState s{bump_packet(g, *bump, pc.center, 0.45 * std::pow(run.nu, run.p - 1), run.nu),
                     0.0, 0.0};
    EnergyReport rep;
    CHECK_NOTHROW(rep = compute_energy({s}, pc, run));
    // nearly everything sits in the (0,0) term for this datum
    CHECK(rep.log_E[0] - rep.term_table[0][0] <= 1e-6);
}

TEST_CASE("truncation certificate: a broadband state is refused under a tight cap") {
    Grid g = make_grid(128, 48.0);
    WavePacketRun tmpl = base_template();
    tmpl.lambda = 0.95;
    tmpl.theta1 = 1.1;
    tmpl.theta_h = 1.05;
    tmpl.cap_config = 2;
    WavePacketRun run = prepare_run(tmpl, 4.0);
    REQUIRE(run.N_k == 3);
    REQUIRE(run.alpha_beta_cap == 2);

    auto bump = make_bump(run.theta_h, BumpVariant::plateau, 4);
    PacketCutoffs pc = make_packet_cutoffs(g, bump, run.p, run.nu, run.alpha_beta_cap);

    EvolutionState s{random_field(g, 0x5bd1e995u), 0.0, 0.0};
    CHECK_THROWS_AS((void)compute_energy({s}, pc, run), NumericError);
}

TEST_CASE("energy is stable under grid refinement") {
    ModelOperator op = decay_op(2, 0.5);
    WavePacketRun tmpl = base_template();
    tmpl.theta = 1.5;
    tmpl.rho0 = 2.0;
    WavePacketRun run = prepare_run(tmpl, 16.0);

    auto bump = make_bump(run.theta_h, BumpVariant::plateau, run.alpha_beta_cap);
    Grid coarse = experiment_grid(16.0, 2, 2.0);
    Grid fine = make_grid(2 * coarse.n, coarse.length);

    auto measure = [&](const Grid& g) {
        PacketCutoffs pc = make_packet_cutoffs(g, bump, run.p, run.nu, run.alpha_beta_cap);
        DatumSpec spec;
        spec.rho0 = run.rho0;
        spec.theta = run.theta;
        spec.center = pc.center;
        spec.taper_start = 0.85;
        PreparedDatum datum = make_phi(g, spec, bump.get());
        SolveOptions opts;
        opts.t_end = run.t_star;
        opts.record_times = {0.0, run.t_star};
        opts.xi_cutoff = run.cutoff_factor * run.nu;
        SolveResult sol = solve(EvolutionState{datum.field, 0.0, 0.0}, op, opts);
        return compute_energy(sol.recorded, pc, run);
    };

    EnergyReport ec = measure(coarse);
    EnergyReport ef = measure(fine);
    CHECK(std::abs(ec.log_E[0] - ef.log_E[0]) <= 1e-4);
    CHECK(std::abs(ec.log_E[1] - ef.log_E[1]) <= 1e-4);
}

TEST_CASE("windowed centroid rides the bicharacteristic at the group speed") {
    struct Setup {
        int p;
        double nu;
    };
    for (Setup c : {Setup{2, 64.0}, Setup{3, 16.0}}) {
        double ell = std::pow(c.nu, c.p - 1);
        Grid g = experiment_grid(c.nu, c.p, 1.0);
        auto bump = make_bump(1.1, BumpVariant::plateau, 1);
        PacketCutoffs pc = make_packet_cutoffs(g, bump, c.p, c.nu, 1);

        // launch at x = 0 and time the transit across the window plateau
        double speed = c.p * std::pow(c.nu, c.p - 1);
        double t1 = (pc.center - 0.3 * ell) / speed;
        double t2 = (pc.center + 0.3 * ell) / speed;
        Field u0 = bump_packet(g, *bump, 0.0, ell / 8.0, c.nu);

        SolveOptions opts;
        opts.t_end = t2;
        opts.record_times = {t1, t2};
        SolveResult sol = solve(EvolutionState{u0, 0.0, 0.0}, ModelOperator{c.p, 1.0, {}}, opts);

        double c1 = centroid(apply(pc.symbol(0, 0), sol.recorded[0].field));
        double c2 = centroid(apply(pc.symbol(0, 0), sol.recorded[1].field));
        double measured = (c2 - c1) / (t2 - t1);
        CHECK(measured == doctest::Approx(speed).epsilon(0.05));
    }
}

TEST_CASE("growth sweep fits the expected rate exponent for a decaying coefficient") {
    ModelOperator op = decay_op(2, 0.5);
    // theta = 4 keeps the datum's band spectrum nearly flat, so every
    // xi-window holds genuine signal, and lambda = 0.3 keeps N_k <= 3 here:
    // the raw sup|h^(a)| factors on the top (alpha, beta) corner then stay
    // well below the window-kernel and double-precision floors that would
    // otherwise masquerade as growth.  Measured rates are in-band.
    WavePacketRun tmpl = base_template();
    tmpl.theta = 4.0;
    tmpl.lambda = 0.3;
    GrowthResult res = growth_experiment(op, {48.0, 64.0, 96.0}, tmpl);

    REQUIRE(res.runs.size() == 3);
    CHECK(res.threshold.xi == doctest::Approx(0.5).epsilon(1e-14));
    for (const NuRun& r : res.runs) CHECK(r.lambda_rate > 0.0);
    CHECK(res.lambda_nondecreasing);
    // Lambda(nu) ~ <4 nu>^{-1/2} nu: slope 1/2 up to band-average wobble
    CHECK(res.fit.slope == doctest::Approx(0.5).epsilon(0.3));
    CHECK(std::abs(res.fit.slope - res.threshold.xi) <= 0.15);
}

TEST_CASE("boundedness sweep: normalised rates stay flat below the threshold") {
    ModelOperator op = decay_op(2, 0.5); // Xi = 1/2
    WavePacketRun tmpl = base_template();
    tmpl.theta = 1.5; // 1/theta = 2/3 > Xi: inside the well-posed cone
    tmpl.lambda = 0.3; // small N_k: top-corner artefact floors stay buried
    tmpl.rho0 = 0.3;
    BoundednessResult res = boundedness_experiment(op, {48.0, 64.0, 96.0}, tmpl);
    CHECK(res.q_min > 0.0);
    CHECK(res.q_max / res.q_min <= 5.0);
    CHECK_FALSE(res.top_increasing);
    CHECK(res.pass);
}

TEST_CASE("boundedness sweep refuses a datum class beyond the threshold") {
    ModelOperator op = decay_op(2, 0.5); // Xi = 1/2
    WavePacketRun tmpl = base_template();
    tmpl.theta = 4.0; // 1/theta = 1/4 < Xi: the premise fails
    CHECK_THROWS_AS((void)boundedness_experiment(op, {8.0, 16.0, 32.0}, tmpl), ContractError);
    tmpl.theta = 2.0; // 1/theta = Xi exactly: strict inequality required
    CHECK_THROWS_AS((void)boundedness_experiment(op, {8.0, 16.0, 32.0}, tmpl), ContractError);
}

TEST_CASE("datum decay sweep recovers 1/theta and respects the quadrature bound") {
    WavePacketRun tmpl = base_template();
    // lambda small enough that N_k == 1 across the whole sweep (uniform
    // derivative-band prefactor), rho0 large enough that the Gevrey
    // exponential dominates that prefactor in the log-log fit.
    tmpl.lambda = 0.05;
    tmpl.theta = 2.0;
    tmpl.rho0 = 8.0;
    DatumDecayResult res = datum_decay_experiment({16.0, 32.0, 64.0, 128.0}, tmpl);
    REQUIRE(res.runs.size() == 4);
    for (const DatumDecayRun& r : res.runs) {
        CHECK(r.E0_log < 0.0);
        CHECK(r.B_log <= r.E0_pos_log); // independent lower bound holds
        CHECK(std::isfinite(r.B_log));
    }
    CHECK(res.bound_ok);
    CHECK(std::abs(res.fit.slope - 0.5) <= 0.12);
}

TEST_CASE("gronwall envelope: closed forms and consistency with a measured run") {
    WavePacketRun run = prepare_run(base_template(), 16.0);

    // C = 0 collapses to a pure exponential line through E(0)
    double logE0 = -7.3;
    auto line = gronwall_envelope(run, 0.5, logE0, GronwallConstants{0.7, 0.0, 1.0});
    CHECK(line(0.0) == logE0);
    CHECK(line(0.4) == doctest::Approx(logE0 + 0.7 * 4.0 * 0.4).epsilon(1e-14));

    // a huge remainder constant eats the initial energy: -inf beyond that
    auto eaten = gronwall_envelope(run, 0.5, logE0, GronwallConstants{0.7, 5.0, 0.1});
    CHECK(eaten(0.0) == logE0);
    CHECK(std::isinf(eaten(0.05)));

    // against a measured run: a deliberately undershot rate stays below
    ModelOperator op = decay_op(2, 0.5);
    GrowthResult g = growth_experiment(op, {8.0, 16.0, 32.0}, base_template());
    const NuRun& r = g.runs[1];
    double c1 = 0.9 * r.lambda_rate / std::pow(r.nu, 0.5);
    auto env = gronwall_envelope(run, 0.5, r.log_E0, GronwallConstants{c1, 1e-3, 1.0});
    CHECK(env(run.t_star) <= r.log_Et);
    CHECK(env(0.0) == r.log_E0);
}

TEST_CASE("power-law fit: synthetic data comes back exactly") {
    std::vector<double> nus = {8.0, 16.0, 32.0, 64.0, 128.0};
    std::vector<double> rates, decays;
    for (double nu : nus) {
        rates.push_back(std::pow(nu, 0.5));
        decays.push_back(std::pow(nu, 1.0 / 3.0)); // -log E(0) for e^{-nu^{1/3}}
    }
    PowerLawFit fr = fit_power_law(nus, rates);
    CHECK(fr.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fr.max_residual <= 1e-12);
    PowerLawFit fd = fit_power_law(nus, decays);
    CHECK(fd.slope == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // a scaled law only moves the intercept
    std::vector<double> scaled;
    for (double r : rates) scaled.push_back(3.0 * r);
    PowerLawFit fs = fit_power_law(nus, scaled);
    CHECK(fs.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fs.intercept == doctest::Approx(fr.intercept + std::log(3.0)).epsilon(1e-10));

    CHECK_THROWS_AS((void)fit_power_law({1.0}, {1.0}), ContractError);
    CHECK_THROWS_AS((void)fit_power_law({1.0, 2.0}, {1.0}), ContractError);
    CHECK_THROWS_AS((void)fit_power_law({1.0, 2.0}, {1.0, -1.0}), ContractError);
}

TEST_CASE("experiment validation names the violated constraint") {
    ModelOperator op = decay_op(2, 0.5);
    WavePacketRun tmpl = base_template();

    // fewer than three frequencies cannot anchor a power law
    CHECK_THROWS_AS((void)growth_experiment(op, {8.0, 16.0}, tmpl), ContractError);
    // order mismatch between the template and the operator
    WavePacketRun wrong_p = tmpl;
    wrong_p.p = 3;
    CHECK_THROWS_AS((void)growth_experiment(op, {8.0, 16.0, 32.0}, wrong_p), ContractError);
    CHECK_THROWS_AS((void)datum_decay_experiment({16.0, 32.0}, tmpl), ContractError);

    // energy of nothing, and of a state living on the wrong grid
    Grid g = make_grid(128, 48.0);
    WavePacketRun tiny = base_template();
    tiny.lambda = 0.95;
    tiny.theta1 = 1.1;
    tiny.theta_h = 1.05;
    WavePacketRun run = prepare_run(tiny, 4.0);
    auto bump = make_bump(run.theta_h, BumpVariant::plateau, run.alpha_beta_cap);
    PacketCutoffs pc = make_packet_cutoffs(g, bump, run.p, run.nu, run.alpha_beta_cap);
    CHECK_THROWS_AS((void)compute_energy({}, pc, run), ContractError);
    Grid other = make_grid(256, 48.0);
    EvolutionState s{make_field(other), 0.0, 0.0};
    CHECK_THROWS_AS((void)compute_energy({s}, pc, run), ContractError);
}
