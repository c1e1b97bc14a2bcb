#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pevo/errors.hpp"
#include "pevo/symbol.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <random>

using namespace pevo;

namespace {

SampledSymbol random_symbol(const Grid& g, int nterms, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SampledSymbol s{g, {}};
    for (int t = 0; t < nterms; ++t) {
        SymbolTerm term;
        for (std::int64_t i = 0; i < g.n; ++i) {
            term.xprof.emplace_back(u(rng), u(rng));
            term.xiprof.emplace_back(u(rng), u(rng));
        }
        s.terms.push_back(std::move(term));
    }
    return s;
}

Field random_field(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Field f = make_field(g);
    for (auto& z : f.v) z = cplx(u(rng), u(rng));
    return f;
}

} // namespace

TEST_CASE("applying a symbol to a pure grid mode multiplies by a(x) b(xi0)") {
    const Grid g = make_grid(64, 8.0);
    const std::int64_t k0 = 5;
    const double xi0 = g.freq(k0);

    SampledSymbol s{g, {SymbolTerm{}}};
    for (std::int64_t m = 0; m < g.n; ++m)
        s.terms[0].xprof.push_back(cplx(std::cos(g.node(m)), 0.3 * std::sin(2.0 * g.node(m))));
    for (std::int64_t k = 0; k < g.n; ++k)
        s.terms[0].xiprof.push_back(cplx(1.0 / (1.0 + g.freq(k) * g.freq(k)), 0.0));

    Field u = make_field(g);
    for (std::int64_t m = 0; m < g.n; ++m)
        u.v[(size_t)m] = std::polar(1.0, xi0 * g.node(m));

    const Field got = apply(s, u);
    const cplx bxi = s.terms[0].xiprof[(size_t)k0];
    for (std::int64_t m = 0; m < g.n; ++m) {
        const cplx want = s.terms[0].xprof[(size_t)m] * bxi * std::polar(1.0, xi0 * g.node(m));
        CHECK(std::abs(got.v[(size_t)m] - want) < 1e-12);
    }
}

TEST_CASE("the identity symbol is the identity") {
    const Grid g = make_grid(128, 21.0);
    SampledSymbol id{g, {SymbolTerm{std::vector<cplx>((size_t)g.n, cplx(1.0)),
                                    std::vector<cplx>((size_t)g.n, cplx(1.0))}}};
    const Field u = random_field(g, 17);
    const Field v = apply(id, u);
    for (std::int64_t m = 0; m < g.n; ++m)
        CHECK(std::abs(v.v[(size_t)m] - u.v[(size_t)m]) < 1e-13);
}

TEST_CASE("dense_matrix matches the longhand diag * W^-1 * diag * W oracle") {
    const Grid g = make_grid(32, 11.0);
    const std::int64_t n = g.n;
    const SampledSymbol s = random_symbol(g, 2, 99);

    // longhand: forward matrix W[k][m] = h e^{-i xi_k x_m}, inverse
    // Winv[m][k] = (1/L) e^{+i xi_k x_m}
    std::vector<cplx> W((size_t)(n * n)), Winv((size_t)(n * n));
    for (std::int64_t k = 0; k < n; ++k)
        for (std::int64_t m = 0; m < n; ++m) {
            W[(size_t)(k * n + m)] = g.spacing() * std::polar(1.0, -g.freq(k) * g.node(m));
            Winv[(size_t)(m * n + k)] = std::polar(1.0, g.freq(k) * g.node(m)) / g.length;
        }
    std::vector<cplx> want((size_t)(n * n), cplx(0.0));
    for (const SymbolTerm& t : s.terms) {
        std::vector<cplx> DbW = W;
        for (std::int64_t k = 0; k < n; ++k)
            for (std::int64_t m = 0; m < n; ++m) DbW[(size_t)(k * n + m)] *= t.xiprof[(size_t)k];
        const std::vector<cplx> WiDbW = oracle::matmul(Winv, DbW, (size_t)n);
        for (std::int64_t r = 0; r < n; ++r)
            for (std::int64_t c = 0; c < n; ++c)
                want[(size_t)(r * n + c)] += t.xprof[(size_t)r] * WiDbW[(size_t)(r * n + c)];
    }

    const std::vector<cplx> got = dense_matrix(s);
    double scale = 0.0;
    for (const cplx& z : want) scale = std::max(scale, std::abs(z));
    for (size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-11 * scale);

    // and applying the symbol equals the matrix-vector product
    const Field u = random_field(g, 7);
    const std::vector<cplx> mv = oracle::matvec(got, u.v);
    const Field au = apply(s, u);
    for (std::int64_t m = 0; m < n; ++m) CHECK(std::abs(au.v[(size_t)m] - mv[(size_t)m]) < 1e-11);
}

TEST_CASE("x-multiplier after Fourier multiplier composes to the separable symbol") {
    const Grid g = make_grid(128, 16.0);
    const SampledSymbol ab = random_symbol(g, 1, 4);
    SampledSymbol a_only{g, {SymbolTerm{ab.terms[0].xprof, std::vector<cplx>((size_t)g.n, cplx(1.0))}}};
    SampledSymbol b_only{g, {SymbolTerm{std::vector<cplx>((size_t)g.n, cplx(1.0)), ab.terms[0].xiprof}}};

    const Field u = random_field(g, 23);
    const Field two_step = apply(a_only, apply(b_only, u));
    const Field one_step = apply(ab, u);
    for (std::int64_t m = 0; m < g.n; ++m)
        CHECK(std::abs(two_step.v[(size_t)m] - one_step.v[(size_t)m]) < 1e-12);
}

TEST_CASE("decay seminorm reproduces an analytic second derivative sup") {
    const Grid g = make_grid(1024, 40.0);
    std::vector<cplx> prof((size_t)g.n);
    for (std::int64_t m = 0; m < g.n; ++m) {
        const double x = g.node(m);
        prof[(size_t)m] = x * x * std::exp(-0.5 * x * x);
    }
    // f'' = (x^4 - 5 x^2 + 2) e^{-x^2/2}; scan a dense grid for its sup
    double want = 0.0;
    for (double x = 0.0; x <= 20.0; x += 1e-4) {
        const double d2 = (std::pow(x, 4) - 5.0 * x * x + 2.0) * std::exp(-0.5 * x * x);
        want = std::max(want, std::fabs(d2));
    }
    CHECK(decay_seminorm(prof, g, 2, 0.0) == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("decay seminorm weight cancels a matching power-law exactly") {
    // <x>^{sigma} * <x>^{-sigma} == 1 everywhere: no derivative involved
    const Grid g = make_grid(4096, 400.0);
    const double sigma = 0.6;
    std::vector<cplx> prof((size_t)g.n);
    for (std::int64_t m = 0; m < g.n; ++m)
        prof[(size_t)m] = std::pow(bracket(g.node(m)), -sigma);
    CHECK(decay_seminorm(prof, g, 0, sigma) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("decay seminorm: weighted first derivative of a Gaussian") {
    const Grid g = make_grid(1024, 40.0);
    std::vector<cplx> prof((size_t)g.n);
    for (std::int64_t m = 0; m < g.n; ++m)
        prof[(size_t)m] = std::exp(-0.5 * g.node(m) * g.node(m));
    double want = 0.0; // sup <x>^2 |x| e^{-x^2/2} by dense scan
    for (double x = 0.0; x <= 20.0; x += 1e-4)
        want = std::max(want, (1.0 + x * x) * x * std::exp(-0.5 * x * x));
    CHECK(decay_seminorm(prof, g, 1, 2.0) == doctest::Approx(want).epsilon(1e-3)); // sup sampled at nodes
}

TEST_CASE("packet cutoffs: exact plateaus, supports, and covering pair") {
    const Grid g = make_grid(2048, 256.0);
    const auto bump = make_bump(1.2, BumpVariant::plateau, 8);
    const PacketCutoffs pc = make_packet_cutoffs(g, bump, 2, 16.0, 3);

    CHECK(pc.center == doctest::Approx(64.0).epsilon(1e-12));

    // chi-band plateau: exactly 1 near xi = nu, exactly 0 outside [3/4,5/4] nu
    bool saw_plateau = false;
    for (std::int64_t k = 0; k < g.n; ++k) {
        const double xi = g.freq(k);
        if (std::fabs(xi - 16.0) <= 2.0 - 0.01) {
            CHECK(pc.xiprof[0][(size_t)k] == 1.0);
            saw_plateau = true;
        }
        if (xi < 11.9 || xi > 20.1) CHECK(pc.xiprof[0][(size_t)k] == 0.0);
    }
    CHECK(saw_plateau);

    // x-side: 1 at the center cell, 0 away from the box [3,5] nu
    const std::int64_t mc = (std::int64_t)std::llround((pc.center + 0.5 * g.length) / g.spacing());
    CHECK(pc.xprof[0][(size_t)mc] == 1.0);
    for (std::int64_t m = 0; m < g.n; ++m) {
        const double x = g.node(m);
        if (x < 47.9 || x > 80.1) CHECK(pc.xprof[0][(size_t)m] == 0.0);
    }

    // psi, chi are exactly 1 wherever any w^{ab} is nonzero
    for (std::int64_t m = 0; m < g.n; ++m)
        if (pc.xprof[0][(size_t)m] != 0.0 || pc.xprof[3][(size_t)m] != 0.0)
            CHECK(pc.psi[(size_t)m] == 1.0);
    for (std::int64_t k = 0; k < g.n; ++k)
        if (pc.xiprof[0][(size_t)k] != 0.0 || pc.xiprof[3][(size_t)k] != 0.0)
            CHECK(pc.chi[(size_t)k] == 1.0);
}

TEST_CASE("packet cutoff x-derivatives scale like nu^{-ell (p-1)}") {
    const Grid g = make_grid(2048, 256.0);
    const auto bump = make_bump(1.2, BumpVariant::plateau, 8);
    const PacketCutoffs c8 = make_packet_cutoffs(g, bump, 2, 8.0, 3);
    const PacketCutoffs c16 = make_packet_cutoffs(g, bump, 2, 16.0, 3);
    for (int ell = 1; ell <= 2; ++ell) {
        std::vector<cplx> p8(c8.xprof[0].begin(), c8.xprof[0].end());
        std::vector<cplx> p16(c16.xprof[0].begin(), c16.xprof[0].end());
        const double ratio = decay_seminorm(p16, g, ell, 0.0) / decay_seminorm(p8, g, ell, 0.0);
        CHECK(ratio == doctest::Approx(std::pow(2.0, -ell)).epsilon(0.02));
    }
}

TEST_CASE("packet cutoff construction validates the geometry") {
    const auto bump = make_bump(1.2, BumpVariant::plateau, 8);
    // domain shorter than 10 nu^{p-1}
    CHECK_THROWS_AS(make_packet_cutoffs(make_grid(1024, 128.0), bump, 2, 16.0, 3), ContractError);
    // grid too coarse for the frequency band
    CHECK_THROWS_AS(make_packet_cutoffs(make_grid(256, 256.0), bump, 2, 16.0, 3), ContractError);
    // cap beyond the bump cache
    CHECK_THROWS_AS(make_packet_cutoffs(make_grid(2048, 256.0), bump, 2, 16.0, 20), ContractError);
    CHECK_THROWS_AS(make_packet_cutoffs(make_grid(2048, 256.0), nullptr, 2, 16.0, 3), ContractError);
}

TEST_CASE("dense_matrix refuses large grids") {
    const Grid g = make_grid(2048, 100.0);
    SampledSymbol s{g, {}};
    CHECK_THROWS_AS(dense_matrix(s), ContractError);
}
