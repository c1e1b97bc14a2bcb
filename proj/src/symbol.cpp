#include "pevo/symbol.hpp"
#include "pevo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pevo {

namespace {

void require_same_grid(const Grid& a, const Grid& b, const char* who) {
    if (!(a == b))
        throw ContractError(std::string(who) + ": symbol and field live on different grids");
}

// Fornberg weights for the m-th derivative at z from nodes x[0..n-1];
// fills c[j] with the weight of x[j].  (B. Fornberg, Math. Comp. 51, 1988.)
void fd_weights(double z, const double* x, int n, int m, double* out) {
    std::vector<double> c(static_cast<size_t>(n) * static_cast<size_t>(m + 1), 0.0);
    auto C = [&](int j, int k) -> double& { return c[static_cast<size_t>(j) * (m + 1) + k]; };
    double c1 = 1.0, c4 = x[0] - z;
    C(0, 0) = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    C(i, k) = c1 * (k * C(i - 1, k - 1) - c5 * C(i - 1, k)) / c2;
                C(i, 0) = -c1 * c5 * C(i - 1, 0) / c2;
            }
            for (int k = mn; k >= 1; --k) C(j, k) = (c4 * C(j, k) - k * C(j, k - 1)) / c3;
            C(j, 0) = c4 * C(j, 0) / c3;
        }
        c1 = c2;
    }
    for (int j = 0; j < n; ++j) out[j] = C(j, m);
}

} // namespace

Field apply(const SampledSymbol& s, const Field& u) {
    require_same_grid(s.grid, u.grid, "apply");
    const std::int64_t n = s.grid.n;
    const Spectrum su = forward_transform(u);
    Field out = make_field(s.grid);
    Spectrum tmp = make_spectrum(s.grid);
    for (const SymbolTerm& t : s.terms) {
        if (static_cast<std::int64_t>(t.xprof.size()) != n ||
            static_cast<std::int64_t>(t.xiprof.size()) != n)
            throw ContractError("apply: term profile length does not match the grid");
        for (std::int64_t k = 0; k < n; ++k)
            tmp.v[static_cast<size_t>(k)] = t.xiprof[static_cast<size_t>(k)] * su.v[static_cast<size_t>(k)];
        const Field part = inverse_transform(tmp);
        for (std::int64_t m = 0; m < n; ++m)
            out.v[static_cast<size_t>(m)] += t.xprof[static_cast<size_t>(m)] * part.v[static_cast<size_t>(m)];
    }
    return out;
}

std::vector<cplx> dense_matrix(const SampledSymbol& s) {
    const std::int64_t n = s.grid.n;
    if (n > 1024)
        throw ContractError("dense_matrix: n = " + std::to_string(n) + " exceeds the 1024 guard");
    std::vector<cplx> M(static_cast<size_t>(n) * static_cast<size_t>(n), cplx(0.0));
    // For one term, M[r][c] = a_r * K[(r-c) mod n] with
    // K[d] = (h/L) sum_k b_k e^{+2 pi i k d / n}: a circulant column profile.
    std::vector<cplx> K(static_cast<size_t>(n));
    const double scale = s.grid.spacing() / s.grid.length;
    for (const SymbolTerm& t : s.terms) {
        if (static_cast<std::int64_t>(t.xprof.size()) != n ||
            static_cast<std::int64_t>(t.xiprof.size()) != n)
            throw ContractError("dense_matrix: term profile length does not match the grid");
        dft_raw(n, t.xiprof.data(), K.data(), +1);
        for (std::int64_t r = 0; r < n; ++r) {
            const cplx ar = t.xprof[static_cast<size_t>(r)] * scale;
            for (std::int64_t c = 0; c < n; ++c)
                M[static_cast<size_t>(r * n + c)] += ar * K[static_cast<size_t>((r - c + n) % n)];
        }
    }
    return M;
}

double decay_seminorm(const std::vector<cplx>& prof, const Grid& g, int ell, double weight_pow) {
    if (ell < 0 || ell > 4)
        throw ContractError("decay_seminorm: derivative order " + std::to_string(ell) +
                            " outside [0, 4]");
    if (static_cast<std::int64_t>(prof.size()) != g.n)
        throw ContractError("decay_seminorm: profile length does not match the grid");
    const std::int64_t n = g.n;
    double best = 0.0;
    if (ell == 0) {
        for (std::int64_t m = 0; m < n; ++m)
            best = std::max(best,
                            std::pow(bracket(g.node(m)), weight_pow) * std::abs(prof[static_cast<size_t>(m)]));
        return best;
    }
    double xs[9], w[9];
    for (int i = 0; i < 9; ++i) xs[i] = g.spacing() * static_cast<double>(i - 4);
    fd_weights(0.0, xs, 9, ell, w);
    for (std::int64_t m = 0; m < n; ++m) {
        cplx d = 0.0;
        for (int i = 0; i < 9; ++i)
            d += w[i] * prof[static_cast<size_t>((m + i - 4 + n) % n)];
        best = std::max(best, std::pow(bracket(g.node(m)), weight_pow) * std::abs(d));
    }
    return best;
}

SampledSymbol PacketCutoffs::symbol(int alpha, int beta) const {
    if (alpha < 0 || alpha > cap || beta < 0 || beta > cap)
        throw ContractError("packet cutoff order (" + std::to_string(alpha) + ", " +
                            std::to_string(beta) + ") outside the tabulated cap " + std::to_string(cap));
    SymbolTerm t;
    t.xprof.assign(xprof[static_cast<size_t>(alpha)].begin(), xprof[static_cast<size_t>(alpha)].end());
    t.xiprof.assign(xiprof[static_cast<size_t>(beta)].begin(), xiprof[static_cast<size_t>(beta)].end());
    return SampledSymbol{grid, {std::move(t)}};
}

SampledSymbol PacketCutoffs::psi_chi() const {
    SymbolTerm t;
    t.xprof.assign(psi.begin(), psi.end());
    t.xiprof.assign(chi.begin(), chi.end());
    return SampledSymbol{grid, {std::move(t)}};
}

PacketCutoffs make_packet_cutoffs(const Grid& g, std::shared_ptr<const GevreyBump> bump,
                                  int p, double nu, int cap) {
    if (!bump) throw ContractError("make_packet_cutoffs: null bump");
    if (p < 2 || p > 8)
        throw ContractError("make_packet_cutoffs: order p = " + std::to_string(p) + " outside [2, 8]");
    if (!(nu >= 4.0))
        throw ContractError("make_packet_cutoffs: nu = " + std::to_string(nu) + " must be >= 4");
    if (cap < 0 || cap > bump->max_order())
        throw ContractError("make_packet_cutoffs: cap " + std::to_string(cap) +
                            " outside the bump's cached range [0, " + std::to_string(bump->max_order()) + "]");
    const double ell = std::pow(nu, p - 1);
    // snap the center DOWN to a node: with c <= 4 ell the outer cutoff support
    // stays inside [c - 3 ell, c + 3 ell] subset [0, 7 ell], where the
    // positivity certificate of the symbol decomposition is exact on any grid
    const double c = g.node(static_cast<std::int64_t>(std::floor((4.0 * ell + 0.5 * g.length) / g.spacing())));
    // the w-support box [3,5] ell x [3/4,5/4] nu must sit strictly inside
    if (!(5.0 * ell < 0.5 * g.length - 2.0 * g.spacing()))
        throw ContractError("make_packet_cutoffs: domain too short, needs length > 10 nu^{p-1}, got " +
                            std::to_string(g.length) + " for nu^{p-1} = " + std::to_string(ell));
    if (!(1.25 * nu < g.max_abs_freq() * (1.0 - 4.0 / static_cast<double>(g.n))))
        throw ContractError("make_packet_cutoffs: grid too coarse, needs max frequency > 1.25 nu = " +
                            std::to_string(1.25 * nu) + ", got " + std::to_string(g.max_abs_freq()));

    PacketCutoffs pc;
    pc.grid = g;
    pc.p = p;
    pc.nu = nu;
    pc.cap = cap;
    pc.center = c;
    pc.bump = bump;
    pc.xprof.assign(static_cast<size_t>(cap) + 1, std::vector<double>(static_cast<size_t>(g.n)));
    pc.xiprof.assign(static_cast<size_t>(cap) + 1, std::vector<double>(static_cast<size_t>(g.n)));
    pc.psi.resize(static_cast<size_t>(g.n));
    pc.chi.resize(static_cast<size_t>(g.n));
    for (std::int64_t m = 0; m < g.n; ++m) {
        const double sx = (g.node(m) - c) / ell;
        for (int a = 0; a <= cap; ++a)
            pc.xprof[static_cast<size_t>(a)][static_cast<size_t>(m)] = bump->eval(a, sx);
        pc.psi[static_cast<size_t>(m)] = bump->eval(0, (g.node(m) - c) / (3.0 * ell));
    }
    for (std::int64_t k = 0; k < g.n; ++k) {
        const double sxi = (g.freq(k) - nu) / (0.25 * nu);
        for (int b = 0; b <= cap; ++b)
            pc.xiprof[static_cast<size_t>(b)][static_cast<size_t>(k)] = bump->eval(b, sxi);
        pc.chi[static_cast<size_t>(k)] = bump->eval(0, (g.freq(k) - nu) / (0.75 * nu));
    }
    return pc;
}

} // namespace pevo
