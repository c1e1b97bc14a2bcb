#include "pevo/model.hpp"

#include "pevo/errors.hpp"
#include "pevo/gevrey.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pevo {

namespace {

void validate_operator(const ModelOperator& op) {
    if (op.p < 2)
        throw ContractError("operator order p = " + std::to_string(op.p) + " must be >= 2");
    if (op.a_p == 0.0) throw ContractError("principal coefficient a_p must be nonzero");
    for (const auto& c : op.lower) {
        if (c.j < 1 || c.j > op.p)
            throw ContractError("coefficient index j = " + std::to_string(c.j) +
                                " outside [1, p = " + std::to_string(op.p) + "]");
        if (!(c.sigma >= 0.0 && c.sigma <= 1.0))
            throw ContractError("decay rate sigma = " + std::to_string(c.sigma) +
                                " outside [0, 1]");
        if (!(c.A >= 0.0))
            throw ContractError("imaginary amplitude A = " + std::to_string(c.A) +
                                " must be >= 0");
        for (const auto& o : op.lower)
            if (&o != &c && o.j == c.j)
                throw ContractError("duplicate coefficient index j = " + std::to_string(c.j));
    }
}

// Indices of op.lower sorted by ascending j.
std::vector<size_t> by_j(const ModelOperator& op) {
    std::vector<size_t> idx(op.lower.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return op.lower[a].j < op.lower[b].j; });
    return idx;
}

// A <x>^{-sigma} at the nodes; shared by lower_symbol and decompose_ij so the
// reconstruction identity compares bitwise-equal products.
std::vector<double> imag_profile(const Grid& g, const LowerCoeff& c) {
    std::vector<double> v(g.n);
    for (std::int64_t m = 0; m < g.n; ++m) v[m] = c.A * std::pow(bracket(g.node(m)), -c.sigma);
    return v;
}

std::vector<double> xi_power(const Grid& g, int q) {
    std::vector<double> v(g.n);
    for (std::int64_t k = 0; k < g.n; ++k) v[k] = std::pow(g.freq(k), static_cast<double>(q));
    return v;
}

std::vector<cplx> to_cplx(const std::vector<double>& v, double scale = 1.0) {
    std::vector<cplx> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = cplx(scale * v[i], 0.0);
    return out;
}

} // namespace

ThresholdReport xi_threshold(const ModelOperator& op) {
    validate_operator(op);
    if (op.lower.empty())
        throw ContractError("threshold classification needs at least one lower coefficient");
    for (const auto& c : op.lower)
        if (c.A == 0.0)
            throw ContractError("coefficient j = " + std::to_string(c.j) +
                                " has A = 0; classification assumes A > 0");

    ThresholdReport rep;
    for (size_t i : by_j(op)) {
        const LowerCoeff& c = op.lower[i];
        TermThreshold t;
        t.j = c.j;
        t.term = (op.p - 1) * (1.0 - c.sigma) - c.j + 1;
        double lo = static_cast<double>(op.p - 1 - c.j) / (op.p - 1);
        double hi = static_cast<double>(op.p - c.j) / (op.p - 1);
        if (c.sigma <= lo) {
            t.cls = ThresholdClass::not_wp;
        } else if (c.sigma >= hi) {
            t.cls = ThresholdClass::no_effect;
        } else {
            t.cls = ThresholdClass::restricts;
            t.theta_bound = 1.0 / t.term;
        }
        rep.per_j.push_back(t);
    }

    rep.xi = rep.per_j.front().term;
    rep.argmax_j = rep.per_j.front().j;
    for (const auto& t : rep.per_j) {
        if (t.term > rep.xi) { // strict: ties keep the smallest j
            rep.xi = t.term;
            rep.argmax_j = t.j;
        }
        if (t.cls == ThresholdClass::not_wp) rep.cls = ThresholdClass::not_wp;
        else if (t.cls == ThresholdClass::restricts && rep.cls == ThresholdClass::no_effect)
            rep.cls = ThresholdClass::restricts;
    }
    if (rep.cls == ThresholdClass::restricts) rep.theta_bound = 1.0 / rep.xi;
    return rep;
}

double c_lower(int j, int p, double A, double sigma) {
    if (p < 2) throw ContractError("order p = " + std::to_string(p) + " must be >= 2");
    if (j < 1 || j > p)
        throw ContractError("index j = " + std::to_string(j) + " outside [1, p = " +
                            std::to_string(p) + "]");
    if (!(sigma >= 0.0 && sigma <= 1.0))
        throw ContractError("decay rate sigma = " + std::to_string(sigma) + " outside [0, 1]");
    if (!(A >= 0.0))
        throw ContractError("amplitude A = " + std::to_string(A) + " must be >= 0");
    return A * std::pow(7.0, -sigma) / std::pow(4.0, static_cast<double>(p - j));
}

SampledSymbol lower_symbol(const ModelOperator& op, const Grid& g) {
    validate_operator(op);
    SampledSymbol s{g, {}};
    for (size_t i : by_j(op)) {
        const LowerCoeff& c = op.lower[i];
        if (!c.real_part.empty() && static_cast<int>(c.real_part.size()) != g.n)
            throw ContractError("real_part of coefficient j = " + std::to_string(c.j) + " has " +
                                std::to_string(c.real_part.size()) + " samples, grid has " +
                                std::to_string(g.n));
        std::vector<double> v = imag_profile(g, c);
        SymbolTerm term;
        term.xprof.resize(g.n);
        for (std::int64_t m = 0; m < g.n; ++m)
            term.xprof[m] = cplx(c.real_part.empty() ? 0.0 : c.real_part[m], v[m]);
        term.xiprof = to_cplx(xi_power(g, op.p - c.j));
        s.terms.push_back(std::move(term));
    }
    return s;
}

IJDecomposition decompose_ij(const ModelOperator& op, const PacketCutoffs& pc, int j) {
    validate_operator(op);
    if (pc.p != op.p)
        throw ContractError("cutoffs were built for p = " + std::to_string(pc.p) +
                            ", operator has p = " + std::to_string(op.p));
    if (pc.bump->variant() != BumpVariant::plateau)
        throw ContractError("decomposition needs the plateau bump variant "
                            "(exact psi = chi = 1 on the packet box)");
    const LowerCoeff* coeff = nullptr;
    for (const auto& c : op.lower)
        if (c.j == j) coeff = &c;
    if (!coeff)
        throw ContractError("operator has no coefficient with j = " + std::to_string(j));
    if (coeff->A <= 0.0)
        throw ContractError("coefficient j = " + std::to_string(j) +
                            " has A = " + std::to_string(coeff->A) +
                            "; decomposition needs A > 0");

    const Grid& g = pc.grid;
    int q = op.p - j;
    double ell = std::pow(pc.nu, op.p - 1);
    std::vector<double> v = imag_profile(g, *coeff);
    std::vector<double> xiq = xi_power(g, q);

    IJDecomposition d;
    d.c_nu = c_lower(j, op.p, coeff->A, coeff->sigma) * std::pow(bracket(ell), -coeff->sigma) *
             std::pow(pc.nu, static_cast<double>(q));

    // stored products; the same arrays appear negated in J so that nodewise
    // sums cancel exactly wherever psi chi is exactly 0 or 1
    std::vector<double> v_psi(g.n), c_psi(g.n);
    for (std::int64_t m = 0; m < g.n; ++m) {
        v_psi[m] = v[m] * pc.psi[m];
        c_psi[m] = d.c_nu * pc.psi[m];
    }
    std::vector<double> xiq_chi(g.n);
    for (std::int64_t k = 0; k < g.n; ++k) xiq_chi[k] = xiq[k] * pc.chi[k];
    std::vector<cplx> chi_c = to_cplx(pc.chi);
    std::vector<cplx> ones(g.n, cplx(1.0, 0.0));

    d.I.grid = g;
    d.I.terms = {{to_cplx(v_psi), to_cplx(xiq_chi)}, {to_cplx(c_psi, -1.0), chi_c}};
    d.J.grid = g;
    d.J.terms = {{to_cplx(v), to_cplx(xiq)},
                 {to_cplx(v_psi, -1.0), to_cplx(xiq_chi)},
                 {std::vector<cplx>(g.n, cplx(-d.c_nu, 0.0)), ones},
                 {to_cplx(c_psi), chi_c}};

    // certified positivity: v and xi^q are separable, so the minimum of their
    // product over the psi/chi support is the product of the factor minima
    double v_min = 0.0, xiq_min = 0.0;
    bool any_psi = false, any_chi = false;
    for (std::int64_t m = 0; m < g.n; ++m)
        if (pc.psi[m] > 0.0) {
            v_min = any_psi ? std::min(v_min, v[m]) : v[m];
            any_psi = true;
        }
    for (std::int64_t k = 0; k < g.n; ++k)
        if (pc.chi[k] > 0.0) {
            xiq_min = any_chi ? std::min(xiq_min, xiq[k]) : xiq[k];
            any_chi = true;
        }
    d.xi_pow_min = xiq_min;
    d.i_lower_bound = (any_psi && any_chi) ? std::min(0.0, v_min * xiq_min - d.c_nu) : 0.0;
    d.I_nonneg = d.i_lower_bound >= -1e-12 * d.c_nu;

    // disjointness: psi and chi are exactly 1 wherever any cached cutoff
    // profile is nonzero, which makes the J terms cancel exactly there
    d.J_disjoint = true;
    for (std::int64_t m = 0; m < g.n && d.J_disjoint; ++m)
        for (int a = 0; a <= pc.cap; ++a)
            if (pc.xprof[a][m] != 0.0 && pc.psi[m] != 1.0) d.J_disjoint = false;
    for (std::int64_t k = 0; k < g.n && d.J_disjoint; ++k)
        for (int b = 0; b <= pc.cap; ++b)
            if (pc.xiprof[b][k] != 0.0 && pc.chi[k] != 1.0) d.J_disjoint = false;

    // reconstruction identity c_nu + I + J = v xi^q on a node subsample
    std::int64_t ms = std::max<std::int64_t>(1, g.n / 512);
    std::int64_t ks = std::max<std::int64_t>(1, g.n / 509);
    for (std::int64_t m = 0; m < g.n; m += ms) {
        for (std::int64_t k = 0; k < g.n; k += ks) {
            double lhs = d.c_nu;
            for (const auto& t : d.I.terms) lhs += std::real(t.xprof[m]) * std::real(t.xiprof[k]);
            for (const auto& t : d.J.terms) lhs += std::real(t.xprof[m]) * std::real(t.xiprof[k]);
            double rhs = v[m] * xiq[k];
            double scale = std::max(d.c_nu, std::abs(rhs));
            if (std::abs(lhs - rhs) > 1e-12 * scale)
                throw NumericError("decomposition reconstruction failed at node (" +
                                   std::to_string(m) + ", " + std::to_string(k) +
                                   "): error exceeds 1e-12 of scale " + std::to_string(scale));
        }
    }
    return d;
}

} // namespace pevo
