#include "pevo/gevrey.hpp"
#include "pevo/errors.hpp"

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <limits>

namespace pevo {

namespace {

std::string strf(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    return std::string(buf);
}

// Generator of all bumps: exp(-(1-x^2)^{-p}) on (-1,1), zero outside.
// p = 1/(theta_h - 1) puts it in Gevrey class theta_h.
double gen_bump(double x, double p) {
    const double q = 1.0 - x * x;
    if (q <= 0.0) return 0.0;
    const double e = std::pow(q, -p);
    return (e > 700.0) ? 0.0 : std::exp(-e);
}

// Taylor jet of the generator at s: U[k] = g^{(k)}(s) / k!, k = 0..K.
// Composed from the standard power/exponential series recurrences on
// t = 1-s^2, v = t^{-p}, g = e^{-v}; every step is a short convolution, so
// the jet is accurate in a *relative* sense even deep in the tails (which
// FFT differentiation cannot achieve in doubles).  Below the double range
// the whole jet is flushed to exact zero.
void gen_jet(double s, double p, int K, double* U) {
    const double t0 = 1.0 - s * s;
    if (t0 <= 0.0 || std::pow(t0, -p) > 745.0 + 7.0 * static_cast<double>(K)) {
        std::fill(U, U + K + 1, 0.0);
        return;
    }
    const double gamma = -p;
    std::vector<double> V(static_cast<size_t>(K) + 1), W(static_cast<size_t>(K) + 1);
    const double T1 = -2.0 * s, T2 = -1.0; // Taylor coefficients of t = 1-s^2
    V[0] = std::pow(t0, gamma);
    for (int k = 1; k <= K; ++k) {
        double acc = ((gamma + 1.0) * 1.0 - k) * T1 * V[static_cast<size_t>(k - 1)];
        if (k >= 2) acc += ((gamma + 1.0) * 2.0 - k) * T2 * V[static_cast<size_t>(k - 2)];
        V[static_cast<size_t>(k)] = acc / (static_cast<double>(k) * t0);
    }
    for (int k = 0; k <= K; ++k) W[static_cast<size_t>(k)] = -V[static_cast<size_t>(k)];
    U[0] = std::exp(W[0]);
    for (int k = 1; k <= K; ++k) {
        double acc = 0.0;
        for (int j = 1; j <= k; ++j)
            acc += static_cast<double>(j) * W[static_cast<size_t>(j)] * U[k - j];
        U[k] = acc / static_cast<double>(k);
    }
}

// log of the weighted spectral l2 norm plus the frequency dominating it.
struct LogNorm {
    double value = -std::numeric_limits<double>::infinity();
    double top_xi = 0.0;
};

LogNorm log_norm_core(const Spectrum& s, double rho, double theta) {
    if (!(rho >= 0.0) || !std::isfinite(rho))
        throw ContractError(strf("gevrey norm: rho = %g must be finite and >= 0", rho));
    if (!(theta > 1.0))
        throw ContractError(strf("gevrey norm: theta = %g must be > 1", theta));
    const std::int64_t n = s.grid.n;
    double top = -std::numeric_limits<double>::infinity();
    double top_xi = 0.0;
    for (std::int64_t k = 0; k < n; ++k) {
        const double a = std::abs(s.v[k]);
        if (a == 0.0) continue;
        const double l = 2.0 * rho * std::pow(bracket(s.grid.freq(k)), 1.0 / theta) + 2.0 * std::log(a);
        if (l > top) { top = l; top_xi = s.grid.freq(k); }
    }
    LogNorm out;
    out.top_xi = top_xi;
    if (!std::isfinite(top)) return out; // all-zero spectrum
    double acc = 0.0;
    for (std::int64_t k = 0; k < n; ++k) {
        const double a = std::abs(s.v[k]);
        if (a == 0.0) continue;
        acc += std::exp(2.0 * rho * std::pow(bracket(s.grid.freq(k)), 1.0 / theta) + 2.0 * std::log(a) - top);
    }
    out.value = 0.5 * (top + std::log(acc)) - 0.5 * std::log(s.grid.length);
    return out;
}

} // namespace

double gevrey_weight(double xi, double rho, double theta) {
    if (!(rho >= 0.0) || !(theta > 1.0))
        throw ContractError(strf("gevrey_weight: need rho >= 0 (got %g) and theta > 1 (got %g)", rho, theta));
    const double a = rho * std::pow(bracket(xi), 1.0 / theta);
    if (a > 709.0)
        throw ContractError(strf("gevrey_weight overflows: rho*<xi>^(1/theta) = %.1f > 709 at xi = %.6g", a, xi));
    return std::exp(a);
}

double gevrey_log_norm(const Spectrum& s, double rho, double theta) {
    return log_norm_core(s, rho, theta).value;
}

double gevrey_log_norm(const Field& f, double rho, double theta) {
    return gevrey_log_norm(forward_transform(f), rho, theta);
}

double gevrey_norm(const Field& f, double rho, double theta) {
    const LogNorm ln = log_norm_core(forward_transform(f), rho, theta);
    if (ln.value > 709.0)
        throw ContractError(strf("gevrey_norm overflows (log = %.1f); dominating frequency xi = %.6g; "
                                 "use gevrey_log_norm instead",
                                 ln.value, ln.top_xi));
    return std::isfinite(ln.value) ? std::exp(ln.value) : 0.0;
}

// --- GevreyBump ------------------------------------------------------------

double GevreyBump::eval(int alpha, double s) const {
    if (alpha < 0 || alpha > max_order_)
        throw ContractError(strf("bump derivative order %d outside cached range [0, %d]", alpha, max_order_));
    const double as = std::fabs(s);
    if (as >= 1.0) return 0.0;
    if (variant_ == BumpVariant::plateau && as <= 0.5) return (alpha == 0) ? 1.0 : 0.0;
    // 8-point Lagrange interpolation on the fine table
    const std::vector<double>& tab = deriv_[static_cast<size_t>(alpha)];
    const double u = (s - fine_x0) / fine_dx;
    std::int64_t j0 = static_cast<std::int64_t>(std::floor(u)) - 3;
    j0 = std::clamp<std::int64_t>(j0, 0, fine_n - 8);
    double acc = 0.0;
    for (int i = 0; i < 8; ++i) {
        double w = 1.0;
        for (int m = 0; m < 8; ++m) {
            if (m == i) continue;
            w *= (u - static_cast<double>(j0 + m)) / static_cast<double>(i - m);
        }
        acc += w * tab[static_cast<size_t>(j0 + i)];
    }
    // both constructions are pointwise nonnegative; an interpolation
    // undershoot at the 1e-18 level must not leak a negative sign out
    if (alpha == 0 && acc < 0.0) acc = 0.0;
    return acc;
}

double GevreyBump::sup_deriv(int alpha) const {
    if (alpha < 0 || alpha > max_order_)
        throw ContractError(strf("bump derivative order %d outside cached range [0, %d]", alpha, max_order_));
    return sup_[static_cast<size_t>(alpha)];
}

double GevreyBump::fhat(double zeta) const {
    // Both branches sum a e^{-i omega x} series with an incrementally rotated
    // phase (renormalised every 4096 steps to stop drift).
    if (variant_ == BumpVariant::pos_fourier) {
        const double om = 0.5 * zeta;
        cplx rot = std::polar(1.0, -om * g_x0);
        const cplx step = std::polar(1.0, -om * g_dx);
        cplx acc = 0.0;
        for (size_t m = 0; m < gsamp_.size(); ++m) {
            acc += gsamp_[m] * rot;
            rot *= step;
            if ((m & 4095u) == 4095u) rot /= std::abs(rot);
        }
        return std::norm(acc * g_dx) / (2.0 * autocorr_peak);
    }
    const std::int64_t jlo = static_cast<std::int64_t>(std::ceil((-1.0 - fine_x0) / fine_dx));
    const std::int64_t jhi = static_cast<std::int64_t>(std::floor((1.0 - fine_x0) / fine_dx));
    cplx rot = std::polar(1.0, -zeta * (fine_x0 + fine_dx * static_cast<double>(jlo)));
    const cplx step = std::polar(1.0, -zeta * fine_dx);
    cplx acc = 0.0;
    const std::vector<double>& h0 = deriv_[0];
    for (std::int64_t j = jlo; j <= jhi; ++j) {
        acc += h0[static_cast<size_t>(j)] * rot;
        rot *= step;
        if ((static_cast<std::uint64_t>(j - jlo) & 4095u) == 4095u) rot /= std::abs(rot);
    }
    return acc.real() * fine_dx; // h is even; the imaginary part is rounding
}

double GevreyBump::derivative_growth_constant(int limit) const {
    const int lim = std::min(limit, max_order_);
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a <= lim; ++a) {
        if (sup_[static_cast<size_t>(a)] <= 0.0) continue;
        const double c = (std::log(sup_[static_cast<size_t>(a)]) -
                          1.15 * theta_h_ * std::lgamma(static_cast<double>(a) + 1.0)) /
                         static_cast<double>(a + 1);
        best = std::max(best, c);
    }
    return std::exp(best);
}

std::shared_ptr<const GevreyBump> make_bump(double theta_h, BumpVariant variant, int max_order,
                                            std::int64_t fine_n) {
    if (!(theta_h > 1.0) || !(theta_h <= 4.0))
        throw ContractError(strf("bump theta_h = %g outside (1, 4]; compact support needs theta_h > 1", theta_h));
    if (max_order < 1 || max_order > 48)
        throw ContractError(strf("bump max_order = %d outside [1, 48]", max_order));
    if (fine_n < 4096)
        throw ContractError(strf("bump fine_n = %lld too small; need >= 4096", static_cast<long long>(fine_n)));

    auto bump = std::shared_ptr<GevreyBump>(new GevreyBump());
    bump->theta_h_ = theta_h;
    bump->variant_ = variant;
    bump->max_order_ = max_order;

    const Grid fg = make_grid(fine_n, 2.5); // x in [-1.25, 1.25)
    bump->fine_x0 = fg.node(0);
    bump->fine_dx = fg.spacing();
    bump->fine_n = fine_n;
    const double p = 1.0 / (theta_h - 1.0);

    std::vector<double> h0(static_cast<size_t>(fine_n), 0.0);
    double gen_mass = 0.0; // Int g over [-1,1] (plateau variant only)

    if (variant == BumpVariant::plateau) {
        // h = 1 on [-1/2,1/2], 0 outside (-1,1), normalised primitive of the
        // generator (evaluated at s = 3-4|x|) in between.  The mapped points
        // s_j are uniform, so the primitive is accumulated exactly on them
        // with per-interval Simpson (midpoint included): no interpolation.
        std::vector<std::int64_t> idx; // positive-side transition nodes, ascending x
        for (std::int64_t j = 0; j < fine_n; ++j) {
            const double x = fg.node(j);
            if (x > 0.5 && x < 1.0) idx.push_back(j);
        }
        std::vector<double> t;
        t.reserve(idx.size() + 2);
        t.push_back(-1.0);
        for (auto it = idx.rbegin(); it != idx.rend(); ++it) t.push_back(3.0 - 4.0 * fg.node(*it));
        t.push_back(1.0);
        std::vector<double> G(t.size(), 0.0);
        for (size_t i = 1; i < t.size(); ++i) {
            const double a = t[i - 1], b = t[i], w = b - a;
            G[i] = G[i - 1] + (w / 6.0) * (gen_bump(a, p) + 4.0 * gen_bump(0.5 * (a + b), p) + gen_bump(b, p));
        }
        const double mass = G.back();
        if (!(mass > 0.0)) throw NumericError("bump generator mass vanished");
        gen_mass = mass;
        std::vector<double> trans(static_cast<size_t>(fine_n), 0.0);
        for (size_t q = 0; q < idx.size(); ++q)
            trans[static_cast<size_t>(idx[q])] = G[idx.size() - q] / mass;
        for (std::int64_t j = 0; j < fine_n; ++j) {
            const double x = fg.node(j), ax = std::fabs(x);
            if (ax >= 1.0)
                h0[static_cast<size_t>(j)] = 0.0;
            else if (ax <= 0.5)
                h0[static_cast<size_t>(j)] = 1.0;
            else
                h0[static_cast<size_t>(j)] = (x > 0.0) ? trans[static_cast<size_t>(j)]
                                                       : trans[static_cast<size_t>(fine_n - j)];
        }
    } else {
        // Normalised autocorrelation of the generator, computed circularly on
        // [-2.5, 2.5) at the same spacing (support 2 < 2.5: no wraparound).
        // h(x) = (g*g)(2x)/(g*g)(0), so hhat = |ghat|^2 >= 0 pointwise.
        const std::int64_t ng = 2 * fine_n;
        std::vector<cplx> gs(static_cast<size_t>(ng)), sp(static_cast<size_t>(ng)),
            ac(static_cast<size_t>(ng));
        for (std::int64_t m = 0; m < ng; ++m)
            gs[static_cast<size_t>(m)] = gen_bump(-2.5 + bump->fine_dx * static_cast<double>(m), p);
        dft_raw(ng, gs.data(), sp.data(), -1);
        for (std::int64_t k = 0; k < ng; ++k) sp[static_cast<size_t>(k)] = std::norm(sp[static_cast<size_t>(k)]);
        dft_raw(ng, sp.data(), ac.data(), +1);
        const double r0 = ac[0].real() / static_cast<double>(ng);
        if (!(r0 > 0.0)) throw NumericError("bump autocorrelation peak vanished");
        bump->autocorr_peak = bump->fine_dx * r0;
        for (std::int64_t j = 0; j < fine_n; ++j) {
            const double x = fg.node(j);
            if (std::fabs(x) >= 1.0) continue;
            const std::int64_t l = ((2 * j - fine_n) % ng + ng) % ng;
            double v = ac[static_cast<size_t>(l)].real() / static_cast<double>(ng) / r0;
            if (v < 0.0) {
                if (v < -1e-12) throw NumericError(strf("autocorrelation went negative (%.3e) at x = %.6g", v, x));
                v = 0.0;
            }
            h0[static_cast<size_t>(j)] = v;
        }
        // keep the generator window for continuous-transform evaluation
        bool first = true;
        for (std::int64_t m = 0; m < ng; ++m) {
            const double tm = -2.5 + bump->fine_dx * static_cast<double>(m);
            if (std::fabs(tm) > 1.0) continue;
            if (first) { bump->g_x0 = tm; first = false; }
            bump->gsamp_.push_back(gs[static_cast<size_t>(m)].real());
        }
        bump->g_dx = bump->fine_dx;
    }

    bump->deriv_.assign(static_cast<size_t>(max_order) + 1, {});
    bump->sup_.assign(static_cast<size_t>(max_order) + 1, 0.0);
    for (double v : h0) bump->sup_[0] = std::max(bump->sup_[0], std::fabs(v));

    if (variant == BumpVariant::plateau) {
        // h^{(a)}(x) = (-+4)^a g^{(a-1)}(3 -+ 4x) / mass on the transition,
        // identically 0 on the plateau and outside the support: every order
        // comes from the generator jet at full relative precision.
        for (int a = 1; a <= max_order; ++a)
            bump->deriv_[static_cast<size_t>(a)].assign(static_cast<size_t>(fine_n), 0.0);
        std::vector<double> U(static_cast<size_t>(max_order)); // g jet, orders 0..max_order-1
        std::vector<double> fact(static_cast<size_t>(max_order), 1.0);
        for (size_t k = 1; k < fact.size(); ++k) fact[k] = fact[k - 1] * static_cast<double>(k);
        for (std::int64_t j = 0; j < fine_n; ++j) {
            const double x = fg.node(j), ax = std::fabs(x);
            if (ax >= 1.0 || ax <= 0.5) continue;
            gen_jet(3.0 - 4.0 * ax, p, max_order - 1, U.data());
            double pw = 1.0;
            for (int a = 1; a <= max_order; ++a) {
                pw *= (x > 0.0) ? -4.0 : 4.0;
                bump->deriv_[static_cast<size_t>(a)][static_cast<size_t>(j)] =
                    pw * fact[static_cast<size_t>(a - 1)] * U[static_cast<size_t>(a - 1)] / gen_mass;
            }
        }
        for (int a = 1; a <= max_order; ++a) {
            double sup = 0.0;
            for (double v : bump->deriv_[static_cast<size_t>(a)]) sup = std::max(sup, std::fabs(v));
            if (!(sup > 0.0)) throw NumericError(strf("bump derivative order %d vanished", a));
            bump->sup_[static_cast<size_t>(a)] = sup;
        }
    } else {
        // FFT spectral differentiation.  Coefficients below 1e-13 of the peak
        // are zeroed: they sit at/below the FFT rounding floor and would be
        // amplified by xi^alpha into garbage.  The cut itself limits how many
        // orders are recoverable in doubles (about 6 at the guard below, for
        // any fine_n), which is plenty for this variant's use.
        Field hf = make_field(fg);
        for (std::int64_t j = 0; j < fine_n; ++j)
            hf.v[static_cast<size_t>(j)] = h0[static_cast<size_t>(j)];
        Spectrum H = forward_transform(hf);
        double hm = 0.0;
        for (const cplx& c : H.v) hm = std::max(hm, std::abs(c));
        for (cplx& c : H.v)
            if (std::abs(c) < 1e-13 * hm) c = 0.0;
        Spectrum Dk = H;
        for (int alpha = 1; alpha <= max_order; ++alpha) {
            for (std::int64_t k = 0; k < fine_n; ++k)
                Dk.v[static_cast<size_t>(k)] *= cplx(0.0, fg.freq(k));
            const Field d = inverse_transform(Dk);
            std::vector<double> tab(static_cast<size_t>(fine_n));
            double sup = 0.0, noise = 0.0;
            for (std::int64_t j = 0; j < fine_n; ++j) {
                const double v = d.v[static_cast<size_t>(j)].real();
                tab[static_cast<size_t>(j)] = v;
                sup = std::max(sup, std::fabs(v));
                const double ax = std::fabs(fg.node(j));
                if (ax >= 1.05 && ax <= 1.2) noise = std::max(noise, std::fabs(v)); // true value: 0
            }
            if (!(sup > 0.0) || noise > 1e-6 * sup)
                throw NumericError(strf("bump derivative order %d: noise floor %.2e vs sup %.2e exceeds "
                                        "1e-6; pos_fourier derivatives are FFT-based and only reliable to "
                                        "about order 6 in double precision -- lower max_order",
                                        alpha, noise, sup));
            bump->sup_[static_cast<size_t>(alpha)] = sup;
            bump->deriv_[static_cast<size_t>(alpha)] = std::move(tab);
        }
    }
    bump->deriv_[0] = std::move(h0);
    return bump;
}

// --- standard datum ---------------------------------------------------------

double phi_hat(double xi, double rho0, double theta) {
    const double a = 2.0 * rho0 * std::pow(bracket(xi), 1.0 / theta);
    return (a > 700.0) ? 0.0 : std::exp(-a);
}

double snap_to_cell(const Grid& g, double x) {
    return std::round(x / g.spacing()) * g.spacing();
}

namespace {
const GevreyBump* default_taper() {
    static const std::shared_ptr<const GevreyBump> b =
        make_bump(1.5, BumpVariant::plateau, 1, 1 << 14);
    return b.get();
}
} // namespace

PreparedDatum make_phi(const Grid& g, const DatumSpec& spec0, const GevreyBump* taper_bump) {
    DatumSpec spec = spec0;
    if (!(spec.rho0 > 0.0) || !std::isfinite(spec.rho0))
        throw ContractError(strf("datum rho0 = %g must be finite and > 0", spec.rho0));
    if (!(spec.theta > 1.0))
        throw ContractError(strf("datum theta = %g must be > 1", spec.theta));
    if (spec.taper_start < 0.0 || (spec.taper_start > 0.0 && !(spec.taper_end > spec.taper_start && spec.taper_end <= 1.0)))
        throw ContractError(strf("datum taper [%g, %g] must satisfy 0 < start < end <= 1 (or start = 0: disabled)",
                                 spec.taper_start, spec.taper_end));
    const double h = g.spacing();
    const double cells = spec.center / h;
    if (std::fabs(cells - std::round(cells)) > 1e-9)
        throw ContractError(strf("datum center %.9g is not an integer multiple of the grid spacing %.9g; "
                                 "use snap_to_cell",
                                 spec.center, h));
    spec.center = std::round(cells) * h;
    if (std::fabs(spec.center) > 0.5 * g.length)
        throw ContractError(strf("datum center %.6g outside the domain [-%g, %g)", spec.center,
                                 0.5 * g.length, 0.5 * g.length));
    const GevreyBump* tb = taper_bump ? taper_bump : (spec.taper_start > 0.0 ? default_taper() : nullptr);

    Spectrum s = make_spectrum(g);
    const double ximax = g.max_abs_freq();
    for (std::int64_t k = 0; k < g.n; ++k) {
        const double xi = g.freq(k);
        double v = phi_hat(xi, spec.rho0, spec.theta);
        if (v != 0.0 && spec.taper_start > 0.0) {
            const double u = std::fabs(xi) / ximax;
            if (u >= spec.taper_end)
                v = 0.0;
            else if (u > spec.taper_start)
                v *= tb->eval(0, 0.5 + 0.5 * (u - spec.taper_start) / (spec.taper_end - spec.taper_start));
        }
        s.v[static_cast<size_t>(k)] = (v == 0.0) ? cplx(0.0) : std::polar(v, -spec.center * xi);
    }
    Field f = inverse_transform(s);

    double mx = 0.0, mi = 0.0;
    for (const cplx& c : f.v) {
        mx = std::max(mx, std::abs(c));
        mi = std::max(mi, std::fabs(c.imag()));
    }
    if (!(mx > 0.0)) throw NumericError("datum vanished: rho0/theta place all mass below the underflow cutoff");
    if (mi > 1e-12 * mx)
        throw NumericError(strf("datum imaginary residue %.2e exceeds 1e-12 of max %.2e", mi, mx));

    const std::int64_t W = std::max<std::int64_t>(2, g.n / 1024);
    double btail = 0.0;
    for (std::int64_t j = 0; j < W; ++j) {
        btail = std::max(btail, std::abs(f.v[static_cast<size_t>(j)]));
        btail = std::max(btail, std::abs(f.v[static_cast<size_t>(g.n - 1 - j)]));
    }
    const double r = btail / mx;
    if (r > 1e-14) {
        const double D = 0.5 * g.length - std::fabs(spec.center);
        double sug = 4.0 * g.length;
        if (r < 1.0 && D > 0.0) {
            const double kappa = std::log(1.0 / r) / D;
            sug = g.length + 2.0 * std::log(r / 1e-14) / kappa;
        }
        throw ContractError(strf("datum tail at the domain boundary is %.2e of max (tolerance 1e-14); "
                                 "increase the domain length to roughly %.0f",
                                 r, sug));
    }
    return PreparedDatum{std::move(f), std::move(s), spec};
}

} // namespace pevo
