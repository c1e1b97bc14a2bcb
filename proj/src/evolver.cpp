#include "pevo/evolver.hpp"

#include "pevo/errors.hpp"
#include "pevo/symbol.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pevo {

double log_l2_norm(const EvolutionState& s) {
    return std::log(l2_norm(s.field)) + s.log_scale;
}

namespace {

double radius_of(const SampledSymbol& sym, double xi_cutoff) {
    double r = 0.0;
    for (const auto& t : sym.terms) {
        double xmax = 0.0, ximax = 0.0;
        for (const auto& a : t.xprof) xmax = std::max(xmax, std::abs(a));
        for (std::int64_t k = 0; k < sym.grid.n; ++k)
            if (xi_cutoff <= 0.0 || std::abs(sym.grid.freq(k)) <= xi_cutoff)
                ximax = std::max(ximax, std::abs(t.xiprof[static_cast<size_t>(k)]));
        r += xmax * ximax;
    }
    return r;
}

// Spectral stepping engine.  Holds the sampled lower symbol, the principal
// phase table for the current substep size, and reusable scratch buffers.
class Engine {
  public:
    Engine(const ModelOperator& op, const Grid& g, double xi_cutoff)
        : g_(g), sym_(lower_symbol(op, g)), cutoff_(xi_cutoff) {
        const auto n = static_cast<size_t>(g.n);
        xi_p_.resize(n);
        for (std::int64_t k = 0; k < g.n; ++k)
            xi_p_[static_cast<size_t>(k)] =
                op.a_p * std::pow(g.freq(k), static_cast<double>(op.p));
        keep_.assign(n, 1);
        if (cutoff_ > 0.0)
            for (std::int64_t k = 0; k < g.n; ++k)
                keep_[static_cast<size_t>(k)] = std::abs(g.freq(k)) <= cutoff_ ? 1 : 0;
        tmp_.resize(n); y_.resize(n); acc_.resize(n);
        stage_.resize(n); slope_.resize(n); sum_.resize(n);
        ph_half_.resize(n); ph_full_.resize(n);
    }

    double radius() const { return radius_of(sym_, cutoff_); }

    void mask(std::vector<cplx>& u) const {
        if (cutoff_ <= 0.0) return;
        for (size_t k = 0; k < u.size(); ++k)
            if (!keep_[k]) u[k] = cplx(0.0, 0.0);
    }

    // One integrating-factor RK4 step of size dt on the grid-order spectrum.
    void ifrk4(std::vector<cplx>& u, double dt) {
        set_dt(dt);
        const auto n = static_cast<size_t>(g_.n);
        nop(u, slope_); // k1
        for (size_t k = 0; k < n; ++k) {
            sum_[k] = u[k] + (dt / 6.0) * slope_[k];
            stage_[k] = (u[k] + (0.5 * dt) * slope_[k]) * ph_half_[k];
        }
        nop(stage_, slope_); // k2 (in rotated frame)
        for (size_t k = 0; k < n; ++k) {
            slope_[k] *= std::conj(ph_half_[k]);
            sum_[k] += (dt / 3.0) * slope_[k];
            stage_[k] = (u[k] + (0.5 * dt) * slope_[k]) * ph_half_[k];
        }
        nop(stage_, slope_); // k3
        for (size_t k = 0; k < n; ++k) {
            slope_[k] *= std::conj(ph_half_[k]);
            sum_[k] += (dt / 3.0) * slope_[k];
            stage_[k] = (u[k] + dt * slope_[k]) * ph_full_[k];
        }
        nop(stage_, slope_); // k4
        for (size_t k = 0; k < n; ++k) {
            sum_[k] += (dt / 6.0) * (slope_[k] * std::conj(ph_full_[k]));
            u[k] = ph_full_[k] * sum_[k];
        }
        mask(u);
    }

  private:
    void set_dt(double dt) {
        if (dt == ph_dt_) return;
        for (size_t k = 0; k < ph_half_.size(); ++k) {
            ph_half_[k] = std::polar(1.0, -xi_p_[k] * (0.5 * dt));
            ph_full_[k] = std::polar(1.0, -xi_p_[k] * dt);
        }
        ph_dt_ = dt;
    }

    // out = -i * F[ sum_j a_{p-j}(x) * F^{-1}[ xi^{p-j} uhat ] ], the lower
    // part of the generator on a grid-order spectrum.
    void nop(const std::vector<cplx>& uhat, std::vector<cplx>& out) {
        const auto n = static_cast<size_t>(g_.n);
        if (sym_.terms.empty()) {
            std::fill(out.begin(), out.end(), cplx(0.0, 0.0));
            return;
        }
        std::fill(acc_.begin(), acc_.end(), cplx(0.0, 0.0));
        const double inv_len = 1.0 / g_.length;
        for (const auto& t : sym_.terms) {
            for (size_t k = 0; k < n; ++k) {
                const double sgn = (k & 1) ? -1.0 : 1.0; // x_0 = -L/2 offset
                tmp_[k] = sgn * t.xiprof[k] * uhat[k];
            }
            dft_raw(g_.n, tmp_.data(), y_.data(), +1);
            for (size_t m = 0; m < n; ++m) acc_[m] += t.xprof[m] * (y_[m] * inv_len);
        }
        dft_raw(g_.n, acc_.data(), tmp_.data(), -1);
        const double h = g_.spacing();
        for (size_t k = 0; k < n; ++k) {
            const double sgn = (k & 1) ? -h : h;
            const cplx z = sgn * tmp_[k];
            out[k] = cplx(z.imag(), -z.real()); // multiply by -i
        }
        if (cutoff_ > 0.0)
            for (size_t k = 0; k < n; ++k)
                if (!keep_[k]) out[k] = cplx(0.0, 0.0);
    }

    Grid g_;
    SampledSymbol sym_;
    double cutoff_;
    std::vector<double> xi_p_;
    std::vector<char> keep_;
    std::vector<cplx> tmp_, y_, acc_, stage_, slope_, sum_;
    std::vector<cplx> ph_half_, ph_full_;
    double ph_dt_ = -1.0;
};

double spectral_norm(const std::vector<cplx>& u, double length) {
    double s = 0.0;
    for (const auto& z : u) s += std::norm(z);
    return std::sqrt(s / length);
}

double resolve_dt(double requested, double radius, double span) {
    if (requested > 0.0) {
        if (requested * radius > 0.1 * (1.0 + 1e-12))
            throw ContractError("dt = " + std::to_string(requested) +
                                " violates dt * stability_radius <= 0.1 (radius = " +
                                std::to_string(radius) + "); reduce dt or enable xi_cutoff");
        return requested;
    }
    if (radius > 0.0) return 0.1 / radius;
    if (span > 0.0) return span; // free propagation is exact at any step
    throw ContractError("dt must be positive when there is nothing to integrate over");
}

void check_options(const EvolutionState& init, const SolveOptions& opts) {
    if (!(opts.t_end >= init.time))
        throw ContractError("t_end = " + std::to_string(opts.t_end) +
                            " precedes the state's time " + std::to_string(init.time));
    if (opts.renormalize_every < 1)
        throw ContractError("renormalize_every = " + std::to_string(opts.renormalize_every) +
                            " must be >= 1");
    double prev = init.time;
    for (double r : opts.record_times) {
        if (!(r >= prev))
            throw ContractError("record_times must be nondecreasing and start no earlier "
                                "than the state's time");
        if (!(r <= opts.t_end))
            throw ContractError("record time " + std::to_string(r) + " exceeds t_end");
        prev = r;
    }
    if (static_cast<std::int64_t>(init.field.v.size()) != init.field.grid.n)
        throw ContractError("state field length does not match its grid");
}

} // namespace

double stability_radius(const ModelOperator& op, const Grid& g, double xi_cutoff) {
    return radius_of(lower_symbol(op, g), xi_cutoff);
}

EvolutionState step(const EvolutionState& s, const ModelOperator& op, const SolveOptions& opts) {
    Engine eng(op, s.field.grid, opts.xi_cutoff);
    const double dt = resolve_dt(opts.dt, eng.radius(), 0.0);
    Spectrum u = forward_transform(s.field);
    eng.mask(u.v);
    eng.ifrk4(u.v, dt);

    EvolutionState out;
    out.log_scale = s.log_scale;
    out.time = s.time + dt;
    const double nrm = spectral_norm(u.v, s.field.grid.length);
    if (!std::isfinite(nrm))
        throw NumericError("field norm became non-finite after one step; use a smaller dt");
    if (nrm > 0.0 && (nrm < 0.5 || nrm > 2.0)) {
        out.log_scale += std::log(nrm);
        for (auto& z : u.v) z *= 1.0 / nrm;
    }
    out.field = inverse_transform(u);
    return out;
}

SolveResult solve(const EvolutionState& init, const ModelOperator& op, const SolveOptions& opts) {
    check_options(init, opts);
    const Grid& g = init.field.grid;

    if (opts.t_end == init.time && opts.record_times.empty() && opts.xi_cutoff <= 0.0)
        return SolveResult{init, {}};

    Engine eng(op, g, opts.xi_cutoff);
    const double span_total = opts.t_end - init.time;
    const double dt = span_total > 0.0 ? resolve_dt(opts.dt, eng.radius(), span_total) : 1.0;

    Spectrum u = forward_transform(init.field);
    eng.mask(u.v);
    double log_scale = init.log_scale;
    double t = init.time;
    std::int64_t steps_taken = 0;

    auto norm_check = [&](const char* when) {
        const double nrm = spectral_norm(u.v, g.length);
        if (!std::isfinite(nrm))
            throw NumericError(std::string("field norm became non-finite ") + when +
                               "; use a smaller dt");
        if (nrm > 0.0 && (nrm < 0.5 || nrm > 2.0)) {
            log_scale += std::log(nrm);
            for (auto& z : u.v) z *= 1.0 / nrm;
        }
    };

    auto march_to = [&](double target) {
        const double span = target - t;
        if (span <= 0.0) { t = target; return; }
        const auto m = std::max<std::int64_t>(
            1, static_cast<std::int64_t>(std::ceil(span / dt * (1.0 - 1e-12))));
        const double dtn = span / static_cast<double>(m);
        for (std::int64_t i = 0; i < m; ++i) {
            eng.ifrk4(u.v, dtn);
            ++steps_taken;
            if (steps_taken % opts.renormalize_every == 0)
                norm_check("during the march");
        }
        t = target; // land exactly, no accumulated sum of substeps
    };

    auto capture = [&](double at) {
        EvolutionState st;
        st.field = inverse_transform(u);
        st.log_scale = log_scale;
        st.time = at;
        return st;
    };

    SolveResult res;
    for (double r : opts.record_times) {
        march_to(r);
        res.recorded.push_back(capture(r));
    }
    march_to(opts.t_end);
    norm_check("at the final time");
    res.final_state = capture(opts.t_end);
    return res;
}

SolveResult oracle_solve(const EvolutionState& init, const ModelOperator& op,
                         const SolveOptions& opts) {
    check_options(init, opts);
    const Grid& g = init.field.grid;
    const auto n = static_cast<size_t>(g.n);
    if (g.n > 256)
        throw ContractError("oracle_solve is dense and guarded to n <= 256, got n = " +
                            std::to_string(g.n));

    // dense generator on grid-order spectra, row-major
    std::vector<cplx> gen(n * n, cplx(0.0, 0.0));
    if (!op.lower.empty()) {
        const SampledSymbol low = lower_symbol(op, g);
        for (size_t c = 0; c < n; ++c) {
            Spectrum e = make_spectrum(g);
            e.v[c] = cplx(1.0, 0.0);
            const Spectrum col = forward_transform(apply(low, inverse_transform(e)));
            for (size_t r = 0; r < n; ++r)
                gen[r * n + c] = cplx(0.0, -1.0) * col.v[r];
        }
    }
    for (size_t k = 0; k < n; ++k)
        gen[k * n + k] += cplx(0.0, -op.a_p * std::pow(g.freq(static_cast<std::int64_t>(k)),
                                                       static_cast<double>(op.p)));
    std::vector<char> keep(n, 1);
    if (opts.xi_cutoff > 0.0) {
        for (size_t k = 0; k < n; ++k)
            keep[k] = std::abs(g.freq(static_cast<std::int64_t>(k))) <= opts.xi_cutoff ? 1 : 0;
        for (size_t r = 0; r < n; ++r)
            for (size_t c = 0; c < n; ++c)
                if (!keep[r] || !keep[c]) gen[r * n + c] = cplx(0.0, 0.0);
    }

    std::vector<cplx> u0 = forward_transform(init.field).v;
    for (size_t k = 0; k < n; ++k)
        if (!keep[k]) u0[k] = cplx(0.0, 0.0);

    std::vector<cplx> k1(n), k2(n), k3(n), k4(n), st(n);
    auto matvec = [&](const std::vector<cplx>& x, std::vector<cplx>& out) {
        for (size_t r = 0; r < n; ++r) {
            cplx s(0.0, 0.0);
            const cplx* row = &gen[r * n];
            for (size_t c = 0; c < n; ++c) s += row[c] * x[c];
            out[r] = s;
        }
    };
    auto rk4 = [&](std::vector<cplx>& u, double dt) {
        matvec(u, k1);
        for (size_t i = 0; i < n; ++i) st[i] = u[i] + (0.5 * dt) * k1[i];
        matvec(st, k2);
        for (size_t i = 0; i < n; ++i) st[i] = u[i] + (0.5 * dt) * k2[i];
        matvec(st, k3);
        for (size_t i = 0; i < n; ++i) st[i] = u[i] + dt * k3[i];
        matvec(st, k4);
        for (size_t i = 0; i < n; ++i)
            u[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    };

    // integrate the whole span with m equal-rate steps, landing on records
    auto run = [&](std::int64_t m, SolveResult& res) {
        std::vector<cplx> u = u0;
        double t = init.time;
        const double total = std::max(opts.t_end - init.time, 0.0);
        auto seg = [&](double target) {
            const double span = target - t;
            if (span <= 0.0) { t = target; return; }
            const double want = total > 0.0 ? span / total * static_cast<double>(m) : 1.0;
            const auto ms = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(want)));
            const double dtn = span / static_cast<double>(ms);
            for (std::int64_t i = 0; i < ms; ++i) rk4(u, dtn);
            t = target;
        };
        res.recorded.clear();
        for (double r : opts.record_times) {
            seg(r);
            EvolutionState stt;
            stt.field = inverse_transform(Spectrum{g, u});
            stt.log_scale = init.log_scale;
            stt.time = r;
            res.recorded.push_back(std::move(stt));
        }
        seg(opts.t_end);
        EvolutionState fin;
        fin.field = inverse_transform(Spectrum{g, u});
        fin.log_scale = init.log_scale;
        fin.time = opts.t_end;
        res.final_state = std::move(fin);
        return u;
    };

    SolveResult res;
    std::vector<cplx> prev = run(16, res);
    for (std::int64_t m = 32; m <= (std::int64_t{1} << 22); m *= 2) {
        std::vector<cplx> cur = run(m, res);
        double diff = 0.0, scale = 0.0;
        for (size_t i = 0; i < n; ++i) {
            diff += std::norm(cur[i] - prev[i]);
            scale += std::norm(cur[i]);
        }
        if (std::isfinite(diff) && std::isfinite(scale) &&
            diff <= 1e-18 * std::max(scale, 1e-300))
            return res;
        prev = std::move(cur);
    }
    throw NumericError("oracle_solve: step halving did not converge to 1e-9; "
                       "the time span or operator is too stiff for the dense reference");
}

} // namespace pevo
