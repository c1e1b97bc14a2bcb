#include "pevo/grid.hpp"
#include "pevo/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace pevo {

Grid make_grid(std::int64_t n, double length) {
    if (n < 16 || (n & (n - 1)) != 0)
        throw ContractError("make_grid: n must be a power of two >= 16, got " + std::to_string(n));
    if (!(length > 0.0) || !std::isfinite(length))
        throw ContractError("make_grid: length must be positive and finite");
    return Grid{n, length};
}

Field make_field(const Grid& g) { return Field{g, std::vector<cplx>(static_cast<size_t>(g.n))}; }
Spectrum make_spectrum(const Grid& g) { return Spectrum{g, std::vector<cplx>(static_cast<size_t>(g.n))}; }

namespace {

// FFTW plan cache.  Plans are created once per (n, sign) with FFTW_ESTIMATE
// (deterministic algorithm choice) and FFTW_UNALIGNED (so they can be executed
// on any buffer via fftw_execute_dft).  Plan creation is not thread-safe in
// FFTW, execution is; hence the mutex around cache fills only.
struct PlanCache {
    std::mutex mu;
    std::map<std::pair<std::int64_t, int>, fftw_plan> plans;

    fftw_plan get(std::int64_t n, int sign) {
        std::scoped_lock lk(mu);
        auto key = std::make_pair(n, sign);
        auto it = plans.find(key);
        if (it != plans.end()) return it->second;
        std::vector<cplx> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n),
                                       reinterpret_cast<fftw_complex*>(a.data()),
                                       reinterpret_cast<fftw_complex*>(b.data()),
                                       sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans.emplace(key, p);
        return p;
    }
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

} // namespace

void dft_raw(std::int64_t n, const cplx* in, cplx* out, int sign) {
    fftw_plan p = cache().get(n, sign);
    fftw_execute_dft(p,
                     reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

Spectrum forward_transform(const Field& f) {
    const auto n = f.grid.n;
    if (static_cast<std::int64_t>(f.v.size()) != n)
        throw ContractError("forward_transform: field size does not match grid");
    Spectrum s{f.grid, std::vector<cplx>(static_cast<size_t>(n))};
    dft_raw(n, f.v.data(), s.v.data(), -1);
    // uhat[k] = h * (-1)^k * DFT[k]; the (-1)^k carries the -L/2 grid offset.
    const double h = f.grid.spacing();
    for (std::int64_t k = 0; k < n; ++k)
        s.v[static_cast<size_t>(k)] *= (k & 1) ? -h : h;
    return s;
}

Field inverse_transform(const Spectrum& s) {
    const auto n = s.grid.n;
    if (static_cast<std::int64_t>(s.v.size()) != n)
        throw ContractError("inverse_transform: spectrum size does not match grid");
    std::vector<cplx> tmp(static_cast<size_t>(n));
    for (std::int64_t k = 0; k < n; ++k)
        tmp[static_cast<size_t>(k)] = (k & 1) ? -s.v[static_cast<size_t>(k)] : s.v[static_cast<size_t>(k)];
    Field f{s.grid, std::vector<cplx>(static_cast<size_t>(n))};
    dft_raw(n, tmp.data(), f.v.data(), +1);
    const double inv_l = 1.0 / s.grid.length;
    for (auto& z : f.v) z *= inv_l;
    return f;
}

namespace {
// max-scaled sum of squares: immune to under/overflow of |z|^2, so the norm
// is zero iff every sample is zero
double scaled_sumsq(const std::vector<cplx>& v, double* scale_out) {
    double mx = 0.0;
    for (const auto& z : v) mx = std::max({mx, std::fabs(z.real()), std::fabs(z.imag())});
    *scale_out = mx;
    if (mx == 0.0) return 0.0;
    double acc = 0.0;
    for (const auto& z : v) {
        const double re = z.real() / mx, im = z.imag() / mx;
        acc += re * re + im * im;
    }
    return acc;
}
} // namespace

double l2_norm(const Field& f) {
    double mx = 0.0;
    const double acc = scaled_sumsq(f.v, &mx);
    return mx * std::sqrt(acc * f.grid.spacing());
}

double l2_norm(const Spectrum& s) {
    double mx = 0.0;
    const double acc = scaled_sumsq(s.v, &mx);
    return mx * std::sqrt(acc / s.grid.length);
}

} // namespace pevo
