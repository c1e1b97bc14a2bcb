#ifndef PEVO_TEST_ORACLES_HPP
#define PEVO_TEST_ORACLES_HPP

// Independent numerical oracles for tests.  Nothing here goes through the
// library's transform or operator paths: quadrature is plain adaptive
// Simpson, dense linear algebra is written out longhand.

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace oracle {

// Adaptive Simpson on [a,b] with absolute tolerance tol.
inline double simpson_rec(const std::function<double(double)>& f, double a, double b,
                          double fa, double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

// Dense complex matvec: y = M x, M row-major n x n.
inline std::vector<std::complex<double>> matvec(const std::vector<std::complex<double>>& M,
                                                const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> y(n);
    for (std::size_t r = 0; r < n; ++r) {
        std::complex<double> acc = 0.0;
        const std::complex<double>* row = &M[r * n];
        for (std::size_t c = 0; c < n; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
    return y;
}

// Dense complex matmul: C = A B, row-major n x n.
inline std::vector<std::complex<double>> matmul(const std::vector<std::complex<double>>& A,
                                                const std::vector<std::complex<double>>& B,
                                                std::size_t n) {
    std::vector<std::complex<double>> C(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            const std::complex<double> a = A[i * n + k];
            if (a == std::complex<double>(0.0)) continue;
            for (std::size_t j = 0; j < n; ++j) C[i * n + j] += a * B[k * n + j];
        }
    return C;
}

// Minimal XML well-formedness check: tag stack balance, quoted attributes not
// validated.  Good enough to catch malformed SVG output.
inline bool xml_well_formed(const std::string& s) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    // optional <?xml ...?> prolog and comments are skipped by the scanner below
    while (i < s.size()) {
        if (s[i] != '<') { ++i; continue; }
        if (s.compare(i, 4, "<?xm") == 0 || s.compare(i, 2, "<?") == 0) {
            auto e = s.find("?>", i);
            if (e == std::string::npos) return false;
            i = e + 2; continue;
        }
        if (s.compare(i, 4, "<!--") == 0) {
            auto e = s.find("-->", i);
            if (e == std::string::npos) return false;
            i = e + 3; continue;
        }
        auto e = s.find('>', i);
        if (e == std::string::npos) return false;
        std::string tag = s.substr(i + 1, e - i - 1);
        i = e + 1;
        if (tag.empty()) return false;
        if (tag.back() == '/') continue;            // self-closing
        if (tag[0] == '/') {                        // closing
            std::string name = tag.substr(1);
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else {                                    // opening
            auto sp = tag.find_first_of(" \t\r\n");
            stack.push_back(tag.substr(0, sp));
        }
    }
    return stack.empty();
}

} // namespace oracle

#endif
