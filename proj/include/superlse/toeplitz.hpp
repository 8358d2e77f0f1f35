#pragma once

// Hermitian positive definite Toeplitz matrices: Gohberg-Semencul
// decomposition (Levinson-Durbin or divide-and-conquer generalized Schur),
// fast inverse application, log-determinant and weighted diagonal sums of
// the inverse.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"

namespace superlse {

class HermitianToeplitz {
public:
    explicit HermitianToeplitz(CVector first_column) : c_(std::move(first_column)) {
        if (c_.empty()) throw DimensionMismatch("Toeplitz matrix must have N >= 1");
        const double c0 = c_[0].real();
        if (!(c0 > 0.0) || !std::isfinite(c0))
            throw NotPositiveDefinite("c_0 must be real and strictly positive");
        if (std::abs(c_[0].imag()) > 1e-12 * c0)
            throw NotPositiveDefinite("c_0 must be real");
        c_[0] = cplx(c0, 0.0);
    }

    std::size_t size() const { return c_.size(); }
    std::span<const cplx> first_column() const { return c_; }

    // Entry (i, j); c_{-m} = conj(c_m).
    cplx operator()(std::size_t i, std::size_t j) const {
        return i >= j ? c_[i - j] : std::conj(c_[j - i]);
    }

private:
    CVector c_;
};

// rho = C^{-1} e_{N-1} / [C^{-1}]_{N-1,N-1}, so rho[N-1] == 1.
// delta[i] is the i-th prediction error; delta[N-1] = 1 / [C^{-1}]_{N-1,N-1}.
struct GSDecomposition {
    CVector rho;
    std::vector<double> delta;

    std::size_t size() const { return rho.size(); }
};

enum class ToeplitzSolver { Auto, Levinson, Schur };

inline constexpr std::size_t kLevinsonMaxSize = 256;
inline constexpr double kPivotTolerance = 1e-13;

namespace detail {

inline void check_pivot(double delta, double c0, std::size_t n) {
    if (!(delta > kPivotTolerance * c0) || !std::isfinite(delta))
        throw NotPositiveDefinite("pivot " + std::to_string(n) + " is " + std::to_string(delta));
}

}  // namespace detail

inline GSDecomposition levinson_durbin(const HermitianToeplitz& t) {
    const std::size_t n = t.size();
    auto c = t.first_column();
    const double c0 = c[0].real();
    CVector a{cplx(1.0)};
    a.reserve(n);
    GSDecomposition out;
    out.delta.reserve(n);
    double eps = c0;
    out.delta.push_back(eps);
    CVector tmp;
    for (std::size_t m = 0; m + 1 < n; ++m) {
        cplx acc(0.0);
        for (std::size_t j = 0; j <= m; ++j) acc += c[m + 1 - j] * a[j];
        const cplx k = -acc / eps;
        tmp.assign(a.begin(), a.end());
        a.push_back(cplx(0.0));
        for (std::size_t j = 1; j <= m + 1; ++j) a[j] += k * std::conj(tmp[m + 1 - j]);
        eps *= (1.0 - std::abs(k)) * (1.0 + std::abs(k));
        detail::check_pivot(eps, c0, m + 1);
        out.delta.push_back(eps);
    }
    out.rho.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.rho[i] = std::conj(a[n - 1 - i]);
    out.rho[n - 1] = cplx(1.0);
    return out;
}

namespace detail {

// 2x2 matrix of polynomials in z, stored as coefficient vectors.
struct PolyMat2 {
    std::array<CVector, 4> e;  // 00, 01, 10, 11
    CVector& at(int i, int j) { return e[2 * i + j]; }
    const CVector& at(int i, int j) const { return e[2 * i + j]; }
};

inline PolyMat2 poly_identity() {
    PolyMat2 m;
    m.at(0, 0) = {cplx(1.0)};
    m.at(0, 1) = {cplx(0.0)};
    m.at(1, 0) = {cplx(0.0)};
    m.at(1, 1) = {cplx(1.0)};
    return m;
}

// A * B for 2x2 polynomial matrices.
inline PolyMat2 poly_matmul(const PolyMat2& a, const PolyMat2& b) {
    std::size_t da = 0, db = 0;
    for (const auto& x : a.e) da = std::max(da, x.size());
    for (const auto& x : b.e) db = std::max(db, x.size());
    const std::size_t full = da + db - 1;
    PolyMat2 out;
    if (da * db <= 4096) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                CVector r(full, cplx(0.0));
                for (int l = 0; l < 2; ++l) {
                    const auto& x = a.at(i, l);
                    const auto& y = b.at(l, j);
                    for (std::size_t p = 0; p < x.size(); ++p)
                        for (std::size_t q = 0; q < y.size(); ++q) r[p + q] += x[p] * y[q];
                }
                out.at(i, j) = std::move(r);
            }
        return out;
    }
    const std::size_t len = fft::next_pow2(full);
    std::array<CVector, 4> fa, fb;
    for (int i = 0; i < 4; ++i) {
        fa[i] = fft::padded(a.e[i], len);
        fb[i] = fft::padded(b.e[i], len);
        fft::forward(fa[i]);
        fft::forward(fb[i]);
    }
    const double scale = 1.0 / static_cast<double>(len);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            CVector r(len);
            for (std::size_t p = 0; p < len; ++p)
                r[p] = fa[2 * i][p] * fb[j][p] + fa[2 * i + 1][p] * fb[2 + j][p];
            fft::backward(r);
            r.resize(full);
            for (auto& x : r) x *= scale;
            out.at(i, j) = std::move(r);
        }
    return out;
}

// Divide-and-conquer Schur recursion on the normalised generator pair (u, v)
// of the displacement representation.  Each step n has the polynomial
// transfer matrix (1/s) [[z, -conj(k) z], [-k, 1]] with k = v_n / u_n.  The
// matching Levinson step [[1, kl z], [conj(kl), z]] with kl = -k is
// accumulated alongside to produce rho.
class SchurRecursion {
public:
    SchurRecursion(std::size_t n, double c0, std::size_t leaf) : n_(n), c0_(c0), leaf_(leaf) {
        delta_.resize(n);
    }

    // Processes steps [lo, hi) using the generator coefficients u, v at
    // absolute indices [lo, hi).  Returns the Levinson transfer matrix and,
    // when want_theta is set, the Schur transfer matrix.
    void solve(std::size_t lo, std::size_t hi, CVector u, CVector v, bool want_theta,
               PolyMat2* theta, PolyMat2& lambda) {
        const std::size_t m = hi - lo;
        if (m <= leaf_) {
            leaf_solve(lo, hi, std::move(u), std::move(v), want_theta, theta, lambda);
            return;
        }
        const std::size_t mid = lo + (m + 1) / 2;
        const std::size_t ml = mid - lo;
        PolyMat2 theta_l, lambda_l;
        solve(lo, mid, CVector(u.begin(), u.begin() + ml), CVector(v.begin(), v.begin() + ml),
              true, &theta_l, lambda_l);

        // Apply the left transfer matrix to the full segment; keep [mid, hi).
        std::size_t deg = 0;
        for (const auto& x : theta_l.e) deg = std::max(deg, x.size());
        const std::size_t len = fft::next_pow2(m + deg);
        CVector fu = fft::padded(u, len), fv = fft::padded(v, len);
        fft::forward(fu);
        fft::forward(fv);
        std::array<CVector, 4> ft;
        for (int i = 0; i < 4; ++i) {
            ft[i] = fft::padded(theta_l.e[i], len);
            fft::forward(ft[i]);
        }
        CVector nu(len), nv(len);
        for (std::size_t p = 0; p < len; ++p) {
            nu[p] = ft[0][p] * fu[p] + ft[1][p] * fv[p];
            nv[p] = ft[2][p] * fu[p] + ft[3][p] * fv[p];
        }
        fft::backward(nu);
        fft::backward(nv);
        const double scale = 1.0 / static_cast<double>(len);
        CVector ur(hi - mid), vr(hi - mid);
        for (std::size_t j = 0; j < hi - mid; ++j) {
            ur[j] = nu[ml + j] * scale;
            vr[j] = nv[ml + j] * scale;
        }

        PolyMat2 theta_r, lambda_r;
        solve(mid, hi, std::move(ur), std::move(vr), want_theta, &theta_r, lambda_r);
        if (want_theta) *theta = poly_matmul(theta_r, theta_l);
        lambda = poly_matmul(lambda_r, lambda_l);
    }

    std::vector<double>& delta() { return delta_; }

private:
    void leaf_solve(std::size_t lo, std::size_t hi, CVector u, CVector v, bool want_theta,
                    PolyMat2* theta, PolyMat2& lambda) {
        const std::size_t m = hi - lo;
        PolyMat2 th = poly_identity();
        PolyMat2 la = poly_identity();
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t n = lo + j;
            const double au = std::abs(u[j]);
            if (!(au > 0.0) || !std::isfinite(au))
                throw NotPositiveDefinite("vanishing generator at step " + std::to_string(n));
            const cplx k = v[j] / u[j];
            const double ak = std::abs(k);
            if (!(ak < 1.0))
                throw NotPositiveDefinite("reflection coefficient at step " + std::to_string(n));
            const double one_minus = (1.0 - ak) * (1.0 + ak);
            const double d = au * au * one_minus;
            check_pivot(d, c0_, n);
            delta_[n] = d;
            const double inv_s = 1.0 / std::sqrt(one_minus);
            const cplx kc = std::conj(k);

            for (std::size_t i = j; i < m; ++i) {
                const cplx nu = (u[i] - kc * v[i]) * inv_s;
                const cplx nv = (v[i] - k * u[i]) * inv_s;
                u[i] = nu;
                v[i] = nv;
            }
            for (std::size_t i = m - 1; i > j; --i) u[i] = u[i - 1];
            u[j] = cplx(0.0);

            if (want_theta) {
                const std::size_t deg = th.at(0, 0).size();
                for (auto& x : th.e) x.resize(deg + 1, cplx(0.0));
                PolyMat2 nt;
                for (auto& x : nt.e) x.assign(deg + 1, cplx(0.0));
                for (std::size_t p = 0; p < deg; ++p) {
                    nt.at(0, 0)[p + 1] = (th.at(0, 0)[p] - kc * th.at(1, 0)[p]) * inv_s;
                    nt.at(0, 1)[p + 1] = (th.at(0, 1)[p] - kc * th.at(1, 1)[p]) * inv_s;
                }
                for (std::size_t p = 0; p <= deg; ++p) {
                    nt.at(1, 0)[p] = (th.at(1, 0)[p] - k * th.at(0, 0)[p]) * inv_s;
                    nt.at(1, 1)[p] = (th.at(1, 1)[p] - k * th.at(0, 1)[p]) * inv_s;
                }
                th = std::move(nt);
            }
            if (n >= 1) {
                const cplx kl = -k;
                const std::size_t deg = la.at(0, 0).size();
                PolyMat2 nl;
                for (auto& x : nl.e) x.assign(deg + 1, cplx(0.0));
                for (int col = 0; col < 2; ++col) {
                    const auto& top = la.at(0, col);
                    const auto& bot = la.at(1, col);
                    for (std::size_t p = 0; p < deg; ++p) {
                        nl.at(0, col)[p] += top[p];
                        nl.at(0, col)[p + 1] += kl * bot[p];
                        nl.at(1, col)[p] += std::conj(kl) * top[p];
                        nl.at(1, col)[p + 1] += bot[p];
                    }
                }
                la = std::move(nl);
            }
        }
        if (want_theta) *theta = std::move(th);
        lambda = std::move(la);
    }

    std::size_t n_;
    double c0_;
    std::size_t leaf_;
    std::vector<double> delta_;
};

}  // namespace detail

inline constexpr std::size_t kSchurLeafSize = 32;

// Superfast O(N log^2 N) decomposition.  leaf_size controls where the
// recursion switches to the direct O(m^2) sweep.
inline GSDecomposition generalized_schur(const HermitianToeplitz& t,
                                         std::size_t leaf_size = kSchurLeafSize) {
    const std::size_t n = t.size();
    auto c = t.first_column();
    const double c0 = c[0].real();
    const double inv = 1.0 / std::sqrt(c0);
    CVector u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = c[i] * inv;
    v = u;
    v[0] = cplx(0.0);
    detail::SchurRecursion rec(n, c0, std::max<std::size_t>(leaf_size, 1));
    detail::PolyMat2 lambda;
    rec.solve(0, n, std::move(u), std::move(v), false, nullptr, lambda);

    GSDecomposition out;
    out.delta = std::move(rec.delta());
    out.rho.assign(n, cplx(0.0));
    for (int col = 0; col < 2; ++col) {
        const auto& b = lambda.at(1, col);
        for (std::size_t i = 0; i < n && i < b.size(); ++i) out.rho[i] += b[i];
    }
    out.rho[n - 1] = cplx(1.0);
    return out;
}

inline GSDecomposition decompose(const HermitianToeplitz& t,
                                 ToeplitzSolver solver = ToeplitzSolver::Auto) {
    if (solver == ToeplitzSolver::Levinson ||
        (solver == ToeplitzSolver::Auto && t.size() <= kLevinsonMaxSize))
        return levinson_durbin(t);
    return generalized_schur(t);
}

inline double log_det(const GSDecomposition& d) {
    double acc = 0.0;
    for (double x : d.delta) acc += std::log(x);
    return acc;
}

// C^{-1} = delta_{N-1}^{-1} (T1^H T1 - T0 T0^H) with lower triangular
// [T0]_{ik} = rho_{i-k-1} and upper triangular [T1]_{ik} = rho_{N-1+i-k}.
// The transforms of rho and of its conjugate reversal are kept so each
// application costs three forward and three inverse FFTs of length >= 2N.
class ToeplitzInverse {
public:
    explicit ToeplitzInverse(const GSDecomposition& d)
        : n_(d.size()), len_(fft::next_pow2(2 * d.size())), inv_delta_(1.0 / d.delta.back()) {
        rho_f_ = fft::padded(d.rho, len_);
        rhoc_f_.assign(len_, cplx(0.0));
        for (std::size_t j = 0; j < n_; ++j) rhoc_f_[j] = std::conj(d.rho[n_ - 1 - j]);
        fft::forward(rho_f_);
        fft::forward(rhoc_f_);
    }

    std::size_t size() const { return n_; }

    CVector apply(std::span<const cplx> x) const {
        if (x.size() != n_) throw DimensionMismatch("apply_inverse: vector length differs from N");
        const double scale = 1.0 / static_cast<double>(len_);
        CVector xf = fft::padded(x, len_);
        fft::forward(xf);
        CVector a(len_), b(len_);
        for (std::size_t p = 0; p < len_; ++p) {
            a[p] = rho_f_[p] * xf[p];
            b[p] = rhoc_f_[p] * xf[p];
        }
        fft::backward(a);
        fft::backward(b);
        // w1 = T1 x = (rho * x)[N-1 .. 2N-2]; w0 = T0^H x = (rhoc * x)[N .. 2N-1],
        // stored shifted by one so that T0 w0 becomes a plain convolution.
        CVector w1(len_, cplx(0.0)), w0(len_, cplx(0.0));
        for (std::size_t i = 0; i < n_; ++i) {
            w1[i] = a[n_ - 1 + i] * scale;
            if (i + 1 < n_) w0[i + 1] = b[n_ + i] * scale;
        }
        fft::forward(w1);
        fft::forward(w0);
        for (std::size_t p = 0; p < len_; ++p) w1[p] = rhoc_f_[p] * w1[p] - rho_f_[p] * w0[p];
        fft::backward(w1);
        CVector out(n_);
        for (std::size_t i = 0; i < n_; ++i) out[i] = w1[i] * (scale * inv_delta_);
        return out;
    }

private:
    std::size_t n_;
    std::size_t len_;
    double inv_delta_;
    CVector rho_f_;
    CVector rhoc_f_;
};

inline CVector apply_inverse(const GSDecomposition& d, std::span<const cplx> x) {
    return ToeplitzInverse(d).apply(x);
}

// omega(i) = sum_a f(a, a+i) [C^{-1}]_{a, a+i} for i in [-(N-1), N-1] with
//   S: f = 1,  T: f = 2 pi a,  V: f = (2 pi a)^2,  X: f = 4 pi^2 a b,
// i.e. the diagonal sums of C^{-1}, D C^{-1}, D^2 C^{-1} and D C^{-1} D.
enum class DiagonalKind { S = 0, T = 1, V = 2, X = 3 };

struct DiagonalSums {
    std::size_t n = 0;
    CVector values;  // values[i + n - 1] holds omega(i)

    cplx at(std::ptrdiff_t i) const { return values[static_cast<std::size_t>(i + static_cast<std::ptrdiff_t>(n) - 1)]; }
};

namespace detail {

using Poly4 = std::array<double, 4>;

// Coefficients of F(n) = sum_{a=0}^{n-1} sum_d phi_d a^d as a cubic in n.
inline Poly4 prefix_sum_poly(const std::array<double, 3>& phi) {
    Poly4 f{0, 0, 0, 0};
    f[1] += phi[0];
    f[2] += 0.5 * phi[1];
    f[1] += -0.5 * phi[1];
    f[3] += phi[2] / 3.0;
    f[2] += -0.5 * phi[2];
    f[1] += phi[2] / 6.0;
    return f;
}

// Coefficients in p of F(alpha + sign * p).
inline Poly4 shift_poly(const Poly4& f, double alpha, double sign) {
    static constexpr double binom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
    Poly4 out{0, 0, 0, 0};
    for (int d = 0; d < 4; ++d) {
        if (f[d] == 0.0) continue;
        for (int e = 0; e <= d; ++e)
            out[e] += f[d] * binom[d][e] * std::pow(alpha, d - e) * std::pow(sign, e);
    }
    return out;
}

inline std::array<double, 3> weight_poly(DiagonalKind kind, double offset) {
    const double w = kTwoPi;
    switch (kind) {
        case DiagonalKind::S: return {1.0, 0.0, 0.0};
        case DiagonalKind::T: return {0.0, w, 0.0};
        case DiagonalKind::V: return {0.0, 0.0, w * w};
        case DiagonalKind::X: return {0.0, w * w * offset, w * w};
    }
    return {0.0, 0.0, 0.0};
}

// c(p) = F(p + alpha) - F(m - p) as a cubic in p.
inline Poly4 diagonal_coefficients(DiagonalKind kind, std::ptrdiff_t i, std::size_t n) {
    const double nn = static_cast<double>(n);
    Poly4 f = prefix_sum_poly(weight_poly(kind, static_cast<double>(i)));
    double alpha, m;
    if (i >= 0) {
        alpha = 1.0;
        m = nn - 1.0 - static_cast<double>(i);
    } else {
        alpha = static_cast<double>(-i) + 1.0;
        m = nn - 1.0;
    }
    Poly4 a = shift_poly(f, alpha, 1.0);
    Poly4 b = shift_poly(f, m, -1.0);
    for (int e = 0; e < 4; ++e) a[e] -= b[e];
    return a;
}

// R_e(i) = sum_p p^e rho_p conj(rho_{p+i}), i = 0..N-1, e = 0..3.
inline std::array<CVector, 4> weighted_correlations(const GSDecomposition& d) {
    const std::size_t n = d.size();
    const std::size_t len = fft::next_pow2(2 * n);
    CVector rf = fft::padded(d.rho, len);
    fft::forward(rf);
    const double scale = 1.0 / static_cast<double>(len);
    std::array<CVector, 4> out;
    for (int e = 0; e < 4; ++e) {
        CVector a(len, cplx(0.0));
        for (std::size_t p = 0; p < n; ++p) a[p] = std::pow(static_cast<double>(p), e) * d.rho[p];
        fft::forward(a);
        // sum_p conj(a_p) rho_{p+i} is the circular correlation of a with rho.
        for (std::size_t k = 0; k < len; ++k) a[k] = std::conj(a[k]) * rf[k];
        fft::backward(a);
        out[e].resize(n);
        for (std::size_t i = 0; i < n; ++i) out[e][i] = std::conj(a[i] * scale);
    }
    return out;
}

inline DiagonalSums diagonal_sums_from(const std::array<CVector, 4>& r, std::size_t n, double delta,
                                       DiagonalKind kind) {
    DiagonalSums out;
    out.n = n;
    out.values.assign(2 * n - 1, cplx(0.0));
    const double inv_delta = 1.0 / delta;
    const auto np = static_cast<std::ptrdiff_t>(n);
    for (std::ptrdiff_t i = 0; i < np; ++i) {
        const Poly4 c = diagonal_coefficients(kind, i, n);
        cplx acc(0.0);
        for (int e = 0; e < 4; ++e) acc += c[e] * r[e][i];
        out.values[i + np - 1] = acc * inv_delta;
    }
    const bool hermitian = kind == DiagonalKind::S || kind == DiagonalKind::X;
    for (std::ptrdiff_t j = 1; j < np; ++j) {
        if (hermitian) {
            out.values[np - 1 - j] = std::conj(out.values[np - 1 + j]);
            continue;
        }
        const Poly4 c = diagonal_coefficients(kind, -j, n);
        cplx acc(0.0);
        for (int e = 0; e < 4; ++e) acc += c[e] * std::conj(r[e][j]);
        out.values[np - 1 - j] = acc * inv_delta;
    }
    if (hermitian) out.values[np - 1] = cplx(out.values[np - 1].real(), 0.0);
    return out;
}

}  // namespace detail

inline DiagonalSums diagonal_sums(const GSDecomposition& d, DiagonalKind kind) {
    auto r = detail::weighted_correlations(d);
    return detail::diagonal_sums_from(r, d.size(), d.delta.back(), kind);
}

// All four kinds sharing one set of correlations.
inline std::array<DiagonalSums, 4> all_diagonal_sums(const GSDecomposition& d) {
    auto r = detail::weighted_correlations(d);
    std::array<DiagonalSums, 4> out;
    for (int k = 0; k < 4; ++k)
        out[k] = detail::diagonal_sums_from(r, d.size(), d.delta.back(), static_cast<DiagonalKind>(k));
    return out;
}

}  // namespace superlse
