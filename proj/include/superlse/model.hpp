#pragma once

// Bayesian line spectral model: observations, estimator state, objective and
// the per-component / per-grid statistics it needs, with a superfast
// (Toeplitz, complete data) and a semifast (Woodbury, any pattern) backend.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "errors.hpp"
#include "fft.hpp"
#include "nufft.hpp"
#include "toeplitz.hpp"

namespace superlse {

// y_g = Phi Psi alpha_g + w_g for g = 1..G.  Row m of Phi selects index
// I(m) of the length-N signal and multiplies it by scales[m].  Indices are
// zero-based and strictly increasing.
class Observation {
public:
    static Observation complete(std::vector<CVector> snapshots) {
        if (snapshots.empty()) throw DimensionMismatch("observation needs at least one snapshot");
        const std::size_t n = snapshots.front().size();
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        return Observation(n, std::move(idx), CVector(n, cplx(1.0)), std::move(snapshots), true);
    }

    static Observation incomplete(std::size_t n, std::vector<std::size_t> indices, CVector scales,
                                  std::vector<CVector> snapshots) {
        if (scales.empty()) scales.assign(indices.size(), cplx(1.0));
        const bool all_ones = std::all_of(scales.begin(), scales.end(), [](cplx s) { return s == cplx(1.0); });
        const bool full = indices.size() == n && all_ones;
        return Observation(n, std::move(indices), std::move(scales), std::move(snapshots), full);
    }

    std::size_t n() const { return n_; }
    std::size_t m() const { return indices_.size(); }
    std::size_t snapshot_count() const { return y_.size(); }
    bool is_complete() const { return complete_; }
    const std::vector<std::size_t>& indices() const { return indices_; }
    const CVector& scales() const { return scales_; }
    const CVector& snapshot(std::size_t g) const { return y_[g]; }
    const std::vector<CVector>& snapshots() const { return y_; }

    // |Phi_m|^2 placed at index I(m); zero elsewhere.
    const std::vector<double>& weights() const { return weights_; }

    // Phi^H y (length N).
    CVector embed(std::span<const cplx> y) const {
        CVector out(n_, cplx(0.0));
        for (std::size_t m = 0; m < indices_.size(); ++m) out[indices_[m]] += std::conj(scales_[m]) * y[m];
        return out;
    }

    // Phi x (length M).
    CVector sample(std::span<const cplx> x) const {
        CVector out(indices_.size());
        for (std::size_t m = 0; m < indices_.size(); ++m) out[m] = scales_[m] * x[indices_[m]];
        return out;
    }

    // Sum over snapshots of ||y_g||^2.
    double energy() const {
        double e = 0.0;
        for (const auto& y : y_)
            for (auto v : y) e += std::norm(v);
        return e;
    }

private:
    Observation(std::size_t n, std::vector<std::size_t> idx, CVector scales, std::vector<CVector> y, bool complete)
        : n_(n), indices_(std::move(idx)), scales_(std::move(scales)), y_(std::move(y)), complete_(complete) {
        if (n_ == 0) throw DimensionMismatch("signal length N must be positive");
        if (indices_.empty()) throw InvalidPattern("pattern must observe at least one index");
        if (scales_.size() != indices_.size()) throw InvalidPattern("pattern scales and indices differ in length");
        for (std::size_t m = 0; m < indices_.size(); ++m) {
            if (indices_[m] >= n_) throw InvalidPattern("pattern index " + std::to_string(indices_[m]) + " outside [0, N)");
            if (m > 0 && indices_[m] <= indices_[m - 1]) throw InvalidPattern("pattern indices must be strictly increasing");
            if (!(std::abs(scales_[m]) > 0.0) || !std::isfinite(std::abs(scales_[m])))
                throw InvalidPattern("pattern scales must be finite and non-zero");
        }
        if (y_.empty()) throw DimensionMismatch("observation needs at least one snapshot");
        for (const auto& y : y_) {
            if (y.size() != indices_.size()) throw DimensionMismatch("snapshot length differs from M");
            for (auto v : y)
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw InputError("snapshot contains non-finite values");
        }
        weights_.assign(n_, 0.0);
        for (std::size_t m = 0; m < indices_.size(); ++m) weights_[indices_[m]] = std::norm(scales_[m]);
    }

    std::size_t n_;
    std::vector<std::size_t> indices_;
    CVector scales_;
    std::vector<CVector> y_;
    bool complete_;
    std::vector<double> weights_;
};

// Only active components are stored; K_max bounds their number.
struct EstimationState {
    std::vector<double> theta;
    std::vector<double> gamma;
    double beta = 1.0;
    double zeta = 0.5;
    std::size_t k_max = 0;

    std::size_t active() const { return theta.size(); }
    FrequencySet frequencies() const { return FrequencySet(theta); }

    void add(double th, double g) {
        theta.push_back(th);
        gamma.push_back(g);
    }
    void remove(std::size_t k) {
        theta.erase(theta.begin() + static_cast<std::ptrdiff_t>(k));
        gamma.erase(gamma.begin() + static_cast<std::ptrdiff_t>(k));
    }
};

// zeta used inside logarithms; zeta = 0 is clamped to 1 / (2 K_max).
inline double effective_zeta(const EstimationState& s) {
    const double floor = 1.0 / (2.0 * static_cast<double>(std::max<std::size_t>(s.k_max, 1)));
    return std::max(s.zeta, floor);
}

// -sum_k [z_k ln zeta + (1 - z_k) ln(1 - zeta)]
inline double prior_penalty(const EstimationState& s) {
    const double z = effective_zeta(s);
    const auto k = static_cast<double>(s.active());
    const auto kmax = static_cast<double>(std::max(s.k_max, s.active()));
    return -(k * std::log(z) + (kmax - k) * std::log1p(-z));
}

enum class Backend { Auto, Superfast, Semifast };

inline const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Superfast: return "superfast";
        case Backend::Semifast: return "semifast";
        case Backend::Auto: return "auto";
    }
    return "auto";
}

inline constexpr std::size_t kSuperfastMinSize = 512;

inline Backend resolve_backend(Backend b, const Observation& obs) {
    if (b == Backend::Auto) return obs.is_complete() && obs.n() >= kSuperfastMinSize ? Backend::Superfast : Backend::Semifast;
    if (b == Backend::Superfast && !obs.is_complete())
        throw InvalidPattern("the superfast backend requires complete data");
    return b;
}

struct ModelOptions {
    Backend backend = Backend::Auto;
    ToeplitzSolver toeplitz = ToeplitzSolver::Auto;
    NufftMethod nufft = NufftMethod::Auto;
};

// Per active component k, with C^{-1} the inverse covariance and D = diag(2 pi n):
//   s = psi^H Phi^H C^-1 Phi psi,      t = psi^H D Phi^H C^-1 Phi psi,
//   v = psi^H D^2 Phi^H C^-1 Phi psi,  x = psi^H D Phi^H C^-1 Phi D psi,
// and per snapshot q = psi^H Phi^H C^-1 y, r = psi^H D Phi^H C^-1 y,
// u = psi^H D^2 Phi^H C^-1 y.
struct ComponentStats {
    CVector s, t, v, x;
    std::vector<CVector> q, r, u;

    std::size_t snapshot_count() const { return q.size(); }
};

// s and q evaluated at theta_l = l / L.
struct GridStats {
    std::size_t grid_size = 0;
    std::vector<double> s;
    std::vector<CVector> q;
};

struct Posterior {
    std::vector<CVector> mu;  // per snapshot, mu = gamma .* q
    double trace_term = 0.0;  // tr(Sigma A^H A) = beta * sum_k s_k gamma_k
};

// c_m = beta [m == 0] + sum_k gamma_k exp(j 2 pi m theta_k)
inline CVector covariance_first_column(const EstimationState& s, std::size_t n,
                                       NufftMethod method = NufftMethod::Auto) {
    CVector g(s.gamma.begin(), s.gamma.end());
    CVector c = steer_forward_raw(s.theta, g, n, method);
    double c0 = s.beta;
    for (double x : s.gamma) c0 += x;
    c[0] = cplx(c0, 0.0);
    return c;
}

namespace detail {

inline CVector weighted(std::span<const cplx> x, std::size_t n, int power) {
    CVector out(x.begin(), x.end());
    for (std::size_t i = 0; i < n; ++i) out[i] *= std::pow(kTwoPi * static_cast<double>(i), power);
    return out;
}

class EvaluationImpl {
public:
    virtual ~EvaluationImpl() = default;
    virtual void fill_svtx(ComponentStats& st) const = 0;
    virtual std::vector<double> grid_s(std::size_t len) const = 0;

    double log_det = 0.0;
    double quadratic = 0.0;
    std::vector<CVector> z;  // Phi^H C^{-1} y_g, length N
};

class SuperfastImpl final : public EvaluationImpl {
public:
    SuperfastImpl(const EstimationState& s, const Observation& obs, const ModelOptions& opt)
        : state_(s), n_(obs.n()), nufft_(opt.nufft),
          gs_(decompose(HermitianToeplitz(covariance_first_column(s, obs.n(), opt.nufft)), opt.toeplitz)) {
        log_det = superlse::log_det(gs_);
        ToeplitzInverse inv(gs_);
        for (const auto& y : obs.snapshots()) {
            CVector cy = inv.apply(y);
            cplx acc(0.0);
            for (std::size_t i = 0; i < n_; ++i) acc += std::conj(y[i]) * cy[i];
            quadratic += acc.real();
            z.push_back(std::move(cy));
        }
    }

    void fill_svtx(ComponentStats& st) const override {
        auto& sums = diag();
        std::array<CVector*, 4> dst = {&st.s, &st.t, &st.v, &st.x};
        for (int kind = 0; kind < 4; ++kind) *dst[kind] = evaluate_offgrid(sums[kind].values);
    }

    std::vector<double> grid_s(std::size_t len) const override {
        const auto& w = diag()[0].values;
        CVector buf(len, cplx(0.0));
        const auto n = static_cast<std::ptrdiff_t>(n_);
        const auto l = static_cast<std::ptrdiff_t>(len);
        for (std::ptrdiff_t i = -(n - 1); i < n; ++i) buf[static_cast<std::size_t>(((i % l) + l) % l)] += w[static_cast<std::size_t>(i + n - 1)];
        fft::backward(buf);
        std::vector<double> out(len);
        for (std::size_t i = 0; i < len; ++i) out[i] = buf[i].real();
        return out;
    }

private:
    const std::array<DiagonalSums, 4>& diag() const {
        if (!diag_) diag_ = all_diagonal_sums(gs_);
        return *diag_;
    }

    // sum_i omega(i) exp(j 2 pi i theta_k) for i = -(N-1)..N-1.
    CVector evaluate_offgrid(const CVector& omega) const {
        CVector conj_omega(omega.size());
        for (std::size_t i = 0; i < omega.size(); ++i) conj_omega[i] = std::conj(omega[i]);
        CVector vals = steer_adjoint_raw(state_.theta, conj_omega, nufft_);
        for (std::size_t k = 0; k < vals.size(); ++k)
            vals[k] = std::conj(vals[k]) *
                      std::polar(1.0, -kTwoPi * static_cast<double>(n_ - 1) * state_.theta[k]);
        return vals;
    }

    EstimationState state_;
    std::size_t n_;
    NufftMethod nufft_;
    GSDecomposition gs_;
    mutable std::optional<std::array<DiagonalSums, 4>> diag_;
};

// C^{-1} = beta^-1 I - beta^-2 A Q A^H with A = Phi Psi and
// Q = Gamma^{1/2} B^{-1} Gamma^{1/2}, B = I + beta^-1 Gamma^{1/2} A^H A Gamma^{1/2}.
class SemifastImpl final : public EvaluationImpl {
public:
    SemifastImpl(const EstimationState& s, const Observation& obs, const ModelOptions& opt)
        : state_(s), obs_(obs), nufft_(opt.nufft) {
        const std::size_t n = obs.n();
        const auto k = static_cast<Eigen::Index>(s.active());
        const double beta = s.beta;
        const auto& w = obs.weights();
        std::vector<double> w1(n), w2(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = kTwoPi * static_cast<double>(i);
            w1[i] = w[i] * d;
            w2[i] = w[i] * d * d;
        }
        g0_ = gram_full(s.theta, w, nufft_);
        g1_ = gram_full(s.theta, w1, nufft_);
        g2_ = gram_full(s.theta, w2, nufft_);
        sqrt_gamma_.resize(k);
        for (Eigen::Index i = 0; i < k; ++i) sqrt_gamma_(i) = std::sqrt(std::max(s.gamma[static_cast<std::size_t>(i)], 0.0));

        Eigen::MatrixXcd b = Eigen::MatrixXcd::Identity(k, k) +
                             (sqrt_gamma_.asDiagonal() * g0_ * sqrt_gamma_.asDiagonal()) / beta;
        llt_.compute(b);
        if (llt_.info() != Eigen::Success) throw NotPositiveDefinite("Woodbury core matrix");
        log_det = static_cast<double>(obs.m()) * std::log(beta);
        for (Eigen::Index i = 0; i < k; ++i) log_det += 2.0 * std::log(llt_.matrixL()(i, i).real());
        q_ = sqrt_gamma_.asDiagonal() * llt_.solve(Eigen::MatrixXcd(sqrt_gamma_.asDiagonal()));

        for (const auto& y : obs.snapshots()) {
            CVector ey = obs.embed(y);
            CVector cy(y.begin(), y.end());
            if (k > 0) {
                CVector h = steer_adjoint_raw(s.theta, ey, nufft_);
                Eigen::VectorXcd mu = q_ * Eigen::Map<const Eigen::VectorXcd>(h.data(), k) / beta;
                CVector muv(mu.data(), mu.data() + k);
                CVector amu = obs.sample(steer_forward_raw(s.theta, muv, n, nufft_));
                for (std::size_t m = 0; m < cy.size(); ++m) cy[m] -= amu[m];
            }
            cplx acc(0.0);
            for (std::size_t m = 0; m < cy.size(); ++m) {
                cy[m] /= beta;
                acc += std::conj(y[m]) * cy[m];
            }
            quadratic += acc.real();
            z.push_back(obs.embed(cy));
        }
    }

    void fill_svtx(ComponentStats& st) const override {
        const auto k = g0_.rows();
        const double ib = 1.0 / state_.beta, ib2 = ib * ib;
        Eigen::MatrixXcd p0 = q_ * g0_;
        Eigen::MatrixXcd p1 = q_ * g1_;
        st.s.resize(k);
        st.t.resize(k);
        st.v.resize(k);
        st.x.resize(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto u = static_cast<std::size_t>(i);
            st.s[u] = ib * g0_(i, i) - ib2 * (g0_.row(i) * p0.col(i))(0, 0);
            st.t[u] = ib * g1_(i, i) - ib2 * (g1_.row(i) * p0.col(i))(0, 0);
            st.v[u] = ib * g2_(i, i) - ib2 * (g2_.row(i) * p0.col(i))(0, 0);
            st.x[u] = ib * g2_(i, i) - ib2 * (g1_.row(i) * p1.col(i))(0, 0);
        }
    }

    std::vector<double> grid_s(std::size_t len) const override {
        const std::size_t n = obs_.n();
        const auto k = static_cast<Eigen::Index>(state_.active());
        const auto& w = obs_.weights();
        double total = 0.0;
        for (double x : w) total += x;
        const double ib = 1.0 / state_.beta;
        std::vector<double> out(len, ib * total);
        if (k == 0) return out;
        // E[k, l] = sum_n w_n exp(-j 2 pi n theta_k) exp(j 2 pi n l / L)
        Eigen::MatrixXcd e(k, static_cast<Eigen::Index>(len));
        CVector buf(len);
        for (Eigen::Index i = 0; i < k; ++i) {
            std::fill(buf.begin(), buf.end(), cplx(0.0));
            const double th = state_.theta[static_cast<std::size_t>(i)];
            for (std::size_t j = 0; j < n; ++j)
                if (w[j] != 0.0) buf[j % len] += w[j] * std::polar(1.0, -kTwoPi * static_cast<double>(j) * th);
            fft::backward(buf);
            for (std::size_t l = 0; l < len; ++l) e(i, static_cast<Eigen::Index>(l)) = buf[l] * sqrt_gamma_(i);
        }
        llt_.matrixL().solveInPlace(e);
        const double ib2 = ib * ib;
        for (std::size_t l = 0; l < len; ++l) out[l] -= ib2 * e.col(static_cast<Eigen::Index>(l)).squaredNorm();
        return out;
    }

private:
    EstimationState state_;
    const Observation& obs_;
    NufftMethod nufft_;
    Eigen::MatrixXcd g0_, g1_, g2_, q_;
    Eigen::VectorXd sqrt_gamma_;
    Eigen::LLT<Eigen::MatrixXcd> llt_;
};

}  // namespace detail

// Factorisation of C at a fixed state; objective and statistics derive from
// it.  The state is copied; the observation must outlive the evaluation.
class ModelEvaluation {
public:
    ModelEvaluation(const EstimationState& s, const Observation& obs, const ModelOptions& opt = {})
        : state_(s), obs_(&obs), opt_(opt), backend_(resolve_backend(opt.backend, obs)) {
        if (s.theta.size() != s.gamma.size()) throw DimensionMismatch("theta and gamma differ in length");
        if (!(s.beta > 0.0)) throw NotPositiveDefinite("noise variance must be positive");
        if (backend_ == Backend::Superfast)
            impl_ = std::make_unique<detail::SuperfastImpl>(s, obs, opt);
        else
            impl_ = std::make_unique<detail::SemifastImpl>(s, obs, opt);
    }

    Backend backend() const { return backend_; }
    double log_det() const { return impl_->log_det; }
    double quadratic() const { return impl_->quadratic; }

    const EstimationState& state() const { return state_; }

    // G ln|C| + sum_g y_g^H C^{-1} y_g
    double data_term() const {
        return static_cast<double>(obs_->snapshot_count()) * impl_->log_det + impl_->quadratic;
    }

    // data_term() plus the prior penalty on the activation pattern.
    double objective() const { return data_term() + prior_penalty(state_); }

    // Phi^H C^{-1} y_g for each snapshot.
    const std::vector<CVector>& whitened() const { return impl_->z; }

    const ComponentStats& stats() const {
        if (state_.active() == 0) throw NoActiveComponents();
        if (!stats_) {
            ComponentStats st;
            const std::size_t n = obs_->n();
            for (const auto& z : impl_->z) {
                st.q.push_back(steer_adjoint_raw(state_.theta, z, opt_.nufft));
                st.r.push_back(steer_adjoint_raw(state_.theta, detail::weighted(z, n, 1), opt_.nufft));
                st.u.push_back(steer_adjoint_raw(state_.theta, detail::weighted(z, n, 2), opt_.nufft));
            }
            impl_->fill_svtx(st);
            stats_ = std::move(st);
        }
        return *stats_;
    }

    GridStats grid_stats(std::size_t len) const {
        if (len < obs_->n() || (len & (len - 1)) != 0)
            throw DimensionMismatch("grid size must be a power of two no smaller than N");
        GridStats g;
        g.grid_size = len;
        g.s = impl_->grid_s(len);
        for (const auto& z : impl_->z) {
            CVector q = fft::padded(z, len);
            fft::forward(q);
            g.q.push_back(std::move(q));
        }
        return g;
    }

    Posterior posterior() const {
        Posterior p;
        if (state_.active() == 0) {
            p.mu.assign(obs_->snapshot_count(), CVector{});
            return p;
        }
        const auto& st = stats();
        for (const auto& q : st.q) {
            CVector mu(q.size());
            for (std::size_t k = 0; k < q.size(); ++k) mu[k] = state_.gamma[k] * q[k];
            p.mu.push_back(std::move(mu));
        }
        for (std::size_t k = 0; k < state_.active(); ++k) p.trace_term += state_.beta * st.s[k].real() * state_.gamma[k];
        return p;
    }

private:
    EstimationState state_;
    const Observation* obs_;
    ModelOptions opt_;
    Backend backend_;
    std::unique_ptr<detail::EvaluationImpl> impl_;
    mutable std::optional<ComponentStats> stats_;
};

inline double objective(const EstimationState& s, const Observation& obs, const ModelOptions& opt = {}) {
    return ModelEvaluation(s, obs, opt).objective();
}

inline ComponentStats component_stats(const EstimationState& s, const Observation& obs, const ModelOptions& opt = {}) {
    return ModelEvaluation(s, obs, opt).stats();
}

inline GridStats grid_stats(const EstimationState& s, const Observation& obs, std::size_t len,
                            const ModelOptions& opt = {}) {
    return ModelEvaluation(s, obs, opt).grid_stats(len);
}

struct Gradient {
    std::vector<double> theta, gamma;
};

// Derivatives of the objective with respect to theta_k and gamma_k.
inline Gradient gradient(const EstimationState& s, const ComponentStats& st) {
    const std::size_t k = s.active();
    const auto g = static_cast<double>(st.snapshot_count());
    Gradient out;
    out.theta.resize(k);
    out.gamma.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        cplx a = g * st.t[i];
        double q2 = 0.0;
        for (std::size_t j = 0; j < st.snapshot_count(); ++j) {
            a -= std::conj(st.q[j][i]) * st.r[j][i];
            q2 += std::norm(st.q[j][i]);
        }
        out.theta[i] = 2.0 * s.gamma[i] * a.imag();
        out.gamma[i] = g * st.s[i].real() - q2;
    }
    return out;
}

// Diagonal of the Hessian with respect to theta_k and gamma_k.
inline Gradient diag_hessian_raw(const EstimationState& s, const ComponentStats& st) {
    const std::size_t k = s.active();
    const auto g = static_cast<double>(st.snapshot_count());
    Gradient out;
    out.theta.resize(k);
    out.gamma.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double gm = s.gamma[i];
        const cplx sv = st.s[i], tv = st.t[i], vv = st.v[i], xv = st.x[i];
        cplx acc = g * (xv - vv + gm * (tv * tv - xv * sv));
        double q2 = 0.0;
        for (std::size_t j = 0; j < st.snapshot_count(); ++j) {
            const cplx q = st.q[j][i], r = st.r[j][i], u = st.u[j][i];
            acc += gm * (xv * std::norm(q) + sv * std::norm(r) - 2.0 * tv * r * std::conj(q)) +
                   (u * std::conj(q) - std::norm(r));
            q2 += std::norm(q);
        }
        const double sr = sv.real();
        out.theta[i] = 2.0 * gm * acc.real();
        out.gamma[i] = 2.0 * sr * q2 - g * sr * sr;
    }
    return out;
}

// As diag_hessian_raw, with non-positive entries replaced by (50 N)^2 for
// frequencies and gamma^-2 for variances.
inline Gradient diag_hessian(const EstimationState& s, const ComponentStats& st, std::size_t n) {
    Gradient out = diag_hessian_raw(s, st);
    const double theta_fallback = std::pow(50.0 * static_cast<double>(n), 2);
    for (std::size_t i = 0; i < s.active(); ++i) {
        if (!(out.theta[i] > 0.0) || !std::isfinite(out.theta[i])) out.theta[i] = theta_fallback;
        const double gfloor = std::max(s.gamma[i], 1e-150);
        if (!(out.gamma[i] > 0.0) || !std::isfinite(out.gamma[i])) out.gamma[i] = 1.0 / (gfloor * gfloor);
    }
    return out;
}

// Posterior mean and trace term at the given state.
inline Posterior posterior(const EstimationState& s, const Observation& obs, const ModelOptions& opt = {}) {
    return ModelEvaluation(s, obs, opt).posterior();
}

}  // namespace superlse
