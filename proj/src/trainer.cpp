#include "evgp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "elbo_forward.hpp"
#include "evgp/errors.hpp"
#include "evgp/random.hpp"

namespace evgp {

void TrainConfig::validate(Eigen::Index dataset_rows) const {
    if (steps < 1) throw ConfigError("trainer.steps must be >= 1");
    if (batch_size < 1 || batch_size > dataset_rows)
        throw ConfigError("trainer.batch_size must be in [1, " + std::to_string(dataset_rows) + "], got " +
                          std::to_string(batch_size));
    if (!(learning_rate > 0.0)) throw ConfigError("trainer.learning_rate must be > 0");
    if (num_inducing < 0 || num_inducing > dataset_rows)
        throw ConfigError("num_inducing must be in [0, " + std::to_string(dataset_rows) + "]");
    if (hyperparameter_freeze_steps < 0) throw ConfigError("hyperparameter_freeze_steps must be >= 0");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Chain rule from a full factor gradient to the raw lower-triangular parameters.
Matrix raw_factor_gradient(const Matrix& factor_grad, const Matrix& raw) {
    Matrix g = factor_grad.triangularView<Eigen::Lower>();
    for (Eigen::Index i = 0; i < raw.rows(); ++i) g(i, i) *= sigmoid(raw(i, i));
    return g;
}

}  // namespace

StateGradient gradients(const VariationalState& state, const BetaPriorRow& prior, const FeatureMap& map,
                        const Matrix& x, const Vector& y, Eigen::Index full_dataset_size, ElboTerms* terms) {
    if (full_dataset_size < x.rows()) throw DimensionMismatch("full dataset size below batch size");
    const detail::ElboForward f = detail::elbo_forward(state, prior, map, x, y);
    const auto& t = f.terms;
    const auto n = x.rows();
    const auto m = state.num_inducing();
    const auto p = state.num_features();
    const auto dim = state.input_dim();
    const double c = 1.0 / static_cast<double>(n);
    const double d = 1.0 / static_cast<double>(full_dataset_size);
    const double s = t.noise_variance;
    const double sf2 = state.kernel.signal_variance();
    if (terms) *terms = t;

    StateGradient g;
    g.log_noise_variance =
        c * (0.5 * static_cast<double>(n) - 0.5 * (t.sq_residual + t.trace_a + t.trace_b + t.trace_f) / s);
    g.log_signal_variance = c * 0.5 * static_cast<double>(n) * sf2 / s;
    g.log_lengthscales = Vector::Zero(dim);

    g.b = Vector::Zero(p);
    g.b_cov_raw = Matrix::Zero(p, p);
    if (p > 0) {
        g.b = -c * f.h.transpose() * f.residual / s + d * prior.cov.solve(Vector(state.b - prior.mean));
        Matrix gl = c * (f.h.transpose() * (f.h * f.lb)) / s + d * prior.cov.solve(f.lb);
        gl.diagonal() -= d * f.lb.diagonal().cwiseInverse();
        g.b_cov_raw = raw_factor_gradient(gl, state.b_cov.raw);
    }

    g.a = Vector::Zero(m);
    g.a_cov_raw = Matrix::Zero(m, m);
    g.inducing = Matrix::Zero(m, dim);
    if (m > 0) {
        const Matrix& w = f.w;
        const Matrix wtw = w.transpose() * w;
        g.a = -c * w.transpose() * f.residual / s + d * f.chol.solve(state.a);
        Matrix gl = c * (wtw * f.la) / s + d * f.chol.solve(f.la);
        gl.diagonal() -= d * f.la.diagonal().cwiseInverse();
        g.a_cov_raw = raw_factor_gradient(gl, state.a_cov.raw);

        // Through W = K_xm K_mm⁻¹ and the Nyström diagonal, onto K_xm and K_mm.
        const Matrix g_w = c * (-f.residual * state.a.transpose() + w * (f.la * f.la.transpose())) / s;
        const Matrix g_w_kinv = f.chol.solve(Matrix(g_w.transpose())).transpose();
        const Matrix g_kxm = g_w_kinv - c * w / s;
        Matrix stacked(m, m + 1);
        stacked << f.la, state.a;
        const Matrix kinv_s = f.chol.solve(stacked);
        const Matrix kinv = f.chol.solve(Matrix(Matrix::Identity(m, m)));
        const Matrix g_kmm = -w.transpose() * g_w_kinv + c * wtw / (2.0 * s) +
                             d * 0.5 * (kinv - kinv_s * kinv_s.transpose());

        Matrix kmm_scaled = f.kmm;  // the part proportional to σ²
        kmm_scaled.diagonal().array() -= t.jitter;
        g.log_signal_variance += (g_kxm.array() * f.kxm.array()).sum() + (g_kmm.array() * kmm_scaled.array()).sum();

        const Vector ell2 = (2.0 * state.kernel.log_lengthscales).array().exp();
        const Matrix a_xm = g_kxm.cwiseProduct(f.kxm);
        Matrix kmm_raw = kmm_scaled;
        kmm_raw.diagonal().array() -= kInducingJitter * sf2;
        const Matrix a_mm = g_kmm.cwiseProduct(kmm_raw);
        const Matrix a_mm_sym = a_mm + a_mm.transpose();
        for (Eigen::Index k = 0; k < dim; ++k) {
            const Matrix dx = x.col(k).replicate(1, m) - state.inducing.col(k).transpose().replicate(n, 1);
            const Matrix dz = state.inducing.col(k).replicate(1, m) - state.inducing.col(k).transpose().replicate(m, 1);
            g.log_lengthscales(k) = ((a_xm.array() * dx.array().square()).sum() +
                                     (a_mm.array() * dz.array().square()).sum()) / ell2(k);
            g.inducing.col(k) = ((a_xm.array() * dx.array()).colwise().sum().transpose() +
                                 (a_mm_sym.array() * dz.array()).colwise().sum().transpose()) / ell2(k);
        }
    }
    return g;
}

namespace {

Eigen::Index tri_size(Eigen::Index k) { return k * (k + 1) / 2; }

void put_lower(const Matrix& m, Vector& flat, Eigen::Index& at) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = j; i < m.rows(); ++i) flat(at++) = m(i, j);
}

void get_lower(const Vector& flat, Eigen::Index& at, Matrix& m) {
    m.setZero();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = j; i < m.rows(); ++i) m(i, j) = flat(at++);
}

Eigen::Index flat_size(Eigen::Index m, Eigen::Index p, Eigen::Index dim) {
    return m + tri_size(m) + p + tri_size(p) + m * dim + dim + 2;
}

template <typename Fill>
Vector pack_blocks(Eigen::Index m, Eigen::Index p, Eigen::Index dim, Fill fill) {
    Vector flat(flat_size(m, p, dim));
    Eigen::Index at = 0;
    fill(flat, at);
    return flat;
}

}  // namespace

Vector pack(const VariationalState& s) {
    const auto m = s.num_inducing(), p = s.num_features(), dim = s.input_dim();
    return pack_blocks(m, p, dim, [&](Vector& flat, Eigen::Index& at) {
        flat.segment(at, m) = s.a;
        at += m;
        put_lower(s.a_cov.raw, flat, at);
        flat.segment(at, p) = s.b;
        at += p;
        put_lower(s.b_cov.raw, flat, at);
        for (Eigen::Index k = 0; k < dim; ++k)
            for (Eigen::Index j = 0; j < m; ++j) flat(at++) = s.inducing(j, k);
        flat.segment(at, dim) = s.kernel.log_lengthscales;
        at += dim;
        flat(at++) = s.kernel.log_signal_variance;
        flat(at++) = s.log_noise_variance;
    });
}

void unpack(const Vector& flat, VariationalState& s) {
    const auto m = s.num_inducing(), p = s.num_features(), dim = s.input_dim();
    if (flat.size() != flat_size(m, p, dim)) throw DimensionMismatch("unpack: flat vector has wrong length");
    Eigen::Index at = 0;
    s.a = flat.segment(at, m);
    at += m;
    get_lower(flat, at, s.a_cov.raw);
    s.b = flat.segment(at, p);
    at += p;
    get_lower(flat, at, s.b_cov.raw);
    for (Eigen::Index k = 0; k < dim; ++k)
        for (Eigen::Index j = 0; j < m; ++j) s.inducing(j, k) = flat(at++);
    s.kernel.log_lengthscales = flat.segment(at, dim);
    at += dim;
    s.kernel.log_signal_variance = flat(at++);
    s.log_noise_variance = flat(at++);
}

Vector pack(const StateGradient& g) {
    const auto m = g.a.size(), p = g.b.size(), dim = g.log_lengthscales.size();
    return pack_blocks(m, p, dim, [&](Vector& flat, Eigen::Index& at) {
        flat.segment(at, m) = g.a;
        at += m;
        put_lower(g.a_cov_raw, flat, at);
        flat.segment(at, p) = g.b;
        at += p;
        put_lower(g.b_cov_raw, flat, at);
        for (Eigen::Index k = 0; k < dim; ++k)
            for (Eigen::Index j = 0; j < m; ++j) flat(at++) = g.inducing(j, k);
        flat.segment(at, dim) = g.log_lengthscales;
        at += dim;
        flat(at++) = g.log_signal_variance;
        flat(at++) = g.log_noise_variance;
    });
}

Vector pack_mask(const VariationalState& s, const ParameterMask& mask) {
    const auto m = s.num_inducing(), p = s.num_features(), dim = s.input_dim();
    Vector flat(flat_size(m, p, dim));
    const Eigen::Index n_var = m + tri_size(m) + p + tri_size(p);
    flat.head(n_var).setConstant(mask.variational ? 1.0 : 0.0);
    flat.segment(n_var, m * dim).setConstant(mask.inducing ? 1.0 : 0.0);
    flat.tail(dim + 2).setConstant(mask.hyperparameters ? 1.0 : 0.0);
    return flat;
}

Adam::Adam(Eigen::Index size, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vector::Zero(size)), v_(Vector::Zero(size)),
      t_(Eigen::VectorXi::Zero(size)) {}

void Adam::step(Vector& params, const Vector& grad, const Vector& active) {
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        if (active(i) == 0.0) continue;
        ++t_(i);
        m_(i) = beta1_ * m_(i) + (1.0 - beta1_) * grad(i);
        v_(i) = beta2_ * v_(i) + (1.0 - beta2_) * grad(i) * grad(i);
        const double mhat = m_(i) / (1.0 - std::pow(beta1_, t_(i)));
        const double vhat = v_(i) / (1.0 - std::pow(beta2_, t_(i)));
        params(i) -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
}

VariationalState initial_state(const Dataset& data, Eigen::Index output, const FeatureMap& map,
                               const BetaPrior& prior, const TrainConfig& config) {
    const auto n = data.rows();
    const BetaPriorRow row = prior_row(prior, output);
    const Vector y = data.y.col(output);
    const Matrix h = feature_matrix(map, data.x);
    const Vector resid = y - h * row.mean;
    const double var = std::max((resid.array() - resid.mean()).square().mean(), 1e-10);
    // Average prior variance of h(x)ᵀβ; a noise floor below it makes the first gradients huge.
    const double feature_var = row.mean.size() > 0 ? (h * row.cov.lower()).rowwise().squaredNorm().mean() : 0.0;
    // The kernel amplitude starts at what a Bayesian linear fit on the features leaves unexplained.
    double kernel_var = var;
    if (row.mean.size() > 0) {
        const double s2 = 0.01 * var;
        const Matrix hw = h * row.cov.lower();
        Matrix precision = hw.transpose() * hw / s2;
        precision.diagonal().array() += 1.0;
        const PsdMatrix post = cholesky_psd(precision);
        const Vector r = resid - hw * post.solve(Vector(hw.transpose() * resid / s2));
        kernel_var = std::max((r.array() - r.mean()).square().mean(), 1e-10);
    }

    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(output)));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    Matrix inducing(config.num_inducing, data.input_dim());
    for (int j = 0; j < config.num_inducing; ++j) inducing.row(j) = data.x.row(idx[static_cast<std::size_t>(j)]);

    return prior_state(inducing, SeKernelParams::from_data(data.x, kernel_var), std::log(0.1 * (var + feature_var)), row);
}

namespace {

void check_shapes(const Dataset& data, const FeatureMap& map, const BetaPrior& prior) {
    if (data.input_dim() != map.input_dim)
        throw DimensionMismatch("dataset has " + std::to_string(data.input_dim()) + " input columns, feature map " +
                                to_string(map.id) + " expects " + std::to_string(map.input_dim));
    if (data.output_dim() != prior.outputs())
        throw DimensionMismatch("dataset has " + std::to_string(data.output_dim()) + " targets, prior has " +
                                std::to_string(prior.outputs()) + " rows");

}

}  // namespace

FitResult fit(const Dataset& data, const FeatureMap& map, const BetaPrior& prior, const TrainConfig& config,
              const CheckpointFn& checkpoint) {
    data.validate();
    config.validate(data.rows());
    check_shapes(data, map, prior);
    if (config.num_inducing == 0 && map.feature_dim == 0)
        throw ConfigError("a model without features needs at least one inducing point");
    std::vector<VariationalState> start;
    for (Eigen::Index o = 0; o < data.output_dim(); ++o) start.push_back(initial_state(data, o, map, prior, config));
    return fit_from(std::move(start), data, map, prior, config, checkpoint);
}

FitResult fit_from(std::vector<VariationalState> start_states, const Dataset& data, const FeatureMap& map,
                   const BetaPrior& prior, const TrainConfig& config, const CheckpointFn& checkpoint) {
    data.validate();
    check_shapes(data, map, prior);
    if (static_cast<Eigen::Index>(start_states.size()) != data.output_dim())
        throw DimensionMismatch("got " + std::to_string(start_states.size()) + " start states for " +
                                std::to_string(data.output_dim()) + " outputs");
    for (const auto& s : start_states) {
        s.validate();
        if (s.inducing.cols() != map.input_dim || s.b.size() != map.feature_dim)
            throw DimensionMismatch("start state does not match the feature map");
    }
    TrainConfig effective = config;
    effective.num_inducing = static_cast<int>(start_states.front().num_inducing());
    effective.validate(data.rows());

    const auto start = std::chrono::steady_clock::now();
    const auto n = data.rows();
    const auto outputs = data.output_dim();
    const bool full_batch = config.batch_size >= n;

    FitResult result;
    result.report.elbo_trace.assign(static_cast<std::size_t>(config.steps), 0.0);
    result.states = std::move(start_states);

    // Per-output loops are independent; each keeps its own optimizer and shuffle stream.
    std::vector<Adam> optimizers;
    std::vector<Vector> params;
    std::vector<Rng> shufflers;
    std::vector<std::vector<Eigen::Index>> orders(static_cast<std::size_t>(outputs));
    for (Eigen::Index o = 0; o < outputs; ++o) {
        auto& s = result.states[static_cast<std::size_t>(o)];
        params.push_back(pack(s));
        optimizers.emplace_back(params.back().size(), config.learning_rate, config.adam_beta1, config.adam_beta2,
                                config.adam_eps);
        shufflers.emplace_back(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(o)));
        auto& order = orders[static_cast<std::size_t>(o)];
        order.resize(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        const BetaPriorRow row = prior_row(prior, o);
        result.report.initial_loss += negative_elbo(s, row, map, data.x, data.y.col(o), n);
    }
    result.report.output_traces.assign(static_cast<std::size_t>(outputs), {});

    std::vector<BetaPriorRow> rows;
    std::vector<Eigen::Index> cursors(static_cast<std::size_t>(outputs), n);  // n forces a shuffle first
    for (Eigen::Index o = 0; o < outputs; ++o) {
        rows.push_back(prior_row(prior, o));
        result.report.output_traces[static_cast<std::size_t>(o)].reserve(static_cast<std::size_t>(config.steps));
    }
    const Vector mask_frozen = pack_mask(result.states.front(), {true, config.learn_inducing, false});
    const Vector mask_open = pack_mask(result.states.front(), {true, config.learn_inducing, true});

    Matrix bx;
    Vector by;
    for (int step = 0; step < config.steps; ++step) {
        const bool frozen = step < config.hyperparameter_freeze_steps;
        for (Eigen::Index o = 0; o < outputs; ++o) {
            const auto oi = static_cast<std::size_t>(o);
            auto& state = result.states[oi];
            if (full_batch) {
                bx = data.x;
                by = data.y.col(o);
            } else {
                auto& order = orders[oi];
                auto& cursor = cursors[oi];
                if (cursor >= n) {
                    std::shuffle(order.begin(), order.end(), shufflers[oi]);
                    cursor = 0;
                }
                const Eigen::Index take = std::min<Eigen::Index>(config.batch_size, n - cursor);
                bx.resize(take, data.input_dim());
                by.resize(take);
                for (Eigen::Index r = 0; r < take; ++r) {
                    const auto src = order[static_cast<std::size_t>(cursor + r)];
                    bx.row(r) = data.x.row(src);
                    by(r) = data.y(src, o);
                }
                cursor += take;
            }
            ElboTerms terms;
            StateGradient grad;
            try {
                grad = gradients(state, rows[oi], map, bx, by, n, &terms);
            } catch (const NotPsdWithinJitter& e) {
                throw NonFiniteLoss(step, e.what());
            } catch (const NotSymmetric& e) {
                throw NonFiniteLoss(step, e.what());
            }
            const double loss = terms.loss(n);
            const Vector flat_grad = pack(grad);
            if (!std::isfinite(loss) || !flat_grad.allFinite())
                throw NonFiniteLoss(step, "output " + std::to_string(o));
            result.report.output_traces[oi].push_back(loss);
            result.report.elbo_trace[static_cast<std::size_t>(step)] += loss;
            if (terms.jitter > 0.0) ++result.report.jitter_events;

            optimizers[oi].step(params[oi], flat_grad, frozen ? mask_frozen : mask_open);
            unpack(params[oi], state);
        }
        if (checkpoint && config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0)
            checkpoint(step + 1, result.states);
    }

    for (Eigen::Index o = 0; o < outputs; ++o) {
        const double loss = negative_elbo(result.states[static_cast<std::size_t>(o)], prior_row(prior, o), map,
                                          data.x, data.y.col(o), n);
        if (!std::isfinite(loss)) throw NonFiniteLoss(config.steps, "final loss of output " + std::to_string(o));
        result.report.final_loss += loss;
    }
    result.report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace evgp
