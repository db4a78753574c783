#pragma once
#include <cmath>
#include <string>
#include <vector>

#include "quant/core.hpp"
#include "quant/rng.hpp"

// Minimal neural substrate: fixed MLP architectures (ReLU hidden, linear
// output) with hand-derived reverse-mode gradients. Batches are column-major:
// one sample per column.
namespace quant::nn {

template <typename S>
struct Layer {
    MatX<S> w;
    VecX<S> b;
};

template <typename S>
struct Mlp {
    std::vector<Layer<S>> layers;
    Index in_dim() const { return layers.front().w.cols(); }
    Index out_dim() const { return layers.back().w.rows(); }
};

// Uniform fan-in init (weights and biases in +-1/sqrt(fan_in)).
template <typename S>
Mlp<S> make_mlp(const std::vector<Index>& widths, Rng& rng) {
    require(widths.size() >= 2, "make_mlp: need at least in/out widths");
    Mlp<S> net;
    for (size_t i = 1; i < widths.size(); ++i) {
        Layer<S> l;
        l.w.resize(widths[i], widths[i - 1]);
        l.b.resize(widths[i]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(widths[i - 1]));
        for (Index r = 0; r < l.w.rows(); ++r)
            for (Index c = 0; c < l.w.cols(); ++c)
                l.w(r, c) = static_cast<S>(rng.uniform(-bound, bound));
        for (Index r = 0; r < l.b.size(); ++r)
            l.b[r] = static_cast<S>(rng.uniform(-bound, bound));
        net.layers.push_back(std::move(l));
    }
    return net;
}

template <typename S>
struct ForwardCache {
    // acts[0] = input; acts[i+1] = output of layer i (post-ReLU for hidden).
    std::vector<MatX<S>> acts;
};

template <typename S>
MatX<S> forward(const Mlp<S>& net, const MatX<S>& x,
                ForwardCache<S>* cache = nullptr) {
    require(x.rows() == net.in_dim(), "forward: input width mismatch");
    if (cache) {
        cache->acts.clear();
        cache->acts.push_back(x);
    }
    MatX<S> a = x;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        MatX<S> z = (l.w * a).colwise() + l.b;
        if (i + 1 < net.layers.size()) z = z.cwiseMax(S(0));
        a = std::move(z);
        if (cache) cache->acts.push_back(a);
    }
    return a;
}

template <typename S>
struct Grads {
    std::vector<Layer<S>> layers;
    MatX<S> input;  // gradient w.r.t. the input batch
};

template <typename S>
Grads<S> backward(const Mlp<S>& net, const ForwardCache<S>& cache,
                  const MatX<S>& upstream) {
    const size_t L = net.layers.size();
    if (cache.acts.size() != L + 1) fail("backward: no recorded forward pass");
    require(upstream.rows() == net.out_dim() &&
                upstream.cols() == cache.acts[0].cols(),
            "backward: upstream shape mismatch");
    Grads<S> g;
    g.layers.resize(L);
    MatX<S> d = upstream;  // dL/d(activation of layer i)
    for (size_t k = L; k-- > 0;) {
        if (k + 1 < L)  // ReLU mask of this layer's own output
            d = d.cwiseProduct(
                (cache.acts[k + 1].array() > S(0)).template cast<S>().matrix());
        g.layers[k].w = d * cache.acts[k].transpose();
        g.layers[k].b = d.rowwise().sum();
        d = net.layers[k].w.transpose() * d;
    }
    g.input = std::move(d);
    return g;
}

template <typename S>
struct AdamState {
    std::vector<Layer<S>> m, v;
    long step = 0;
    S lr = S(3e-4);
    S beta1 = S(0.9), beta2 = S(0.999), eps = S(1e-8);
};

template <typename S>
AdamState<S> make_adam(const Mlp<S>& net, S lr) {
    AdamState<S> st;
    st.lr = lr;
    for (const auto& l : net.layers) {
        Layer<S> z{MatX<S>::Zero(l.w.rows(), l.w.cols()),
                   VecX<S>::Zero(l.b.size())};
        st.m.push_back(z);
        st.v.push_back(std::move(z));
    }
    return st;
}

template <typename S>
void adam_step(AdamState<S>& st, Mlp<S>& net,
               const std::vector<Layer<S>>& grads) {
    require(grads.size() == net.layers.size(), "adam_step: gradient count mismatch");
    for (size_t i = 0; i < grads.size(); ++i)
        if (!grads[i].w.allFinite() || !grads[i].b.allFinite())
            fail("adam_step: non-finite gradient in layer " + std::to_string(i));
    st.step++;
    const S bc1 = S(1) - std::pow(st.beta1, static_cast<S>(st.step));
    const S bc2 = S(1) - std::pow(st.beta2, static_cast<S>(st.step));
    for (size_t i = 0; i < grads.size(); ++i) {
        auto upd = [&](auto& p, auto& m, auto& v, const auto& g) {
            m = st.beta1 * m + (S(1) - st.beta1) * g;
            v = (st.beta2 * v.array() + (S(1) - st.beta2) * g.array().square()).matrix();
            p.array() -=
                st.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + st.eps);
        };
        upd(net.layers[i].w, st.m[i].w, st.v[i].w, grads[i].w);
        upd(net.layers[i].b, st.m[i].b, st.v[i].b, grads[i].b);
    }
}

inline constexpr double kLogStdMin = -20.0, kLogStdMax = 2.0;
inline const double kLog2Pi = std::log(2.0 * M_PI);

// Split a trunk output (2*dim x N) into mean rows and clamped log-std rows.
// clamp_pass is 1 where the raw log-std was strictly inside the clamp range
// (the gradient dies outside it).
template <typename S>
struct HeadOut {
    MatX<S> mean, log_std, clamp_pass;
};

template <typename S>
HeadOut<S> gaussian_head(const MatX<S>& raw, Index dim) {
    require(raw.rows() == 2 * dim, "gaussian_head: trunk output must be 2*dim");
    HeadOut<S> h;
    h.mean = raw.topRows(dim);
    MatX<S> ls = raw.bottomRows(dim);
    h.clamp_pass = ((ls.array() > S(kLogStdMin)) && (ls.array() < S(kLogStdMax)))
                       .template cast<S>()
                       .matrix();
    h.log_std = ls.cwiseMax(S(kLogStdMin)).cwiseMin(S(kLogStdMax));
    return h;
}

// Rebuild the trunk upstream from head gradients, zeroing clamped entries.
template <typename S>
MatX<S> gaussian_head_upstream(const HeadOut<S>& h, const MatX<S>& dmean,
                               const MatX<S>& dlog_std) {
    MatX<S> up(2 * h.mean.rows(), h.mean.cols());
    up.topRows(h.mean.rows()) = dmean;
    up.bottomRows(h.mean.rows()) = dlog_std.cwiseProduct(h.clamp_pass);
    return up;
}

// NLL = 0.5 * sum[ ((target-mean)/sigma)^2 + 2*log_std + log 2pi ]
template <typename S>
S gaussian_nll(const MatX<S>& mean, const MatX<S>& log_std,
               const MatX<S>& target) {
    require(mean.rows() == target.rows() && mean.cols() == target.cols() &&
                mean.rows() == log_std.rows() && mean.cols() == log_std.cols(),
            "gaussian_nll: shape mismatch");
    auto z = ((target - mean).array() * (-log_std.array()).exp()).eval();
    return S(0.5) * (z.square() + S(2) * log_std.array() + S(kLog2Pi)).sum();
}

template <typename S>
void gaussian_nll_grad(const MatX<S>& mean, const MatX<S>& log_std,
                       const MatX<S>& target, MatX<S>& dmean,
                       MatX<S>& dlog_std) {
    MatX<S> inv_var = (S(-2) * log_std.array()).exp().matrix();
    dmean = ((mean - target).array() * inv_var.array()).matrix();
    dlog_std =
        (S(1) - (target - mean).array().square() * inv_var.array()).matrix();
}

template <typename S>
S softplus(S x) {
    return x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// a = tanh(mean + sigma*z); log_prob via the change of variables with the
// stable correction log(1 - tanh^2 u) = 2*(log 2 - u - softplus(-2u)).
template <typename S>
struct SquashSample {
    MatX<S> action;     // dim x N, strictly inside (-1, 1)
    VecX<S> log_prob;   // per sample
    MatX<S> pre_squash; // u = mean + sigma*z
};

template <typename S>
SquashSample<S> squashed_gaussian_sample(const MatX<S>& mean,
                                         const MatX<S>& log_std,
                                         const MatX<S>& z) {
    require(mean.rows() == z.rows() && mean.cols() == z.cols(),
            "squashed_gaussian_sample: noise shape mismatch");
    SquashSample<S> out;
    MatX<S> sigma = log_std.array().exp().matrix();
    out.pre_squash = mean + sigma.cwiseProduct(z);
    out.action = out.pre_squash.array().tanh().matrix();
    out.log_prob.resize(mean.cols());
    for (Index n = 0; n < mean.cols(); ++n) {
        S lp = 0;
        for (Index i = 0; i < mean.rows(); ++i) {
            const S u = out.pre_squash(i, n);
            lp += S(-0.5) * z(i, n) * z(i, n) - log_std(i, n) - S(0.5) * S(kLog2Pi);
            lp -= S(2) * (S(M_LN2) - u - softplus(S(-2) * u));
        }
        out.log_prob[n] = lp;
    }
    return out;
}

// Checkpoint serialization (double precision). Values are stored as hexfloat
// strings so round-trips are bit-exact.
std::string mlp_to_json(const Mlp<double>& net);
Mlp<double> mlp_from_json(const std::string& text);

// Internal hooks used by higher-level checkpoint bundles.
namespace detail {
std::string hexfloat(double v);
double parse_hexfloat(const std::string& s);
}  // namespace detail

}  // namespace quant::nn
