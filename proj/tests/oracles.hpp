#pragma once

// Independent scalar re-implementations of the recurrent cells, used only to
// cross-check the tensor/tape versions. Plain double loops on flat arrays —
// no Tensor, no Tape — so a bug in the numeric core cannot hide here.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

struct Mat {
    std::size_t rows = 0, cols = 0;
    Vec v;
    double at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec cat(const Vec& a, const Vec& b) {
    Vec r = a;
    r.insert(r.end(), b.begin(), b.end());
    return r;
}

inline Vec cat3(const Vec& a, const Vec& b, const Vec& c) { return cat(cat(a, b), c); }

inline Vec affine(const Mat& w, const Vec& x, const Vec& b) {
    Vec out(w.rows);
    for (std::size_t i = 0; i < w.rows; ++i) {
        double acc = b[i];
        for (std::size_t j = 0; j < w.cols; ++j) acc += w.at(i, j) * x[j];
        out[i] = acc;
    }
    return out;
}

struct GruWeights {
    Mat w_update, w_reset, w_cand;  // hidden x (input + hidden)
    Vec b_update, b_reset, b_cand;
};

// One GRU step: h' = (1 - u) * h + u * c, candidate gated by the reset gate.
inline Vec gru_step(const GruWeights& w, const Vec& x, const Vec& h) {
    Vec xh = cat(x, h);
    Vec u = affine(w.w_update, xh, w.b_update);
    Vec r = affine(w.w_reset, xh, w.b_reset);
    for (auto& v : u) v = sig(v);
    for (auto& v : r) v = sig(v);
    Vec rh(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) rh[i] = r[i] * h[i];
    Vec c = affine(w.w_cand, cat(x, rh), w.b_cand);
    for (auto& v : c) v = std::tanh(v);
    Vec out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) out[i] = (1.0 - u[i]) * h[i] + u[i] * c[i];
    return out;
}

// Latent text feature: run the GRU over the first `true_length` embedded
// tokens, sum the hidden states, squash an affine fusion of the sum.
inline Vec latent_feature(const Mat& embedding, const GruWeights& gru, const Mat& w_fuse,
                          const Vec& b_fuse, const std::vector<std::size_t>& indices,
                          std::size_t true_length, std::size_t hidden_dim) {
    Vec h(hidden_dim, 0.0);
    Vec hsum(hidden_dim, 0.0);
    for (std::size_t t = 0; t < true_length && t < indices.size(); ++t) {
        Vec x(embedding.cols);
        for (std::size_t j = 0; j < embedding.cols; ++j) x[j] = embedding.at(indices[t], j);
        h = gru_step(gru, x, h);
        for (std::size_t i = 0; i < hidden_dim; ++i) hsum[i] += h[i];
    }
    Vec out = affine(w_fuse, hsum, b_fuse);
    for (auto& v : out) v = sig(v);
    return out;
}

struct GduWeights {
    Mat w_forget, w_adjust, w_select_g, w_select_r, w_combine;  // state x (in + 2*state)
    Vec b_forget, b_adjust, b_select_g, b_select_r, b_combine;
};

// Gated diffusive cell: forget/adjust gates mask the two neighbor ports, the
// two selection gates convexly mix the four tanh combinations of masked and
// unmasked ports.
inline Vec gdu_forward(const GduWeights& w, const Vec& x, const Vec& z, const Vec& t) {
    const std::size_t ds = z.size();
    Vec xzt = cat3(x, z, t);
    Vec f = affine(w.w_forget, xzt, w.b_forget);
    Vec e = affine(w.w_adjust, xzt, w.b_adjust);
    Vec g = affine(w.w_select_g, xzt, w.b_select_g);
    Vec r = affine(w.w_select_r, xzt, w.b_select_r);
    for (auto& v : f) v = sig(v);
    for (auto& v : e) v = sig(v);
    for (auto& v : g) v = sig(v);
    for (auto& v : r) v = sig(v);

    Vec zf(ds), te(ds);
    for (std::size_t i = 0; i < ds; ++i) zf[i] = f[i] * z[i];
    for (std::size_t i = 0; i < ds; ++i) te[i] = e[i] * t[i];

    auto mix = [&](const Vec& zz, const Vec& tt) {
        Vec m = affine(w.w_combine, cat3(x, zz, tt), w.b_combine);
        for (auto& v : m) v = std::tanh(v);
        return m;
    };
    Vec u1 = mix(zf, te), u2 = mix(z, te), u3 = mix(zf, t), u4 = mix(z, t);

    Vec h(ds);
    for (std::size_t i = 0; i < ds; ++i) {
        h[i] = g[i] * r[i] * u1[i] + (1.0 - g[i]) * r[i] * u2[i] +
               g[i] * (1.0 - r[i]) * u3[i] + (1.0 - g[i]) * (1.0 - r[i]) * u4[i];
    }
    return h;
}

}  // namespace oracle
