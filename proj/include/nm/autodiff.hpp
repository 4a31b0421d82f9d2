// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nm/errors.hpp"
#include "nm/rng.hpp"
#include "nm/vec.hpp"

namespace nm {

// Dense parameter block with a matching gradient accumulator. cols == 1 for
// plain vectors.
struct ParameterBlock {
    std::string name;
    int rows = 0, cols = 1;
    std::vector<double> value;
    std::vector<double> grad;

    ParameterBlock() = default;
    ParameterBlock(std::string n, int r, int c)
        : name(std::move(n)), rows(r), cols(c), value(size_t(r) * c, 0.0),
          grad(size_t(r) * c, 0.0) {}
    size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

class ParameterSet {
public:
    int add(ParameterBlock block) {
        blocks.push_back(std::move(block));
        return int(blocks.size()) - 1;
    }
    ParameterBlock& operator[](int id) { return blocks[size_t(id)]; }
    const ParameterBlock& operator[](int id) const { return blocks[size_t(id)]; }
    int count() const { return int(blocks.size()); }
    size_t total_size() const {
        size_t n = 0;
        for (const auto& b : blocks) n += b.size();
        return n;
    }
    void zero_grad() {
        for (auto& b : blocks) b.zero_grad();
    }

    std::vector<ParameterBlock> blocks;
};

// Per-chunk gradient accumulator mirroring a ParameterSet's layout. Chunks
// write privately and are reduced in fixed chunk order, which keeps training
// bit-identical for every worker count.
struct GradStore {
    std::vector<std::vector<double>> grads;

    explicit GradStore(const ParameterSet& params) {
        grads.reserve(params.blocks.size());
        for (const auto& b : params.blocks) grads.emplace_back(b.size(), 0.0);
    }
    void clear() {
        for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
    }
    void accumulate_into(ParameterSet& params) const {
        for (size_t i = 0; i < grads.size(); ++i) {
            auto& dst = params.blocks[i].grad;
            const auto& src = grads[i];
            for (size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
        }
    }
};

// --- Tape -------------------------------------------------------------------

// Reverse-mode tape over vector-valued primitives. Values live in a watermark
// arena that is reused across iterations; nodes are plain op codes, so replay
// and backward are allocation-free after warm-up.
class Tape {
    enum class Op : uint8_t {
        leaf,
        affine,        // a = x; params (w_id, b_id)
        relu,
        softplus,
        logistic,
        tanh_scaled,   // c * tanh(x)
        lin_const,     // c * x + c2, elementwise
        exp_neg_scale, // 1 - exp(-c * x)
        mul,           // elementwise, equal lengths
        mul_bcast,     // a: scalar var (len 1), b: vector
        add,           // elementwise, equal lengths
        scale_bcast,   // a: scalar var; out[i] = a[0] * cdata[i]
        add_const,     // out = a + cdata
        concat2,
        hg_bundle,     // a: g (len 1); cdata: cosines; out: phase per cosine
        sh_clamp_bundle, // a: coeffs (3B channel-major); cdata: Y (K x B); out: K x 3
        phase_dot,     // a: phase (K), b: radiance (K x 3); out: 3, scaled by c
        phase_dot_const, // a: phase (K); cdata: weights (K x 3); out: 3
        tonemap,       // x / (1 + x)
        sq_err_const,  // out: len 1, sum (a - cdata)^2
        stop_grad,
    };

    struct VarInfo {
        size_t off;
        int len;
    };

    struct Node {
        Op op;
        int a = -1, b = -1;
        int out = -1;
        int w_id = -1, b_id = -1;  // affine parameters
        size_t coff = 0;           // const arena offset
        int clen = 0;
        double c = 0.0, c2 = 0.0;
    };

public:
    explicit Tape(ParameterSet& params) : params_(&params) {}

    void reset() {
        nodes_.clear();
        vars_.clear();
        vals_.clear();
        grads_.clear();
        consts_.clear();
        consumed_ = false;
    }

    int size() const { return int(nodes_.size()); }
    bool consumed() const { return consumed_; }

    std::span<const double> val(int id) const {
        const VarInfo& v = vars_[size_t(id)];
        return {vals_.data() + v.off, size_t(v.len)};
    }
    double scalar(int id) const { return val(id)[0]; }
    std::span<const double> grad_of(int id) const {
        const VarInfo& v = vars_[size_t(id)];
        return {grads_.data() + v.off, size_t(v.len)};
    }

    // Smallest |preactivation| seen by any rectifier on this tape; used to
    // exclude kink-adjacent parameters from finite-difference checks.
    double min_relu_margin() const { return relu_margin_; }

    int leaf(std::span<const double> x) {
        const int id = alloc(int(x.size()));
        std::copy(x.begin(), x.end(), vals_.begin() + vars_[size_t(id)].off);
        nodes_.push_back({Op::leaf, -1, -1, id});
        return id;
    }

    int affine(int w_id, int b_id, int x) {
        const ParameterBlock& w = (*params_)[w_id];
        const ParameterBlock& b = (*params_)[b_id];
        if (w.cols != vars_[size_t(x)].len || b.rows != w.rows || b.cols != 1)
            throw std::domain_error("tape affine: shape mismatch");
        const int out = alloc(w.rows);
        Node n{Op::affine, x, -1, out, w_id, b_id};
        forward_node(n);
        nodes_.push_back(n);
        return out;
    }

    int relu(int x) { return unary(Op::relu, x); }
    int softplus(int x) { return unary(Op::softplus, x); }
    int logistic(int x) { return unary(Op::logistic, x); }
    int tanh_scaled(int x, double scale) { return unary(Op::tanh_scaled, x, scale); }
    int lin_const(int x, double scale, double offset) {
        return unary(Op::lin_const, x, scale, offset);
    }
    int exp_neg_scale(int x, double scale) { return unary(Op::exp_neg_scale, x, scale); }
    int tonemap(int x) { return unary(Op::tonemap, x); }
    int stop_grad(int x) { return unary(Op::stop_grad, x); }

    int mul(int a, int b) { return binary(Op::mul, a, b, vars_[size_t(a)].len); }
    int add(int a, int b) { return binary(Op::add, a, b, vars_[size_t(a)].len); }
    int mul_bcast(int scalar_var, int vec) {
        return binary(Op::mul_bcast, scalar_var, vec, vars_[size_t(vec)].len);
    }
    int phase_dot(int phase, int radiance, double scale) {
        if (vars_[size_t(radiance)].len != 3 * vars_[size_t(phase)].len)
            throw std::domain_error("tape phase_dot: length mismatch");
        const int out = alloc(3);
        Node n{Op::phase_dot, phase, radiance, out};
        n.c = scale;
        forward_node(n);
        nodes_.push_back(n);
        return out;
    }

    int scale_bcast(int scalar_var, std::span<const double> weights) {
        const int out = alloc(int(weights.size()));
        Node n{Op::scale_bcast, scalar_var, -1, out};
        n.coff = push_consts(weights);
        n.clen = int(weights.size());
        forward_node(n);
        nodes_.push_back(n);
        return out;
    }

    int add_const(int a, std::span<const double> values) {
        if (int(values.size()) != vars_[size_t(a)].len)
            throw std::domain_error("tape add_const: length mismatch");
        const int out = alloc(int(values.size()));
        Node n{Op::add_const, a, -1, out};
        n.coff = push_consts(values);
        n.clen = int(values.size());
        forward_node(n);
        nodes_.push_back(n);
        return out;
    }

    int concat2(int a, int b) {
        const int out = alloc(vars_[size_t(a)].len + vars_[size_t(b)].len);
        Node n{Op::concat2, a, b, out};
        forward_node(n);
        nodes_.push_back(n);
        return out;
    }

    int hg_bundle(int g_var, std::span<const double> cosines) {
        if (vars_[size_t(g_var)].len != 1)
            throw std::domain_error("tape hg_bundle: g must be a scalar var");
        const int out = alloc(int(cosines.size()));
        Node n{Op::hg_bundle, g_var, -1, out};
        n.coff = push_consts(cosines);
        n.clen = int(cosines.size());
        forward_node(n);
        nodes_.push_back(n);
        return out;
    }

    // coeffs: 3B channel-major; basis: K rows of B; output: K x 3 clamped.
    int sh_clamp_bundle(int coeffs, std::span<const double> basis, int k_dirs, int b_size) {
        if (vars_[size_t(coeffs)].len != 3 * b_size || int(basis.size()) != k_dirs * b_size)
            throw std::domain_error("tape sh_clamp_bundle: shape mismatch");
        const int out = alloc(3 * k_dirs);
        Node n{Op::sh_clamp_bundle, coeffs, -1, out};
        n.coff = push_consts(basis);
        n.clen = int(basis.size());
        n.c = double(b_size);
        forward_node(n);
        nodes_.push_back(n);
        return out;
    }

    int sq_err_const(int a, std::span<const double> target) {
        if (int(target.size()) != vars_[size_t(a)].len)
            throw std::domain_error("tape sq_err_const: length mismatch");
        const int out = alloc(1);
        Node n{Op::sq_err_const, a, -1, out};
        n.coff = push_consts(target);
        n.clen = int(target.size());
        forward_node(n);
        nodes_.push_back(n);
        return out;
    }

    // Recomputes every node from the leaves in recorded order.
    void replay_forward() {
        for (Node& n : nodes_)
            if (n.op != Op::leaf) forward_node(n);
    }

    // Reverse sweep seeded with d(loss)/d(output). Gradients accumulate into
    // the given store; a tape can only run backward once per forward pass.
    void backward(int output, std::span<const double> upstream, GradStore& sink) {
        if (consumed_) throw std::logic_error("tape backward: tape already consumed");
        consumed_ = true;
        grads_.assign(vals_.size(), 0.0);
        const VarInfo& ov = vars_[size_t(output)];
        if (int(upstream.size()) != ov.len)
            throw std::domain_error("tape backward: upstream length mismatch");
        std::copy(upstream.begin(), upstream.end(), grads_.begin() + ov.off);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) backward_node(*it, sink);
    }

    void backward(int output, std::span<const double> upstream) {
        GradStore store(*params_);
        backward(output, upstream, store);
        store.accumulate_into(*params_);
    }

private:
    int alloc(int len) {
        vars_.push_back({vals_.size(), len});
        vals_.resize(vals_.size() + size_t(len), 0.0);
        return int(vars_.size()) - 1;
    }

    size_t push_consts(std::span<const double> data) {
        const size_t off = consts_.size();
        consts_.insert(consts_.end(), data.begin(), data.end());
        return off;
    }

    int unary(Op op, int x, double c = 0.0, double c2 = 0.0) {
        const int out = alloc(vars_[size_t(x)].len);
        Node n{op, x, -1, out};
        n.c = c;
        n.c2 = c2;
        forward_node(n);
        nodes_.push_back(n);
        return out;
    }

    int binary(Op op, int a, int b, int out_len) {
        if (op != Op::mul_bcast && vars_[size_t(a)].len != vars_[size_t(b)].len)
            throw std::domain_error("tape binary op: length mismatch");
        if (op == Op::mul_bcast && vars_[size_t(a)].len != 1)
            throw std::domain_error("tape mul_bcast: first operand must be scalar");
        const int out = alloc(out_len);
        Node n{op, a, b, out};
        forward_node(n);
        nodes_.push_back(n);
        return out;
    }

    static double hg_phase(double cos_theta, double g) {
        const double denom = 1.0 + g * g + 2.0 * g * cos_theta;
        return kInvFourPi * (1.0 - g * g) / (denom * std::sqrt(denom));
    }
    static double hg_phase_dg(double cos_theta, double g) {
        const double denom = 1.0 + g * g + 2.0 * g * cos_theta;
        const double root = std::sqrt(denom);
        return kInvFourPi * (-2.0 * g / (denom * root) -
                              1.5 * (1.0 - g * g) * (2.0 * g + 2.0 * cos_theta) /
                                  (denom * denom * root));
    }

    void forward_node(Node& n) {
        const int len = vars_[size_t(n.out)].len;
        double* out = vals_.data() + vars_[size_t(n.out)].off;
        const double* a =
            n.a >= 0 ? vals_.data() + vars_[size_t(n.a)].off : nullptr;
        const double* b =
            n.b >= 0 ? vals_.data() + vars_[size_t(n.b)].off : nullptr;
        const double* cd = consts_.data() + n.coff;
        switch (n.op) {
            case Op::leaf:
                break;
            case Op::affine: {
                const ParameterBlock& w = (*params_)[n.w_id];
                const ParameterBlock& bias = (*params_)[n.b_id];
                for (int r = 0; r < w.rows; ++r) {
                    double s = bias.value[size_t(r)];
                    const double* wr = w.value.data() + size_t(r) * w.cols;
                    for (int c = 0; c < w.cols; ++c) s += wr[c] * a[c];
                    out[r] = s;
                }
                break;
            }
            case Op::relu:
                for (int i = 0; i < len; ++i) {
                    out[i] = a[i] > 0.0 ? a[i] : 0.0;
                    const double m = std::abs(a[i]);
                    if (m < relu_margin_) relu_margin_ = m;
                }
                break;
            case Op::softplus:
                for (int i = 0; i < len; ++i)
                    out[i] = a[i] > 30.0 ? a[i] : std::log1p(std::exp(a[i]));
                break;
            case Op::logistic:
                for (int i = 0; i < len; ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
                break;
            case Op::tanh_scaled:
                for (int i = 0; i < len; ++i) out[i] = n.c * std::tanh(a[i]);
                break;
            case Op::lin_const:
                for (int i = 0; i < len; ++i) out[i] = n.c * a[i] + n.c2;
                break;
            case Op::exp_neg_scale:
                for (int i = 0; i < len; ++i) out[i] = 1.0 - std::exp(-n.c * a[i]);
                break;
            case Op::mul:
                for (int i = 0; i < len; ++i) out[i] = a[i] * b[i];
                break;
            case Op::mul_bcast:
                for (int i = 0; i < len; ++i) out[i] = a[0] * b[i];
                break;
            case Op::add:
                for (int i = 0; i < len; ++i) out[i] = a[i] + b[i];
                break;
            case Op::scale_bcast:
                for (int i = 0; i < len; ++i) out[i] = a[0] * cd[i];
                break;
            case Op::add_const:
                for (int i = 0; i < len; ++i) out[i] = a[i] + cd[i];
                break;
            case Op::concat2: {
                const int la = vars_[size_t(n.a)].len;
                for (int i = 0; i < la; ++i) out[i] = a[i];
                for (int i = la; i < len; ++i) out[i] = b[i - la];
                break;
            }
            case Op::hg_bundle:
                for (int i = 0; i < len; ++i) out[i] = hg_phase(cd[i], a[0]);
                break;
            case Op::sh_clamp_bundle: {
                const int bs = int(n.c);
                const int k_dirs = len / 3;
                for (int k = 0; k < k_dirs; ++k) {
                    const double* y = cd + size_t(k) * bs;
                    for (int ch = 0; ch < 3; ++ch) {
                        double s = 0.0;
                        const double* co = a + size_t(ch) * bs;
                        for (int j = 0; j < bs; ++j) s += co[j] * y[j];
                        out[k * 3 + ch] = s > 0.0 ? s : 0.0;
                    }
                }
                break;
            }
            case Op::phase_dot: {
                const int k_dirs = vars_[size_t(n.a)].len;
                for (int ch = 0; ch < 3; ++ch) {
                    double s = 0.0;
                    for (int k = 0; k < k_dirs; ++k) s += a[k] * b[k * 3 + ch];
                    out[ch] = n.c * s;
                }
                break;
            }
            case Op::phase_dot_const: {
                const int k_dirs = vars_[size_t(n.a)].len;
                for (int ch = 0; ch < 3; ++ch) {
                    double s = 0.0;
                    for (int k = 0; k < k_dirs; ++k) s += a[k] * cd[k * 3 + ch];
                    out[ch] = n.c * s;
                }
                break;
            }
            case Op::tonemap:
                for (int i = 0; i < len; ++i) out[i] = a[i] / (1.0 + a[i]);
                break;
            case Op::sq_err_const: {
                double s = 0.0;
                for (int i = 0; i < n.clen; ++i) {
                    const double d = a[i] - cd[i];
                    s += d * d;
                }
                out[0] = s;
                break;
            }
            case Op::stop_grad:
                for (int i = 0; i < len; ++i) out[i] = a[i];
                break;
        }
    }

    void backward_node(const Node& n, GradStore& sink) {
        const int len = vars_[size_t(n.out)].len;
        const double* g = grads_.data() + vars_[size_t(n.out)].off;
        const double* out = vals_.data() + vars_[size_t(n.out)].off;
        double* ga = n.a >= 0 ? grads_.data() + vars_[size_t(n.a)].off : nullptr;
        double* gb = n.b >= 0 ? grads_.data() + vars_[size_t(n.b)].off : nullptr;
        const double* a = n.a >= 0 ? vals_.data() + vars_[size_t(n.a)].off : nullptr;
        const double* b = n.b >= 0 ? vals_.data() + vars_[size_t(n.b)].off : nullptr;
        const double* cd = consts_.data() + n.coff;
        switch (n.op) {
            case Op::leaf:
            case Op::stop_grad:
                break;
            case Op::affine: {
                const ParameterBlock& w = (*params_)[n.w_id];
                auto& gw = sink.grads[size_t(n.w_id)];
                auto& gbias = sink.grads[size_t(n.b_id)];
                for (int r = 0; r < w.rows; ++r) {
                    const double gr = g[r];
                    if (gr == 0.0) continue;
                    gbias[size_t(r)] += gr;
                    double* gwr = gw.data() + size_t(r) * w.cols;
                    const double* wr = w.value.data() + size_t(r) * w.cols;
                    for (int c = 0; c < w.cols; ++c) {
                        gwr[c] += gr * a[c];
                        ga[c] += gr * wr[c];
                    }
                }
                break;
            }
            case Op::relu:
                for (int i = 0; i < len; ++i)
                    if (a[i] > 0.0) ga[i] += g[i];
                break;
            case Op::softplus:
                for (int i = 0; i < len; ++i) ga[i] += g[i] / (1.0 + std::exp(-a[i]));
                break;
            case Op::logistic:
                for (int i = 0; i < len; ++i) ga[i] += g[i] * out[i] * (1.0 - out[i]);
                break;
            case Op::tanh_scaled:
                for (int i = 0; i < len; ++i) {
                    const double t = out[i] / n.c;
                    ga[i] += g[i] * n.c * (1.0 - t * t);
                }
                break;
            case Op::lin_const:
                for (int i = 0; i < len; ++i) ga[i] += g[i] * n.c;
                break;
            case Op::exp_neg_scale:
                for (int i = 0; i < len; ++i) ga[i] += g[i] * n.c * (1.0 - out[i]);
                break;
            case Op::mul:
                for (int i = 0; i < len; ++i) {
                    ga[i] += g[i] * b[i];
                    gb[i] += g[i] * a[i];
                }
                break;
            case Op::mul_bcast:
                for (int i = 0; i < len; ++i) {
                    ga[0] += g[i] * b[i];
                    gb[i] += g[i] * a[0];
                }
                break;
            case Op::add:
                for (int i = 0; i < len; ++i) {
                    ga[i] += g[i];
                    gb[i] += g[i];
                }
                break;
            case Op::scale_bcast:
                for (int i = 0; i < len; ++i) ga[0] += g[i] * cd[i];
                break;
            case Op::add_const:
                for (int i = 0; i < len; ++i) ga[i] += g[i];
                break;
            case Op::concat2: {
                const int la = vars_[size_t(n.a)].len;
                for (int i = 0; i < la; ++i) ga[i] += g[i];
                for (int i = la; i < len; ++i) gb[i - la] += g[i];
                break;
            }
            case Op::hg_bundle:
                for (int i = 0; i < len; ++i) ga[0] += g[i] * hg_phase_dg(cd[i], a[0]);
                break;
            case Op::sh_clamp_bundle: {
                const int bs = int(n.c);
                const int k_dirs = len / 3;
                for (int k = 0; k < k_dirs; ++k) {
                    const double* y = cd + size_t(k) * bs;
                    for (int ch = 0; ch < 3; ++ch) {
                        if (out[k * 3 + ch] <= 0.0) continue;
                        const double gk = g[k * 3 + ch];
                        if (gk == 0.0) continue;
                        double* gco = ga + size_t(ch) * bs;
                        for (int j = 0; j < bs; ++j) gco[j] += gk * y[j];
                    }
                }
                break;
            }
            case Op::phase_dot: {
                const int k_dirs = vars_[size_t(n.a)].len;
                for (int ch = 0; ch < 3; ++ch) {
                    const double gc = g[ch] * n.c;
                    if (gc == 0.0) continue;
                    for (int k = 0; k < k_dirs; ++k) {
                        ga[k] += gc * b[k * 3 + ch];
                        gb[k * 3 + ch] += gc * a[k];
                    }
                }
                break;
            }
            case Op::phase_dot_const: {
                const int k_dirs = vars_[size_t(n.a)].len;
                for (int ch = 0; ch < 3; ++ch) {
                    const double gc = g[ch] * n.c;
                    if (gc == 0.0) continue;
                    for (int k = 0; k < k_dirs; ++k) ga[k] += gc * cd[k * 3 + ch];
                }
                break;
            }
            case Op::tonemap:
                for (int i = 0; i < len; ++i) {
                    const double d = 1.0 + a[i];
                    ga[i] += g[i] / (d * d);
                }
                break;
            case Op::sq_err_const:
                for (int i = 0; i < n.clen; ++i) ga[i] += g[0] * 2.0 * (a[i] - cd[i]);
                break;
        }
    }

    ParameterSet* params_;
    std::vector<Node> nodes_;
    std::vector<VarInfo> vars_;
    std::vector<double> vals_;
    std::vector<double> grads_;
    std::vector<double> consts_;
    double relu_margin_ = 1e300;
    bool consumed_ = false;
};

// --- MLP --------------------------------------------------------------------

// Layer widths including input: [in, h1, ..., out]. Hidden layers are
// rectified; the output layer is rectified too unless output_linear.
struct MlpSpec {
    std::vector<int> widths;
    bool output_linear = true;

    int layer_count() const { return int(widths.size()) - 1; }
    void validate() const {
        if (widths.size() < 2) throw std::domain_error("MlpSpec: need at least one layer");
        for (int w : widths)
            if (w < 1) throw std::domain_error("MlpSpec: widths must be >= 1");
    }
};

// Glorot-uniform weights; zero biases. Returns block ids [W0, b0, W1, b1, ...].
inline std::vector<int> make_mlp_params(ParameterSet& params, const MlpSpec& spec,
                                        const std::string& prefix, Rng& rng) {
    spec.validate();
    std::vector<int> ids;
    for (int l = 0; l < spec.layer_count(); ++l) {
        const int fan_in = spec.widths[size_t(l)], fan_out = spec.widths[size_t(l) + 1];
        ParameterBlock w(prefix + ".w" + std::to_string(l), fan_out, fan_in);
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : w.value) v = rng.in(-bound, bound);
        ids.push_back(params.add(std::move(w)));
        ids.push_back(params.add(ParameterBlock(prefix + ".b" + std::to_string(l), fan_out, 1)));
    }
    return ids;
}

inline void mlp_forward(const MlpSpec& spec, const ParameterSet& params,
                        std::span<const int> block_ids, std::span<const double> input,
                        std::vector<double>& out) {
    if (int(input.size()) != spec.widths.front())
        throw std::domain_error("mlp_forward: input length mismatch");
    std::vector<double> cur(input.begin(), input.end());
    for (int l = 0; l < spec.layer_count(); ++l) {
        const ParameterBlock& w = params[block_ids[size_t(2 * l)]];
        const ParameterBlock& b = params[block_ids[size_t(2 * l) + 1]];
        out.assign(size_t(w.rows), 0.0);
        for (int r = 0; r < w.rows; ++r) {
            double s = b.value[size_t(r)];
            const double* wr = w.value.data() + size_t(r) * w.cols;
            for (int c = 0; c < w.cols; ++c) s += wr[c] * cur[size_t(c)];
            out[size_t(r)] = s;
        }
        const bool last = l + 1 == spec.layer_count();
        if (!(last && spec.output_linear))
            for (double& v : out) v = v > 0.0 ? v : 0.0;
        if (!last) cur = out;
    }
}

inline std::vector<double> mlp_forward(const MlpSpec& spec, const ParameterSet& params,
                                       std::span<const int> block_ids,
                                       std::span<const double> input) {
    std::vector<double> out;
    mlp_forward(spec, params, block_ids, input, out);
    return out;
}

// Recorded variant: same math, on the tape.
inline int mlp_forward(Tape& tape, const MlpSpec& spec, std::span<const int> block_ids,
                       int input_var) {
    int cur = input_var;
    for (int l = 0; l < spec.layer_count(); ++l) {
        cur = tape.affine(block_ids[size_t(2 * l)], block_ids[size_t(2 * l) + 1], cur);
        const bool last = l + 1 == spec.layer_count();
        if (!(last && spec.output_linear)) cur = tape.relu(cur);
    }
    return cur;
}

// --- Optimizer --------------------------------------------------------------

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m, v;
    int64_t t = 0;

    explicit AdamState(const ParameterSet& params) {
        for (const auto& b : params.blocks) {
            m.emplace_back(b.size(), 0.0);
            v.emplace_back(b.size(), 0.0);
        }
    }
    AdamState() = default;
};

// Standard bias-corrected Adam over the blocks' gradient accumulators. A
// non-finite gradient anywhere rejects the whole step, leaving parameters,
// moments and the step counter untouched.
inline void adam_step(ParameterSet& params, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
    for (const auto& block : params.blocks)
        for (double gv : block.grad)
            if (!std::isfinite(gv))
                throw numerical_error("adam_step: non-finite gradient in block '" + block.name +
                                      "'");
    const int64_t t = state.t + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
    for (size_t i = 0; i < params.blocks.size(); ++i) {
        ParameterBlock& block = params.blocks[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t k = 0; k < block.size(); ++k) {
            const double gv = block.grad[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gv;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gv * gv;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            block.value[k] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
    state.t = t;
}

// Geometric decay between the schedule endpoints; clamps at the final value.
inline double lr_at(int64_t iteration, int64_t total = 200000, double lr0 = 1e-4,
                    double lr1 = 1e-5) {
    if (iteration < 0) throw std::domain_error("lr_at: iteration must be >= 0");
    const double s = std::min(double(iteration) / double(total), 1.0);
    return lr0 * std::pow(lr1 / lr0, s);
}

// --- Finite-difference verification ------------------------------------------

struct GradCheckResult {
    double max_rel_error = 0.0;
    int checked = 0;
    int excluded = 0;
};

// Central differences against analytic gradients, parameter by parameter, in
// double precision. `loss_grad` must zero and then fill params' gradient
// accumulators and return the loss; `loss_probe` returns (loss, min rectifier
// margin) without touching gradients. Parameters whose perturbation brings
// any rectifier preactivation within `kink_margin` of zero are excluded.
inline GradCheckResult grad_check(ParameterSet& params,
                                  const std::function<double()>& loss_grad,
                                  const std::function<std::pair<double, double>()>& loss_probe,
                                  double h = 1e-4, double kink_margin = 1e-3) {
    params.zero_grad();
    loss_grad();
    GradCheckResult result;
    for (auto& block : params.blocks) {
        for (size_t k = 0; k < block.size(); ++k) {
            const double saved = block.value[k];
            block.value[k] = saved + h;
            const auto [lp, margin_p] = loss_probe();
            block.value[k] = saved - h;
            const auto [lm, margin_m] = loss_probe();
            block.value[k] = saved;
            if (margin_p < kink_margin || margin_m < kink_margin) {
                result.excluded++;
                continue;
            }
            const double fd = (lp - lm) / (2.0 * h);
            const double an = block.grad[k];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
            const double rel = std::abs(fd - an) / denom;
            if (std::abs(fd) < 1e-12 && std::abs(an) < 1e-12) continue;
            result.checked++;
            result.max_rel_error = std::max(result.max_rel_error, rel);
        }
    }
    return result;
}

}  // namespace nm
