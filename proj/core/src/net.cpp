#include "alc/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "model blobs are little-endian");

namespace alc {
namespace {

std::size_t plane(const Tensor& t) {
    return static_cast<std::size_t>(t.dim(1)) * static_cast<std::size_t>(t.dim(2));
}

// dw9[ky][kx] += sum_{y,x} dout(y,x) * in(y+ky-1, x+kx-1), the weight
// gradient of one (oc, ic) pair, again with the x taps fused.
void corr3x3_wgrad(const double* ip, const double* dop, double* dw9, int h, int wd) {
    for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        double a0 = 0.0, a1 = 0.0, a2 = 0.0;
        for (int y = y0; y < y1; ++y) {
            const double* drow = dop + static_cast<std::size_t>(y) * wd;
            const double* irow = ip + static_cast<std::size_t>(y + dy) * wd;
            if (wd == 1) {
                a1 += drow[0] * irow[0];
                continue;
            }
            a1 += drow[0] * irow[0];
            a2 += drow[0] * irow[1];
            for (int x = 1; x < wd - 1; ++x) {
                a0 += drow[x] * irow[x - 1];
                a1 += drow[x] * irow[x];
                a2 += drow[x] * irow[x + 1];
            }
            a0 += drow[wd - 1] * irow[wd - 2];
            a1 += drow[wd - 1] * irow[wd - 1];
        }
        dw9[ky * 3] += a0;
        dw9[ky * 3 + 1] += a1;
        dw9[ky * 3 + 2] += a2;
    }
}

// Gather core shared by the forward pass and the input gradient:
// out(oc) = bias(oc) + sum_ic corr3x3(in(ic), w(oc,ic)). Each output row
// accumulates every input channel in a row buffer and is stored once.
void conv3x3_gather(const double* in, int ci, const double* w, const double* bias,
                    double* out, int co, int h, int wd) {
    std::vector<double> accbuf(static_cast<std::size_t>(wd));
    double* acc = accbuf.data();
    const std::size_t pl = static_cast<std::size_t>(h) * wd;
    for (int oc = 0; oc < co; ++oc) {
        double* op = out + static_cast<std::size_t>(oc) * pl;
        const double bz = bias ? bias[oc] : 0.0;
        for (int y = 0; y < h; ++y) {
            std::fill(acc, acc + wd, bz);
            for (int ic = 0; ic < ci; ++ic) {
                const double* ip = in + static_cast<std::size_t>(ic) * pl;
                const double* w9 = w + (static_cast<std::size_t>(oc) * ci + ic) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    const double* irow = ip + static_cast<std::size_t>(sy) * wd;
                    const double w0 = w9[ky * 3], w1 = w9[ky * 3 + 1], w2 = w9[ky * 3 + 2];
                    if (wd == 1) {
                        acc[0] += w1 * irow[0];
                        continue;
                    }
                    acc[0] += w1 * irow[0] + w2 * irow[1];
                    for (int x = 1; x < wd - 1; ++x)
                        acc[x] += w0 * irow[x - 1] + w1 * irow[x] + w2 * irow[x + 1];
                    acc[wd - 1] += w0 * irow[wd - 2] + w1 * irow[wd - 1];
                }
            }
            std::copy(acc, acc + wd, op + static_cast<std::size_t>(y) * wd);
        }
    }
}

// out(oc,y,x) = b(oc) + sum_ic sum_k w(oc,ic,ky,kx) * in(ic,y+ky-1,x+kx-1),
// zero padded.
Tensor conv3x3(const Tensor& in, const Tensor& w, const Tensor& b) {
    const int ci = in.dim(0), h = in.dim(1), wd = in.dim(2), co = w.dim(0);
    Tensor out = Tensor::zeros({co, h, wd});
    conv3x3_gather(in.data.data(), ci, w.data.data(), b.data.data(), out.data.data(), co, h,
                   wd);
    return out;
}

// Accumulates dW/dB and returns dIn. dIn is the correlation of dOut with
// the flipped kernel transposed across the channel axes, so it reuses the
// gather core with dOut's channels acting as the input channels.
Tensor conv3x3_backward(const Tensor& in, const Tensor& w, const Tensor& dout,
                        Tensor& dw, Tensor& db) {
    const int ci = in.dim(0), h = in.dim(1), wd = in.dim(2), co = w.dim(0);
    Tensor din = Tensor::zeros(in.shape);
    const std::size_t pl = plane(in);
    for (int oc = 0; oc < co; ++oc) {
        const double* dop = dout.data.data() + static_cast<std::size_t>(oc) * pl;
        double acc_b = 0.0;
        for (std::size_t i = 0; i < pl; ++i) acc_b += dop[i];
        db.data[static_cast<std::size_t>(oc)] += acc_b;
        for (int ic = 0; ic < ci; ++ic)
            corr3x3_wgrad(in.data.data() + static_cast<std::size_t>(ic) * pl, dop,
                          dw.data.data() + (static_cast<std::size_t>(oc) * ci + ic) * 9, h,
                          wd);
    }
    std::vector<double> wt(static_cast<std::size_t>(ci) * co * 9);
    for (int oc = 0; oc < co; ++oc)
        for (int ic = 0; ic < ci; ++ic) {
            const double* src = w.data.data() + (static_cast<std::size_t>(oc) * ci + ic) * 9;
            double* dst = wt.data() + (static_cast<std::size_t>(ic) * co + oc) * 9;
            for (int k = 0; k < 9; ++k) dst[k] = src[8 - k];
        }
    conv3x3_gather(dout.data.data(), co, wt.data(), nullptr, din.data.data(), ci, h, wd);
    return din;
}

Tensor conv1x1(const Tensor& in, const Tensor& w, const Tensor& b) {
    const int ci = in.dim(0), h = in.dim(1), wd = in.dim(2), co = w.dim(0);
    Tensor out = Tensor::zeros({co, h, wd});
    const std::size_t pl = plane(in);
    for (int oc = 0; oc < co; ++oc) {
        double* op = out.data.data() + static_cast<std::size_t>(oc) * pl;
        const double bias = b.data[static_cast<std::size_t>(oc)];
        for (std::size_t i = 0; i < pl; ++i) op[i] = bias;
        for (int ic = 0; ic < ci; ++ic) {
            const double wv = w.at(oc, ic, 0, 0);
            const double* ip = in.data.data() + static_cast<std::size_t>(ic) * pl;
            for (std::size_t i = 0; i < pl; ++i) op[i] += wv * ip[i];
        }
    }
    return out;
}

Tensor conv1x1_backward(const Tensor& in, const Tensor& w, const Tensor& dout,
                        Tensor& dw, Tensor& db) {
    const int ci = in.dim(0), co = w.dim(0);
    Tensor din = Tensor::zeros(in.shape);
    const std::size_t pl = plane(in);
    for (int oc = 0; oc < co; ++oc) {
        const double* dop = dout.data.data() + static_cast<std::size_t>(oc) * pl;
        double acc_b = 0.0;
        for (std::size_t i = 0; i < pl; ++i) acc_b += dop[i];
        db.data[static_cast<std::size_t>(oc)] += acc_b;
        for (int ic = 0; ic < ci; ++ic) {
            const double* ip = in.data.data() + static_cast<std::size_t>(ic) * pl;
            double* dip = din.data.data() + static_cast<std::size_t>(ic) * pl;
            const double wv = w.at(oc, ic, 0, 0);
            double acc_w = 0.0;
            for (std::size_t i = 0; i < pl; ++i) {
                acc_w += ip[i] * dop[i];
                dip[i] += wv * dop[i];
            }
            dw.at(oc, ic, 0, 0) += acc_w;
        }
    }
    return din;
}

void relu_inplace(Tensor& t) {
    for (double& v : t.data)
        if (v < 0.0) v = 0.0;
}

// Gradient gate from the recorded post-ReLU output.
void relu_backward_inplace(Tensor& g, const Tensor& out) {
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (out.data[i] <= 0.0) g.data[i] = 0.0;
}

Tensor maxpool2(const Tensor& in, std::vector<int>& argmax) {
    const int c = in.dim(0), h = in.dim(1), w = in.dim(2);
    Tensor out = Tensor::zeros({c, h / 2, w / 2});
    argmax.assign(out.numel(), 0);
    std::size_t o = 0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; y += 2)
            for (int x = 0; x < w; x += 2) {
                int best = (ch * h + y) * w + x;
                double bv = in.data[static_cast<std::size_t>(best)];
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx = (ch * h + y + dy) * w + x + dx;
                        const double v = in.data[static_cast<std::size_t>(idx)];
                        if (v > bv) {  // ties keep the first (scan-order) cell
                            bv = v;
                            best = idx;
                        }
                    }
                out.data[o] = bv;
                argmax[o] = best;
                ++o;
            }
    return out;
}

Tensor maxpool2_backward(const Tensor& dout, const std::vector<int>& argmax,
                         const std::vector<int>& in_shape) {
    Tensor din = Tensor::zeros(in_shape);
    for (std::size_t i = 0; i < dout.data.size(); ++i)
        din.data[static_cast<std::size_t>(argmax[i])] += dout.data[i];
    return din;
}

Tensor upsample2(const Tensor& in) {
    const int c = in.dim(0), h = in.dim(1), w = in.dim(2);
    Tensor out = Tensor::zeros({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < 2 * h; ++y) {
            const double* irow =
                in.data.data() + (static_cast<std::size_t>(ch) * h + y / 2) * w;
            double* orow =
                out.data.data() + (static_cast<std::size_t>(ch) * 2 * h + y) * 2 * w;
            for (int x = 0; x < 2 * w; ++x) orow[x] = irow[x / 2];
        }
    return out;
}

Tensor upsample2_backward(const Tensor& dout) {
    const int c = dout.dim(0), h2 = dout.dim(1), w2 = dout.dim(2);
    Tensor din = Tensor::zeros({c, h2 / 2, w2 / 2});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h2; ++y) {
            const double* drow =
                dout.data.data() + (static_cast<std::size_t>(ch) * h2 + y) * w2;
            double* irow =
                din.data.data() + (static_cast<std::size_t>(ch) * (h2 / 2) + y / 2) * (w2 / 2);
            for (int x = 0; x < w2; ++x) irow[x / 2] += drow[x];
        }
    return din;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    Tensor out = Tensor::zeros({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.numel()));
    return out;
}

Tensor softmax_hwc(const Tensor& logits) {
    const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
    Tensor prob = Tensor::zeros({h, w, c});
    const std::size_t pl = plane(logits);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t px = static_cast<std::size_t>(y) * w + x;
            double mx = logits.data[px];
            for (int k = 1; k < c; ++k)
                mx = std::max(mx, logits.data[static_cast<std::size_t>(k) * pl + px]);
            double sum = 0.0;
            for (int k = 0; k < c; ++k) {
                const double e = std::exp(logits.data[static_cast<std::size_t>(k) * pl + px] - mx);
                prob.at(y, x, k) = e;
                sum += e;
            }
            for (int k = 0; k < c; ++k) prob.at(y, x, k) /= sum;
        }
    return prob;
}

Tensor softmax_backward(const Tensor& prob, const Tensor& dprob) {
    const int h = prob.dim(0), w = prob.dim(1), c = prob.dim(2);
    Tensor dlogits = Tensor::zeros({c, h, w});
    const std::size_t pl = static_cast<std::size_t>(h) * w;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double dot = 0.0;
            for (int k = 0; k < c; ++k) dot += dprob.at(y, x, k) * prob.at(y, x, k);
            const std::size_t px = static_cast<std::size_t>(y) * w + x;
            for (int k = 0; k < c; ++k)
                dlogits.data[static_cast<std::size_t>(k) * pl + px] =
                    prob.at(y, x, k) * (dprob.at(y, x, k) - dot);
        }
    return dlogits;
}

struct ParamRefs {
    const Tensor* wa;
    const Tensor* ba;
    const Tensor* wb;
    const Tensor* bb;
};

ParamRefs stage_params(const ModelState& s, const std::string& prefix) {
    ParamRefs r{s.find(prefix + ".conv_a.w"), s.find(prefix + ".conv_a.b"),
                s.find(prefix + ".conv_b.w"), s.find(prefix + ".conv_b.b")};
    if (!r.wa || !r.ba || !r.wb || !r.bb)
        throw std::logic_error("missing parameters for " + prefix);
    return r;
}

struct MutParamRefs {
    Tensor* wa;
    Tensor* ba;
    Tensor* wb;
    Tensor* bb;
};

MutParamRefs stage_params(ModelState& s, const std::string& prefix) {
    MutParamRefs r{s.find(prefix + ".conv_a.w"), s.find(prefix + ".conv_a.b"),
                   s.find(prefix + ".conv_b.w"), s.find(prefix + ".conv_b.b")};
    if (!r.wa || !r.ba || !r.wb || !r.bb)
        throw std::logic_error("missing parameters for " + prefix);
    return r;
}

Tensor image_to_chw(const Tensor& image, int in_channels) {
    if (image.rank() == 2) {
        if (in_channels != 1)
            throw std::invalid_argument("forward: 2D image needs in_channels == 1");
        Tensor x = Tensor::zeros({1, image.dim(0), image.dim(1)});
        x.data = image.data;
        return x;
    }
    if (image.rank() == 3 && image.dim(0) == in_channels) return image;
    throw std::invalid_argument("forward: image shape incompatible with arch");
}

Tensor forward_impl(const ModelState& state, const Tensor& image, const ForwardMode& mode,
                    Tape* tape) {
    const Arch& arch = state.arch;
    arch.validate();
    Tensor x = image_to_chw(image, arch.in_channels);
    const int h = x.dim(1), w = x.dim(2);
    if (h % arch.pool_factor() != 0 || w % arch.pool_factor() != 0)
        throw std::invalid_argument("forward: image sides must be divisible by pool factor");

    const bool stoch = mode.kind == ForwardKind::kStochastic;
    Rng rng(mode.rng_seed);
    if (stoch && mode.input_noise_sigma > 0.0)
        for (double& v : x.data) v += rng.normal(0.0, mode.input_noise_sigma);

    const int d = arch.depth();
    if (tape) {
        tape->enc_in.clear();
        tape->enc_mid.clear();
        tape->enc_out.clear();
        tape->pool_argmax.assign(static_cast<std::size_t>(d) - 1, {});
        tape->dec_in.clear();
        tape->dec_mask.clear();
        tape->dec_mid.clear();
        tape->dec_out.clear();
    }

    std::vector<Tensor> skips;
    Tensor cur = std::move(x);
    for (int i = 0; i < d; ++i) {
        const auto p = stage_params(state, "enc" + std::to_string(i));
        if (tape) tape->enc_in.push_back(cur);
        Tensor mid = conv3x3(cur, *p.wa, *p.ba);
        relu_inplace(mid);
        Tensor out = conv3x3(mid, *p.wb, *p.bb);
        relu_inplace(out);
        if (tape) tape->enc_mid.push_back(std::move(mid));
        if (i < d - 1) {
            std::vector<int> argmax;
            cur = maxpool2(out, argmax);
            if (tape) tape->pool_argmax[static_cast<std::size_t>(i)] = std::move(argmax);
            skips.push_back(std::move(out));
            if (tape) tape->enc_out.push_back(skips.back());
        } else {
            if (tape) tape->enc_out.push_back(out);
            cur = std::move(out);
        }
    }

    for (int t = 0; t < d - 1; ++t) {
        const int j = d - 2 - t;
        const auto p = stage_params(state, "dec" + std::to_string(j));
        Tensor cat = concat_channels(upsample2(cur), skips[static_cast<std::size_t>(j)]);
        Tensor mask;
        if (stoch && mode.dropout_rate > 0.0) {
            const double keep_scale = 1.0 / (1.0 - mode.dropout_rate);
            mask = Tensor::zeros(cat.shape);
            for (std::size_t i = 0; i < cat.data.size(); ++i) {
                const double m = rng.uniform() < mode.dropout_rate ? 0.0 : keep_scale;
                mask.data[i] = m;
                cat.data[i] *= m;
            }
        }
        if (tape) {
            tape->dec_in.push_back(cat);
            tape->dec_mask.push_back(std::move(mask));
        }
        Tensor mid = conv3x3(cat, *p.wa, *p.ba);
        relu_inplace(mid);
        Tensor out = conv3x3(mid, *p.wb, *p.bb);
        relu_inplace(out);
        if (tape) tape->dec_mid.push_back(std::move(mid));
        if (tape) tape->dec_out.push_back(out);
        cur = std::move(out);
    }

    const Tensor* hw = state.find("head.w");
    const Tensor* hb = state.find("head.b");
    if (!hw || !hb) throw std::logic_error("missing head parameters");
    Tensor prob = softmax_hwc(conv1x1(cur, *hw, *hb));
    if (tape) tape->prob = prob;
    return prob;
}

}  // namespace

int Arch::pool_factor() const { return 1 << (depth() - 1); }

void Arch::validate() const {
    if (in_channels < 1) throw std::invalid_argument("arch: in_channels < 1");
    if (n_classes < 2) throw std::invalid_argument("arch: n_classes < 2");
    if (depth() < 2) throw std::invalid_argument("arch: depth < 2");
    for (int v : widths)
        if (v < 4) throw std::invalid_argument("arch: width < 4");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("arch: dropout_rate outside [0,1)");
}

Tensor* ModelState::find(const std::string& name) {
    for (auto& p : params)
        if (p.name == name) return &p.value;
    return nullptr;
}

const Tensor* ModelState::find(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name) return &p.value;
    return nullptr;
}

std::size_t ModelState::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.numel();
    return n;
}

ModelState init_params(const Arch& arch, Rng& rng) {
    arch.validate();
    ModelState s;
    s.arch = arch;
    const int d = arch.depth();

    auto add_conv = [&](const std::string& prefix, int ci, int co, int k) {
        Tensor w = Tensor::zeros({co, ci, k, k});
        const double bound = std::sqrt(6.0 / (ci * k * k));
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        s.params.push_back({prefix + ".w", std::move(w)});
        s.params.push_back({prefix + ".b", Tensor::zeros({co})});
    };

    int ci = arch.in_channels;
    for (int i = 0; i < d; ++i) {
        const int co = arch.widths[static_cast<std::size_t>(i)];
        add_conv("enc" + std::to_string(i) + ".conv_a", ci, co, 3);
        add_conv("enc" + std::to_string(i) + ".conv_b", co, co, 3);
        ci = co;
    }
    for (int j = d - 2; j >= 0; --j) {
        const int wj = arch.widths[static_cast<std::size_t>(j)];
        const int deep = arch.widths[static_cast<std::size_t>(j) + 1];
        add_conv("dec" + std::to_string(j) + ".conv_a", deep + wj, wj, 3);
        add_conv("dec" + std::to_string(j) + ".conv_b", wj, wj, 3);
    }
    add_conv("head", arch.widths[0], arch.n_classes, 1);
    return s;
}

ModelState zeros_like(const ModelState& s) {
    ModelState z;
    z.arch = s.arch;
    z.params.reserve(s.params.size());
    for (const auto& p : s.params) z.params.push_back({p.name, Tensor::zeros(p.value.shape)});
    return z;
}

Tensor forward(const ModelState& state, const Tensor& image, const ForwardMode& mode) {
    return forward_impl(state, image, mode, nullptr);
}

Tensor forward(const ModelState& state, const Tensor& image, const ForwardMode& mode,
               Tape& tape) {
    return forward_impl(state, image, mode, &tape);
}

ModelState backward(const ModelState& state, const Tape& tape, const Tensor& dprob) {
    const Arch& arch = state.arch;
    const int d = arch.depth();
    ModelState grads = zeros_like(state);

    Tensor dcur = softmax_backward(tape.prob, dprob);

    {
        const Tensor* hw = state.find("head.w");
        Tensor* dhw = grads.find("head.w");
        Tensor* dhb = grads.find("head.b");
        dcur = conv1x1_backward(tape.dec_out.back(), *hw, dcur, *dhw, *dhb);
    }

    std::vector<Tensor> dskip(static_cast<std::size_t>(d) - 1);
    for (int t = d - 2; t >= 0; --t) {
        const int j = d - 2 - t;
        const auto p = stage_params(state, "dec" + std::to_string(j));
        auto g = stage_params(grads, "dec" + std::to_string(j));
        const std::size_t ti = static_cast<std::size_t>(t);

        relu_backward_inplace(dcur, tape.dec_out[ti]);
        Tensor dmid = conv3x3_backward(tape.dec_mid[ti], *p.wb, dcur, *g.wb, *g.bb);
        relu_backward_inplace(dmid, tape.dec_mid[ti]);
        Tensor dcat = conv3x3_backward(tape.dec_in[ti], *p.wa, dmid, *g.wa, *g.ba);
        if (tape.dec_mask[ti].numel() > 0)
            for (std::size_t i = 0; i < dcat.data.size(); ++i)
                dcat.data[i] *= tape.dec_mask[ti].data[i];

        const int deep = arch.widths[static_cast<std::size_t>(j) + 1];
        const int hj = dcat.dim(1), wj = dcat.dim(2);
        Tensor dup = Tensor::zeros({deep, hj, wj});
        std::copy(dcat.data.begin(), dcat.data.begin() + static_cast<std::ptrdiff_t>(dup.numel()),
                  dup.data.begin());
        Tensor ds = Tensor::zeros({dcat.dim(0) - deep, hj, wj});
        std::copy(dcat.data.begin() + static_cast<std::ptrdiff_t>(dup.numel()), dcat.data.end(),
                  ds.data.begin());
        dskip[static_cast<std::size_t>(j)] = std::move(ds);
        dcur = upsample2_backward(dup);
    }

    for (int i = d - 1; i >= 0; --i) {
        const auto p = stage_params(state, "enc" + std::to_string(i));
        auto g = stage_params(grads, "enc" + std::to_string(i));
        const std::size_t ii = static_cast<std::size_t>(i);

        Tensor dout;
        if (i == d - 1) {
            dout = std::move(dcur);
        } else {
            dout = maxpool2_backward(dcur, tape.pool_argmax[ii], tape.enc_out[ii].shape);
            const Tensor& extra = dskip[ii];
            for (std::size_t k = 0; k < dout.data.size(); ++k) dout.data[k] += extra.data[k];
        }
        relu_backward_inplace(dout, tape.enc_out[ii]);
        Tensor dmid = conv3x3_backward(tape.enc_mid[ii], *p.wb, dout, *g.wb, *g.bb);
        relu_backward_inplace(dmid, tape.enc_mid[ii]);
        dcur = conv3x3_backward(tape.enc_in[ii], *p.wa, dmid, *g.wa, *g.ba);
    }
    return grads;
}

LossBreakdown loss_and_grad(const ModelState& state, const std::vector<LossItem>& batch,
                            const LossSpec& spec, const ForwardMode& base_mode,
                            ModelState* grad_out) {
    if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
    if (grad_out) *grad_out = zeros_like(state);

    std::size_t n_hs = 0, n_ls = 0, n_n = 0, n_c = 0;
    for (const auto& item : batch) {
        if (item.term == LossTerm::kHs) ++n_hs;
        if (item.term == LossTerm::kLs) ++n_ls;
        if (item.term == LossTerm::kN) ++n_n;
        if (item.consistency_stack) ++n_c;
    }

    LossBreakdown out;
    for (const auto& item : batch) {
        ForwardMode mode = base_mode;
        mode.rng_seed = item.forward_seed;
        Tape tape;
        const Tensor prob = grad_out ? forward(state, item.image, mode, tape)
                                     : forward(state, item.image, mode);

        const double seg = seg_loss(prob, item.label);
        double seg_coeff = 0.0;
        switch (item.term) {
            case LossTerm::kHs:
                out.hs += seg / static_cast<double>(n_hs);
                seg_coeff = spec.use_hs ? 1.0 / static_cast<double>(n_hs) : 0.0;
                break;
            case LossTerm::kLs:
                out.ls += seg / static_cast<double>(n_ls);
                seg_coeff =
                    spec.use_ls ? spec.lambda_now * spec.alpha / static_cast<double>(n_ls) : 0.0;
                break;
            case LossTerm::kN:
                out.n += seg / static_cast<double>(n_n);
                seg_coeff =
                    spec.use_n ? spec.lambda_now * spec.beta / static_cast<double>(n_n) : 0.0;
                break;
        }

        double cons_coeff = 0.0;
        if (item.consistency_stack) {
            out.c += consistency_loss(*item.consistency_stack, prob) / static_cast<double>(n_c);
            cons_coeff = spec.use_c ? spec.lambda_now / static_cast<double>(n_c) : 0.0;
        }

        if (grad_out && (seg_coeff != 0.0 || cons_coeff != 0.0)) {
            Tensor dprob = Tensor::zeros(prob.shape);
            if (seg_coeff != 0.0) {
                const Tensor g = seg_loss_grad(prob, item.label);
                for (std::size_t i = 0; i < dprob.data.size(); ++i)
                    dprob.data[i] += seg_coeff * g.data[i];
            }
            if (cons_coeff != 0.0) {
                const Tensor g = consistency_grad(*item.consistency_stack, prob);
                for (std::size_t i = 0; i < dprob.data.size(); ++i)
                    dprob.data[i] += cons_coeff * g.data[i];
            }
            const ModelState g = backward(state, tape, dprob);
            for (std::size_t pi = 0; pi < g.params.size(); ++pi) {
                auto& dst = grad_out->params[pi].value.data;
                const auto& src = g.params[pi].value.data;
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
            }
        }
    }

    out.total = total_loss(out.hs, out.ls, out.n, out.c, spec);
    if (grad_out)
        for (const auto& p : grad_out->params)
            if (!p.value.all_finite())
                throw std::runtime_error("loss_and_grad: non-finite gradient in " + p.name);
    return out;
}

void save_model_blob(const ModelState& s, const std::filesystem::path& file) {
    std::ofstream f(file, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    for (const auto& p : s.params) {
        std::vector<float> buf(p.value.data.size());
        for (std::size_t i = 0; i < buf.size(); ++i)
            buf[i] = static_cast<float>(p.value.data[i]);
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!f) throw std::runtime_error("short write: " + file.string());
}

void load_model_blob(ModelState& s, const std::filesystem::path& file) {
    std::ifstream f(file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + file.string());
    for (auto& p : s.params) {
        std::vector<float> buf(p.value.data.size());
        f.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (f.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
            throw std::runtime_error("truncated blob: " + file.string());
        for (std::size_t i = 0; i < buf.size(); ++i)
            p.value.data[i] = static_cast<double>(buf[i]);
    }
    if (f.peek() != EOF) throw std::runtime_error("oversized blob: " + file.string());
}

}  // namespace alc
