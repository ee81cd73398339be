#include "kseg/nn.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace kseg::nn {

namespace {

// im2col block size: bounded so the scratch buffer stays small.
int64_t col_block(int64_t K) { return std::max<int64_t>(256, (1 << 21) / K); }

// Per-block output-voxel coordinates, decoded once instead of once per kernel
// offset. base is the channel-plane index of the (pre-offset) top-left input
// corner; it is only valid together with the per-offset bounds check.
struct BlockCoords {
    std::vector<int32_t> iz, iy, ix;
    std::vector<int64_t> base;
    bool interior = false;

    void compute(int64_t n0, int64_t nb, const std::array<int64_t, 3>& out_dims,
                 const std::array<int64_t, 3>& in_dims, int64_t stride, int64_t pad, int64_t k) {
        iz.resize(static_cast<size_t>(nb));
        iy.resize(static_cast<size_t>(nb));
        ix.resize(static_cast<size_t>(nb));
        base.resize(static_cast<size_t>(nb));
        const int64_t HW = out_dims[1] * out_dims[2];
        interior = true;
        for (int64_t j = 0; j < nb; ++j) {
            int64_t n = n0 + j;
            int64_t od = n / HW;
            int64_t rem = n - od * HW;
            int64_t oh = rem / out_dims[2];
            int64_t ow = rem - oh * out_dims[2];
            int64_t z = od * stride - pad, y = oh * stride - pad, x = ow * stride - pad;
            iz[static_cast<size_t>(j)] = static_cast<int32_t>(z);
            iy[static_cast<size_t>(j)] = static_cast<int32_t>(y);
            ix[static_cast<size_t>(j)] = static_cast<int32_t>(x);
            base[static_cast<size_t>(j)] = (z * in_dims[1] + y) * in_dims[2] + x;
            if (z < 0 || z + k > in_dims[0] || y < 0 || y + k > in_dims[1] || x < 0 ||
                x + k > in_dims[2])
                interior = false;
        }
    }
};

void check_input(const Tensor& x, int64_t cin, const char* who) {
    if (x.shape.size() != 4 || x.shape[0] != cin)
        throw std::runtime_error(std::string(who) + ": expected input [" + std::to_string(cin) +
                                 ",D,H,W], got " + shape_str(x.shape));
}

}  // namespace

Tensor& grad_slot(GradStore& g, const std::string& name, const std::vector<int64_t>& shape) {
    auto it = g.find(name);
    if (it == g.end()) it = g.emplace(name, Tensor(shape)).first;
    return it->second;
}

// ---------------------------------------------------------------------------
// Conv3d

void Conv3d::configure(std::string name, int64_t cin_, int64_t cout_, int64_t k_, int64_t stride_,
                       int64_t pad_) {
    weight_name = name + ".weight";
    bias_name = name + ".bias";
    cin = cin_;
    cout = cout_;
    k = k_;
    stride = stride_;
    pad = pad_;
}

void Conv3d::init_params(ParameterStore& store, std::mt19937_64& rng) const {
    int64_t fan_in = cin * k * k * k;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Tensor w({cout, cin, k, k, k});
    for (auto& v : w.data) v = dist(rng);
    store[weight_name] = std::move(w);
    store[bias_name] = Tensor({cout});
}

Tensor Conv3d::forward(const ParameterStore& store, const Tensor& x) {
    check_input(x, cin, "conv3d");
    const Tensor& w = store.at(weight_name);
    const Tensor& b = store.at(bias_name);
    in_dims = {x.shape[1], x.shape[2], x.shape[3]};
    for (int a = 0; a < 3; ++a) {
        out_dims[a] = (in_dims[a] + 2 * pad - k) / stride + 1;
        if (out_dims[a] < 1) throw std::runtime_error("conv3d: output dimension collapsed");
    }
    x_cache = x;

    const int64_t K = cin * k * k * k;
    const int64_t N = out_dims[0] * out_dims[1] * out_dims[2];
    Tensor y({cout, out_dims[0], out_dims[1], out_dims[2]});

    if (k == 1 && stride == 1 && pad == 0) {
        // Pointwise conv: the col matrix would equal x, so multiply directly.
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(cout),
                    static_cast<int>(N), static_cast<int>(cin), 1.0, w.data.data(),
                    static_cast<int>(cin), x.data.data(), static_cast<int>(N), 0.0, y.data.data(),
                    static_cast<int>(N));
    } else {
        const int64_t NB = col_block(K);
        // Reused scratch: every entry dgemm reads is rewritten first.
        static thread_local std::vector<double> col;
        if (col.size() < static_cast<size_t>(K * NB)) col.resize(static_cast<size_t>(K * NB));
        BlockCoords bc;
        for (int64_t n0 = 0; n0 < N; n0 += NB) {
            int64_t nb = std::min(NB, N - n0);
            bc.compute(n0, nb, out_dims, in_dims, stride, pad, k);
            // col[r, j] = x value feeding output voxel n0+j through kernel row r
            for (int64_t ci = 0; ci < cin; ++ci) {
                const double* xc = x.data.data() + ci * in_dims[0] * in_dims[1] * in_dims[2];
                for (int64_t kz = 0; kz < k; ++kz)
                    for (int64_t ky = 0; ky < k; ++ky)
                        for (int64_t kx = 0; kx < k; ++kx) {
                            double* row = col.data() + (((ci * k + kz) * k + ky) * k + kx) * NB;
                            const int64_t koff = (kz * in_dims[1] + ky) * in_dims[2] + kx;
                            if (bc.interior) {
                                for (int64_t j = 0; j < nb; ++j)
                                    row[j] = xc[bc.base[static_cast<size_t>(j)] + koff];
                            } else {
                                for (int64_t j = 0; j < nb; ++j) {
                                    auto id = static_cast<uint64_t>(bc.iz[static_cast<size_t>(j)] + kz);
                                    auto ih = static_cast<uint64_t>(bc.iy[static_cast<size_t>(j)] + ky);
                                    auto iw = static_cast<uint64_t>(bc.ix[static_cast<size_t>(j)] + kx);
                                    row[j] = (id >= static_cast<uint64_t>(in_dims[0]) ||
                                              ih >= static_cast<uint64_t>(in_dims[1]) ||
                                              iw >= static_cast<uint64_t>(in_dims[2]))
                                                 ? 0.0
                                                 : xc[bc.base[static_cast<size_t>(j)] + koff];
                                }
                            }
                        }
            }
            // y[:, n0:n0+nb] = W x col
            cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(cout),
                        static_cast<int>(nb), static_cast<int>(K), 1.0, w.data.data(),
                        static_cast<int>(K), col.data(), static_cast<int>(NB), 0.0,
                        y.data.data() + n0, static_cast<int>(N));
        }
    }
    for (int64_t co = 0; co < cout; ++co) {
        double bias = b.data[static_cast<size_t>(co)];
        double* yc = y.data.data() + co * N;
        for (int64_t n = 0; n < N; ++n) yc[n] += bias;
    }
    return y;
}

Tensor Conv3d::backward(const ParameterStore& store, const Tensor& grad_y, GradStore& grads) {
    const Tensor& w = store.at(weight_name);
    const Tensor& x = x_cache;
    const int64_t K = cin * k * k * k;
    const int64_t N = out_dims[0] * out_dims[1] * out_dims[2];
    if (grad_y.shape != std::vector<int64_t>{cout, out_dims[0], out_dims[1], out_dims[2]})
        throw std::runtime_error("conv3d backward: grad shape mismatch");

    Tensor& gw = grad_slot(grads, weight_name, w.shape);
    Tensor& gb = grad_slot(grads, bias_name, {cout});
    for (int64_t co = 0; co < cout; ++co) {
        const double* gyc = grad_y.data.data() + co * N;
        double acc = 0;
        for (int64_t n = 0; n < N; ++n) acc += gyc[n];
        gb.data[static_cast<size_t>(co)] += acc;
    }

    Tensor gx({cin, in_dims[0], in_dims[1], in_dims[2]});

    if (k == 1 && stride == 1 && pad == 0) {
        // gw += gy x x^T ; gx = W^T x gy
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(cout),
                    static_cast<int>(cin), static_cast<int>(N), 1.0, grad_y.data.data(),
                    static_cast<int>(N), x.data.data(), static_cast<int>(N), 1.0, gw.data.data(),
                    static_cast<int>(cin));
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(cin),
                    static_cast<int>(N), static_cast<int>(cout), 1.0, w.data.data(),
                    static_cast<int>(cin), grad_y.data.data(), static_cast<int>(N), 0.0,
                    gx.data.data(), static_cast<int>(N));
        return gx;
    }

    const int64_t NB = col_block(K);
    static thread_local std::vector<double> col, colg;
    if (col.size() < static_cast<size_t>(K * NB)) col.resize(static_cast<size_t>(K * NB));
    if (colg.size() < static_cast<size_t>(K * NB)) colg.resize(static_cast<size_t>(K * NB));
    BlockCoords bc;

    for (int64_t n0 = 0; n0 < N; n0 += NB) {
        int64_t nb = std::min(NB, N - n0);
        bc.compute(n0, nb, out_dims, in_dims, stride, pad, k);
        // rebuild col for the weight gradient
        for (int64_t ci = 0; ci < cin; ++ci) {
            const double* xc = x.data.data() + ci * in_dims[0] * in_dims[1] * in_dims[2];
            for (int64_t kz = 0; kz < k; ++kz)
                for (int64_t ky = 0; ky < k; ++ky)
                    for (int64_t kx = 0; kx < k; ++kx) {
                        double* row = col.data() + (((ci * k + kz) * k + ky) * k + kx) * NB;
                        const int64_t koff = (kz * in_dims[1] + ky) * in_dims[2] + kx;
                        if (bc.interior) {
                            for (int64_t j = 0; j < nb; ++j)
                                row[j] = xc[bc.base[static_cast<size_t>(j)] + koff];
                        } else {
                            for (int64_t j = 0; j < nb; ++j) {
                                auto id = static_cast<uint64_t>(bc.iz[static_cast<size_t>(j)] + kz);
                                auto ih = static_cast<uint64_t>(bc.iy[static_cast<size_t>(j)] + ky);
                                auto iw = static_cast<uint64_t>(bc.ix[static_cast<size_t>(j)] + kx);
                                row[j] = (id >= static_cast<uint64_t>(in_dims[0]) ||
                                          ih >= static_cast<uint64_t>(in_dims[1]) ||
                                          iw >= static_cast<uint64_t>(in_dims[2]))
                                             ? 0.0
                                             : xc[bc.base[static_cast<size_t>(j)] + koff];
                            }
                        }
                    }
        }
        // gw += gy_block x col^T
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(cout),
                    static_cast<int>(K), static_cast<int>(nb), 1.0, grad_y.data.data() + n0,
                    static_cast<int>(N), col.data(), static_cast<int>(NB), 1.0, gw.data.data(),
                    static_cast<int>(K));
        // colg = W^T x gy_block
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(K),
                    static_cast<int>(nb), static_cast<int>(cout), 1.0, w.data.data(),
                    static_cast<int>(K), grad_y.data.data() + n0, static_cast<int>(N), 0.0,
                    colg.data(), static_cast<int>(NB));
        // col2im scatter-add
        for (int64_t ci = 0; ci < cin; ++ci) {
            double* gxc = gx.data.data() + ci * in_dims[0] * in_dims[1] * in_dims[2];
            for (int64_t kz = 0; kz < k; ++kz)
                for (int64_t ky = 0; ky < k; ++ky)
                    for (int64_t kx = 0; kx < k; ++kx) {
                        const double* row = colg.data() + (((ci * k + kz) * k + ky) * k + kx) * NB;
                        const int64_t koff = (kz * in_dims[1] + ky) * in_dims[2] + kx;
                        if (bc.interior) {
                            for (int64_t j = 0; j < nb; ++j)
                                gxc[bc.base[static_cast<size_t>(j)] + koff] += row[j];
                        } else {
                            for (int64_t j = 0; j < nb; ++j) {
                                auto id = static_cast<uint64_t>(bc.iz[static_cast<size_t>(j)] + kz);
                                auto ih = static_cast<uint64_t>(bc.iy[static_cast<size_t>(j)] + ky);
                                auto iw = static_cast<uint64_t>(bc.ix[static_cast<size_t>(j)] + kx);
                                if (id >= static_cast<uint64_t>(in_dims[0]) ||
                                    ih >= static_cast<uint64_t>(in_dims[1]) ||
                                    iw >= static_cast<uint64_t>(in_dims[2]))
                                    continue;
                                gxc[bc.base[static_cast<size_t>(j)] + koff] += row[j];
                            }
                        }
                    }
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// ConvTranspose3d (kernel 2, stride 2)

void ConvTranspose3d::configure(std::string name, int64_t cin_, int64_t cout_) {
    weight_name = name + ".weight";
    bias_name = name + ".bias";
    cin = cin_;
    cout = cout_;
}

void ConvTranspose3d::init_params(ParameterStore& store, std::mt19937_64& rng) const {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(cin)));
    Tensor w({cin, cout, 2, 2, 2});
    for (auto& v : w.data) v = dist(rng);
    store[weight_name] = std::move(w);
    store[bias_name] = Tensor({cout});
}

Tensor ConvTranspose3d::forward(const ParameterStore& store, const Tensor& x) {
    check_input(x, cin, "conv_transpose3d");
    const Tensor& w = store.at(weight_name);
    const Tensor& b = store.at(bias_name);
    in_dims = {x.shape[1], x.shape[2], x.shape[3]};
    x_cache = x;
    const int64_t Nin = in_dims[0] * in_dims[1] * in_dims[2];
    const int64_t C8 = cout * 8;

    // G[cout*8, Nin] = W^T x X
    std::vector<double> g(static_cast<size_t>(C8 * Nin));
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(C8),
                static_cast<int>(Nin), static_cast<int>(cin), 1.0, w.data.data(),
                static_cast<int>(C8), x.data.data(), static_cast<int>(Nin), 0.0, g.data(),
                static_cast<int>(Nin));

    std::array<int64_t, 3> od = {in_dims[0] * 2, in_dims[1] * 2, in_dims[2] * 2};
    Tensor y({cout, od[0], od[1], od[2]});
    const int64_t Nout = od[0] * od[1] * od[2];
    for (int64_t co = 0; co < cout; ++co) {
        double bias = b.data[static_cast<size_t>(co)];
        double* yc = y.data.data() + co * Nout;
        for (int64_t n = 0; n < Nout; ++n) yc[n] = bias;
        for (int64_t t = 0; t < 8; ++t) {
            int64_t az = t >> 2, ay = (t >> 1) & 1, ax = t & 1;
            const double* gr = g.data() + (co * 8 + t) * Nin;
            for (int64_t z = 0; z < in_dims[0]; ++z)
                for (int64_t yy = 0; yy < in_dims[1]; ++yy) {
                    const double* src = gr + (z * in_dims[1] + yy) * in_dims[2];
                    double* dst =
                        yc + ((2 * z + az) * od[1] + (2 * yy + ay)) * od[2] + ax;
                    for (int64_t xx = 0; xx < in_dims[2]; ++xx) dst[2 * xx] += src[xx];
                }
        }
    }
    return y;
}

Tensor ConvTranspose3d::backward(const ParameterStore& store, const Tensor& grad_y,
                                 GradStore& grads) {
    const Tensor& w = store.at(weight_name);
    const Tensor& x = x_cache;
    const int64_t Nin = in_dims[0] * in_dims[1] * in_dims[2];
    const int64_t C8 = cout * 8;
    std::array<int64_t, 3> od = {in_dims[0] * 2, in_dims[1] * 2, in_dims[2] * 2};
    if (grad_y.shape != std::vector<int64_t>{cout, od[0], od[1], od[2]})
        throw std::runtime_error("conv_transpose3d backward: grad shape mismatch");
    const int64_t Nout = od[0] * od[1] * od[2];

    Tensor& gb = grad_slot(grads, bias_name, {cout});
    for (int64_t co = 0; co < cout; ++co) {
        const double* gyc = grad_y.data.data() + co * Nout;
        double acc = 0;
        for (int64_t n = 0; n < Nout; ++n) acc += gyc[n];
        gb.data[static_cast<size_t>(co)] += acc;
    }

    // Gather grad_y into G8[cout*8, Nin]
    std::vector<double> g8(static_cast<size_t>(C8 * Nin));
    for (int64_t co = 0; co < cout; ++co) {
        const double* gyc = grad_y.data.data() + co * Nout;
        for (int64_t t = 0; t < 8; ++t) {
            int64_t az = t >> 2, ay = (t >> 1) & 1, ax = t & 1;
            double* dst = g8.data() + (co * 8 + t) * Nin;
            for (int64_t z = 0; z < in_dims[0]; ++z)
                for (int64_t yy = 0; yy < in_dims[1]; ++yy) {
                    const double* src =
                        gyc + ((2 * z + az) * od[1] + (2 * yy + ay)) * od[2] + ax;
                    double* row = dst + (z * in_dims[1] + yy) * in_dims[2];
                    for (int64_t xx = 0; xx < in_dims[2]; ++xx) row[xx] = src[2 * xx];
                }
        }
    }

    // gw += X x G8^T
    Tensor& gw = grad_slot(grads, weight_name, w.shape);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(cin),
                static_cast<int>(C8), static_cast<int>(Nin), 1.0, x.data.data(),
                static_cast<int>(Nin), g8.data(), static_cast<int>(Nin), 1.0, gw.data.data(),
                static_cast<int>(C8));
    // gx = W x G8
    Tensor gx({cin, in_dims[0], in_dims[1], in_dims[2]});
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(cin),
                static_cast<int>(Nin), static_cast<int>(C8), 1.0, w.data.data(),
                static_cast<int>(C8), g8.data(), static_cast<int>(Nin), 0.0, gx.data.data(),
                static_cast<int>(Nin));
    return gx;
}

// ---------------------------------------------------------------------------
// GroupNorm

void GroupNorm::configure(std::string name, int64_t channels_, int64_t groups_) {
    scale_name = name + ".scale";
    offset_name = name + ".offset";
    channels = channels_;
    groups = groups_;
    if (groups < 1 || channels % groups != 0)
        throw std::runtime_error("group_norm: groups (" + std::to_string(groups_) +
                                 ") must divide channels (" + std::to_string(channels_) + ")");
}

void GroupNorm::init_params(ParameterStore& store) const {
    Tensor s({channels});
    s.fill(1.0);
    store[scale_name] = std::move(s);
    store[offset_name] = Tensor({channels});
}

Tensor GroupNorm::forward(const ParameterStore& store, const Tensor& x) {
    check_input(x, channels, "group_norm");
    const Tensor& scale = store.at(scale_name);
    const Tensor& offset = store.at(offset_name);
    const int64_t S = x.shape[1] * x.shape[2] * x.shape[3];
    const int64_t cpg = channels / groups;
    Tensor y(x.shape);
    xhat_cache = Tensor(x.shape);
    inv_std_cache.assign(static_cast<size_t>(groups), 0.0);

    for (int64_t g = 0; g < groups; ++g) {
        const double* xg = x.data.data() + g * cpg * S;
        int64_t m = cpg * S;
        double mean = 0;
        for (int64_t i = 0; i < m; ++i) mean += xg[i];
        mean /= static_cast<double>(m);
        double var = 0;
        for (int64_t i = 0; i < m; ++i) var += (xg[i] - mean) * (xg[i] - mean);
        var /= static_cast<double>(m);
        double inv_std = 1.0 / std::sqrt(var + eps);
        inv_std_cache[static_cast<size_t>(g)] = inv_std;
        for (int64_t c = 0; c < cpg; ++c) {
            int64_t ch = g * cpg + c;
            double sc = scale.data[static_cast<size_t>(ch)];
            double of = offset.data[static_cast<size_t>(ch)];
            const double* xi = x.data.data() + ch * S;
            double* xh = xhat_cache.data.data() + ch * S;
            double* yi = y.data.data() + ch * S;
            for (int64_t i = 0; i < S; ++i) {
                xh[i] = (xi[i] - mean) * inv_std;
                yi[i] = xh[i] * sc + of;
            }
        }
    }
    return y;
}

Tensor GroupNorm::backward(const ParameterStore& store, const Tensor& grad_y, GradStore& grads) {
    const Tensor& scale = store.at(scale_name);
    if (grad_y.shape != xhat_cache.shape)
        throw std::runtime_error("group_norm backward: grad shape mismatch");
    const int64_t S = grad_y.shape[1] * grad_y.shape[2] * grad_y.shape[3];
    const int64_t cpg = channels / groups;

    Tensor& gscale = grad_slot(grads, scale_name, {channels});
    Tensor& goffset = grad_slot(grads, offset_name, {channels});
    Tensor gx(grad_y.shape);

    for (int64_t g = 0; g < groups; ++g) {
        int64_t m = cpg * S;
        double inv_std = inv_std_cache[static_cast<size_t>(g)];
        double s1 = 0, s2 = 0;
        for (int64_t c = 0; c < cpg; ++c) {
            int64_t ch = g * cpg + c;
            double sc = scale.data[static_cast<size_t>(ch)];
            const double* gy = grad_y.data.data() + ch * S;
            const double* xh = xhat_cache.data.data() + ch * S;
            double dsc = 0, dof = 0;
            for (int64_t i = 0; i < S; ++i) {
                double dxh = gy[i] * sc;
                s1 += dxh;
                s2 += dxh * xh[i];
                dsc += gy[i] * xh[i];
                dof += gy[i];
            }
            gscale.data[static_cast<size_t>(ch)] += dsc;
            goffset.data[static_cast<size_t>(ch)] += dof;
        }
        double inv_m = 1.0 / static_cast<double>(m);
        for (int64_t c = 0; c < cpg; ++c) {
            int64_t ch = g * cpg + c;
            double sc = scale.data[static_cast<size_t>(ch)];
            const double* gy = grad_y.data.data() + ch * S;
            const double* xh = xhat_cache.data.data() + ch * S;
            double* gxi = gx.data.data() + ch * S;
            for (int64_t i = 0; i < S; ++i) {
                double dxh = gy[i] * sc;
                gxi[i] = inv_std * (dxh - s1 * inv_m - xh[i] * s2 * inv_m);
            }
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// ReLU / pooling / concat

Tensor ReLU::forward(const Tensor& x) {
    Tensor y(x.shape);
    mask_cache.resize(x.data.size());
    for (size_t i = 0; i < x.data.size(); ++i) {
        bool pos = x.data[i] > 0;
        mask_cache[i] = pos;
        y.data[i] = pos ? x.data[i] : 0.0;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& grad_y) const {
    if (grad_y.data.size() != mask_cache.size())
        throw std::runtime_error("relu backward: grad shape mismatch");
    Tensor gx(grad_y.shape);
    for (size_t i = 0; i < grad_y.data.size(); ++i)
        gx.data[i] = mask_cache[i] ? grad_y.data[i] : 0.0;
    return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    if (x.shape.size() != 4) throw std::runtime_error("global_avg_pool: expected [C,D,H,W]");
    in_shape = {x.shape[0], x.shape[1], x.shape[2], x.shape[3]};
    const int64_t S = x.shape[1] * x.shape[2] * x.shape[3];
    Tensor y({x.shape[0]});
    for (int64_t c = 0; c < x.shape[0]; ++c) {
        const double* xc = x.data.data() + c * S;
        double acc = 0;
        for (int64_t i = 0; i < S; ++i) acc += xc[i];
        y.data[static_cast<size_t>(c)] = acc / static_cast<double>(S);
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_y) const {
    const int64_t S = in_shape[1] * in_shape[2] * in_shape[3];
    Tensor gx({in_shape[0], in_shape[1], in_shape[2], in_shape[3]});
    double inv = 1.0 / static_cast<double>(S);
    for (int64_t c = 0; c < in_shape[0]; ++c) {
        double g = grad_y.data[static_cast<size_t>(c)] * inv;
        double* gxc = gx.data.data() + c * S;
        for (int64_t i = 0; i < S; ++i) gxc[i] = g;
    }
    return gx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 4 || b.shape.size() != 4 || a.shape[1] != b.shape[1] ||
        a.shape[2] != b.shape[2] || a.shape[3] != b.shape[3])
        throw std::runtime_error("concat_channels: spatial shape mismatch " + shape_str(a.shape) +
                                 " vs " + shape_str(b.shape));
    Tensor y({a.shape[0] + b.shape[0], a.shape[1], a.shape[2], a.shape[3]});
    std::memcpy(y.data.data(), a.data.data(), a.data.size() * sizeof(double));
    std::memcpy(y.data.data() + a.data.size(), b.data.data(), b.data.size() * sizeof(double));
    return y;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& g, int64_t ca, int64_t cb) {
    if (g.shape[0] != ca + cb) throw std::runtime_error("split_channels: channel count mismatch");
    Tensor ga({ca, g.shape[1], g.shape[2], g.shape[3]});
    Tensor gb({cb, g.shape[1], g.shape[2], g.shape[3]});
    std::memcpy(ga.data.data(), g.data.data(), ga.data.size() * sizeof(double));
    std::memcpy(gb.data.data(), g.data.data() + ga.data.size(), gb.data.size() * sizeof(double));
    return {std::move(ga), std::move(gb)};
}

}  // namespace kseg::nn
