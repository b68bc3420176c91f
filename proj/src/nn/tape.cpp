// radtwin - geometry-conditioned radio propagation prediction for dynamic indoor scenes
// Copyright (C) 2026 radtwin contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "radtwin/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "radtwin/nn/threadpool.hpp"
#include "radtwin/rng.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace radtwin::nn {

namespace {

#if defined(__GLIBC__)
// Activation buffers in the tens of megabytes churn on every batch; keeping
// them on the main heap instead of per-allocation mmap regions avoids a page
// fault storm each step.
struct MallocTuning {
    MallocTuning() {
        mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
        mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    }
};
const MallocTuning malloc_tuning;
#endif

constexpr std::int64_t kParallelFlops = 1 << 15;

void check_2d(const TensorPtr &t, const char *what) {
    if (t->shape.size() != 2)
        throw std::invalid_argument(std::string(what) + " must be 2-D");
}

// C[m,n] (+)= A[m,kd] * B[kd,n]
void mm(const double *a, const double *b, double *c, std::int64_t m, std::int64_t kd,
        std::int64_t n, bool accumulate) {
    auto body = [&](int, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            double *crow = c + i * n;
            if (!accumulate)
                std::fill(crow, crow + n, 0.0);
            const double *arow = a + i * kd;
            for (std::int64_t l = 0; l < kd; ++l) {
                const double av = arow[l];
                if (av == 0.0)
                    continue;
                const double *brow = b + l * n;
                for (std::int64_t j = 0; j < n; ++j)
                    crow[j] += av * brow[j];
            }
        }
    };
    if (m * kd * n >= kParallelFlops)
        ThreadPool::instance().parallel_for(m, body);
    else
        body(0, 0, m);
}

// Dot product with four independent accumulators; the fixed association
// order keeps results reproducible while letting the compiler vectorize.
inline double dot4(const double *a, const double *b, std::int64_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::int64_t l = 0;
    for (; l + 4 <= n; l += 4) {
        s0 += a[l] * b[l];
        s1 += a[l + 1] * b[l + 1];
        s2 += a[l + 2] * b[l + 2];
        s3 += a[l + 3] * b[l + 3];
    }
    for (; l < n; ++l)
        s0 += a[l] * b[l];
    return (s0 + s1) + (s2 + s3);
}

// C[m,n] (+)= A[m,kd] * B[n,kd]^T
void mm_nt(const double *a, const double *b, double *c, std::int64_t m, std::int64_t kd,
           std::int64_t n, bool accumulate) {
    auto body = [&](int, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const double *arow = a + i * kd;
            double *crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) {
                const double acc = dot4(arow, b + j * kd, kd);
                crow[j] = accumulate ? crow[j] + acc : acc;
            }
        }
    };
    if (m * kd * n >= kParallelFlops)
        ThreadPool::instance().parallel_for(m, body);
    else
        body(0, 0, m);
}

// C[m,n] (+)= A[kd,m]^T * B[kd,n]
void mm_tn(const double *a, const double *b, double *c, std::int64_t kd, std::int64_t m,
           std::int64_t n, bool accumulate) {
    auto body = [&](int, std::int64_t lo, std::int64_t hi) {
        if (!accumulate)
            for (std::int64_t l = lo; l < hi; ++l)
                std::fill(c + l * n, c + (l + 1) * n, 0.0);
        for (std::int64_t i = 0; i < kd; ++i) {
            const double *arow = a + i * m;
            const double *brow = b + i * n;
            for (std::int64_t l = lo; l < hi; ++l) {
                const double av = arow[l];
                if (av == 0.0)
                    continue;
                double *crow = c + l * n;
                for (std::int64_t j = 0; j < n; ++j)
                    crow[j] += av * brow[j];
            }
        }
    };
    if (m * kd * n >= kParallelFlops)
        ThreadPool::instance().parallel_for(m, body);
    else
        body(0, 0, m);
}

struct ConvDims {
    int c_in, d, h, w;
    int c_out, kd, kh, kw;
    int stride, pad;
    int od, oh, ow;
};

inline std::int64_t vol_index(int c, int z, int y, int x, int d, int h, int w) {
    (void)d;
    return ((static_cast<std::int64_t>(c) * d + z) * h + y) * w + x;
}

} // namespace

std::vector<double> positional_encoding(const std::vector<double> &p, int bands) {
    if (bands < 1)
        throw std::invalid_argument("positional encoding needs at least one band");
    std::vector<double> out;
    out.reserve(p.size() * 2 * static_cast<std::size_t>(bands));
    for (const double v : p) {
        double freq = kPi;
        for (int l = 0; l < bands; ++l, freq *= 2.0) {
            out.push_back(std::sin(freq * v));
            out.push_back(std::cos(freq * v));
        }
    }
    return out;
}

TensorPtr Tape::result(std::vector<int> shape, bool needs_grad) {
    return make_tensor(std::move(shape), needs_grad);
}

void Tape::record(std::function<void()> fn) { steps_.push_back(std::move(fn)); }

TensorPtr Tape::constant(std::vector<int> shape, std::vector<double> data) {
    return make_tensor(std::move(shape), std::move(data), false);
}

TensorPtr Tape::matmul(const TensorPtr &a, const TensorPtr &b) {
    check_2d(a, "matmul lhs");
    check_2d(b, "matmul rhs");
    if (a->cols() != b->rows())
        throw std::invalid_argument("matmul shape mismatch");
    const std::int64_t m = a->rows(), kd = a->cols(), n = b->cols();
    const bool ng = recording && (a->requires_grad || b->requires_grad);
    TensorPtr out = result({a->rows(), b->cols()}, ng);
    mm(a->data.data(), b->data.data(), out->data.data(), m, kd, n, false);
    if (ng)
        record([a, b, out, m, kd, n] {
            const double *g = out->grad.data();
            if (a->requires_grad) {
                a->ensure_grad();
                mm_nt(g, b->data.data(), a->grad.data(), m, n, kd, true);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                mm_tn(a->data.data(), g, b->grad.data(), m, kd, n, true);
            }
        });
    return out;
}

TensorPtr Tape::matmul_nt(const TensorPtr &a, const TensorPtr &b) {
    check_2d(a, "matmul_nt lhs");
    check_2d(b, "matmul_nt rhs");
    if (a->cols() != b->cols())
        throw std::invalid_argument("matmul_nt shape mismatch");
    const std::int64_t m = a->rows(), kd = a->cols(), n = b->rows();
    const bool ng = recording && (a->requires_grad || b->requires_grad);
    TensorPtr out = result({a->rows(), b->rows()}, ng);
    mm_nt(a->data.data(), b->data.data(), out->data.data(), m, kd, n, false);
    if (ng)
        record([a, b, out, m, kd, n] {
            const double *g = out->grad.data();
            if (a->requires_grad) {
                a->ensure_grad();
                mm(g, b->data.data(), a->grad.data(), m, n, kd, true);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                mm_tn(g, a->data.data(), b->grad.data(), m, n, kd, true);
            }
        });
    return out;
}

TensorPtr Tape::linear(const TensorPtr &x, const TensorPtr &w, const TensorPtr &b) {
    check_2d(x, "linear input");
    check_2d(w, "linear weight");
    if (x->cols() != w->rows() || b->numel() != w->cols())
        throw std::invalid_argument("linear shape mismatch");
    const std::int64_t m = x->rows(), kd = x->cols(), n = w->cols();
    const bool ng = recording && (x->requires_grad || w->requires_grad || b->requires_grad);
    TensorPtr out = result({x->rows(), w->cols()}, ng);
    mm(x->data.data(), w->data.data(), out->data.data(), m, kd, n, false);
    for (std::int64_t i = 0; i < m; ++i) {
        double *row = out->data.data() + i * n;
        for (std::int64_t j = 0; j < n; ++j)
            row[j] += b->data[static_cast<std::size_t>(j)];
    }
    if (ng)
        record([x, w, b, out, m, kd, n] {
            const double *g = out->grad.data();
            if (x->requires_grad) {
                x->ensure_grad();
                mm_nt(g, w->data.data(), x->grad.data(), m, n, kd, true);
            }
            if (w->requires_grad) {
                w->ensure_grad();
                mm_tn(x->data.data(), g, w->grad.data(), m, kd, n, true);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t j = 0; j < n; ++j)
                        b->grad[static_cast<std::size_t>(j)] += g[i * n + j];
            }
        });
    return out;
}

TensorPtr Tape::add(const TensorPtr &a, const TensorPtr &b) {
    if (a->shape != b->shape)
        throw std::invalid_argument("add shape mismatch");
    const bool ng = recording && (a->requires_grad || b->requires_grad);
    TensorPtr out = result(a->shape, ng);
    const std::size_t n = a->data.size();
    for (std::size_t i = 0; i < n; ++i)
        out->data[i] = a->data[i] + b->data[i];
    if (ng)
        record([a, b, out, n] {
            const double *g = out->grad.data();
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    a->grad[i] += g[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    b->grad[i] += g[i];
            }
        });
    return out;
}

TensorPtr Tape::relu(const TensorPtr &x) {
    const bool ng = recording && x->requires_grad;
    TensorPtr out = result(x->shape, ng);
    const std::size_t n = x->data.size();
    for (std::size_t i = 0; i < n; ++i)
        out->data[i] = x->data[i] > 0.0 ? x->data[i] : 0.0;
    if (ng)
        record([x, out, n] {
            x->ensure_grad();
            const double *g = out->grad.data();
            for (std::size_t i = 0; i < n; ++i)
                if (x->data[i] > 0.0)
                    x->grad[i] += g[i];
        });
    return out;
}

TensorPtr Tape::scale(const TensorPtr &x, double s) {
    const bool ng = recording && x->requires_grad;
    TensorPtr out = result(x->shape, ng);
    const std::size_t n = x->data.size();
    for (std::size_t i = 0; i < n; ++i)
        out->data[i] = x->data[i] * s;
    if (ng)
        record([x, out, s, n] {
            x->ensure_grad();
            const double *g = out->grad.data();
            for (std::size_t i = 0; i < n; ++i)
                x->grad[i] += s * g[i];
        });
    return out;
}

TensorPtr Tape::clamp_max(const TensorPtr &x, double cap) {
    const bool ng = recording && x->requires_grad;
    TensorPtr out = result(x->shape, ng);
    const std::size_t n = x->data.size();
    for (std::size_t i = 0; i < n; ++i)
        out->data[i] = std::min(x->data[i], cap);
    if (ng)
        record([x, out, cap, n] {
            x->ensure_grad();
            const double *g = out->grad.data();
            for (std::size_t i = 0; i < n; ++i)
                if (x->data[i] < cap)
                    x->grad[i] += g[i];
        });
    return out;
}

TensorPtr Tape::layer_norm(const TensorPtr &x, const TensorPtr &gamma, const TensorPtr &beta,
                           double eps) {
    check_2d(x, "layer_norm input");
    const std::int64_t m = x->rows(), d = x->cols();
    if (gamma->numel() != d || beta->numel() != d)
        throw std::invalid_argument("layer_norm affine shape mismatch");
    const bool ng =
        recording && (x->requires_grad || gamma->requires_grad || beta->requires_grad);
    TensorPtr out = result(x->shape, ng);

    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m * d));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m));

    auto fwd = [&](int, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const double *row = x->data.data() + i * d;
            double mean = 0.0;
            for (std::int64_t j = 0; j < d; ++j)
                mean += row[j];
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (std::int64_t j = 0; j < d; ++j) {
                const double c = row[j] - mean;
                var += c * c;
            }
            var /= static_cast<double>(d);
            const double is = 1.0 / std::sqrt(var + eps);
            (*inv_std)[static_cast<std::size_t>(i)] = is;
            double *xh = xhat->data() + i * d;
            double *y = out->data.data() + i * d;
            for (std::int64_t j = 0; j < d; ++j) {
                xh[j] = (row[j] - mean) * is;
                y[j] = xh[j] * gamma->data[static_cast<std::size_t>(j)] +
                       beta->data[static_cast<std::size_t>(j)];
            }
        }
    };
    if (m * d >= kParallelFlops)
        ThreadPool::instance().parallel_for(m, fwd);
    else
        fwd(0, 0, m);

    if (ng)
        record([x, gamma, beta, out, xhat, inv_std, m, d] {
            const double *g = out->grad.data();
            if (x->requires_grad) {
                x->ensure_grad();
                auto bwd = [&](int, std::int64_t lo, std::int64_t hi) {
                    for (std::int64_t i = lo; i < hi; ++i) {
                        const double *grow = g + i * d;
                        const double *xh = xhat->data() + i * d;
                        const double is = (*inv_std)[static_cast<std::size_t>(i)];
                        double m1 = 0.0, m2 = 0.0;
                        for (std::int64_t j = 0; j < d; ++j) {
                            const double dxh = grow[j] * gamma->data[static_cast<std::size_t>(j)];
                            m1 += dxh;
                            m2 += dxh * xh[j];
                        }
                        m1 /= static_cast<double>(d);
                        m2 /= static_cast<double>(d);
                        double *xg = x->grad.data() + i * d;
                        for (std::int64_t j = 0; j < d; ++j) {
                            const double dxh = grow[j] * gamma->data[static_cast<std::size_t>(j)];
                            xg[j] += is * (dxh - m1 - xh[j] * m2);
                        }
                    }
                };
                if (m * d >= kParallelFlops)
                    ThreadPool::instance().parallel_for(m, bwd);
                else
                    bwd(0, 0, m);
            }
            if (gamma->requires_grad) {
                gamma->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t j = 0; j < d; ++j)
                        gamma->grad[static_cast<std::size_t>(j)] +=
                            g[i * d + j] * (*xhat)[static_cast<std::size_t>(i * d + j)];
            }
            if (beta->requires_grad) {
                beta->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t j = 0; j < d; ++j)
                        beta->grad[static_cast<std::size_t>(j)] += g[i * d + j];
            }
        });
    return out;
}

TensorPtr Tape::softmax_lastdim(const TensorPtr &x) {
    check_2d(x, "softmax input");
    const std::int64_t m = x->rows(), d = x->cols();
    const bool ng = recording && x->requires_grad;
    TensorPtr out = result(x->shape, ng);

    auto fwd = [&](int, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const double *row = x->data.data() + i * d;
            double *y = out->data.data() + i * d;
            double mx = row[0];
            for (std::int64_t j = 1; j < d; ++j)
                mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (std::int64_t j = 0; j < d; ++j) {
                y[j] = std::exp(row[j] - mx);
                sum += y[j];
            }
            const double inv = 1.0 / sum;
            for (std::int64_t j = 0; j < d; ++j)
                y[j] *= inv;
        }
    };
    if (m * d >= kParallelFlops)
        ThreadPool::instance().parallel_for(m, fwd);
    else
        fwd(0, 0, m);

    if (ng)
        record([x, out, m, d] {
            x->ensure_grad();
            const double *g = out->grad.data();
            auto bwd = [&](int, std::int64_t lo, std::int64_t hi) {
                for (std::int64_t i = lo; i < hi; ++i) {
                    const double *y = out->data.data() + i * d;
                    const double *grow = g + i * d;
                    double s = 0.0;
                    for (std::int64_t j = 0; j < d; ++j)
                        s += y[j] * grow[j];
                    double *xg = x->grad.data() + i * d;
                    for (std::int64_t j = 0; j < d; ++j)
                        xg[j] += y[j] * (grow[j] - s);
                }
            };
            if (m * d >= kParallelFlops)
                ThreadPool::instance().parallel_for(m, bwd);
            else
                bwd(0, 0, m);
        });
    return out;
}

TensorPtr Tape::dropout(const TensorPtr &x, double rate, bool training, std::uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout rate must be in [0, 1)");
    if (!training || rate == 0.0)
        return x; // identity in eval mode

    const std::size_t n = x->data.size();
    const double keep_scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i)
        (*mask)[i] = rng.uniform() < rate ? 0.0 : keep_scale;

    const bool ng = recording && x->requires_grad;
    TensorPtr out = result(x->shape, ng);
    for (std::size_t i = 0; i < n; ++i)
        out->data[i] = x->data[i] * (*mask)[i];
    if (ng)
        record([x, out, mask, n] {
            x->ensure_grad();
            const double *g = out->grad.data();
            for (std::size_t i = 0; i < n; ++i)
                x->grad[i] += g[i] * (*mask)[i];
        });
    return out;
}

TensorPtr Tape::conv3d(const TensorPtr &x, const TensorPtr &kernels, int stride, int padding) {
    if (x->shape.size() != 4)
        throw std::invalid_argument("conv3d input must be [C,D,H,W]");
    if (kernels->shape.size() != 5)
        throw std::invalid_argument("conv3d kernels must be [C_out,C_in,kD,kH,kW]");
    if (stride < 1 || padding < 0)
        throw std::invalid_argument("conv3d bad stride or padding");
    ConvDims cd;
    cd.c_in = x->shape[0];
    cd.d = x->shape[1];
    cd.h = x->shape[2];
    cd.w = x->shape[3];
    cd.c_out = kernels->shape[0];
    cd.kd = kernels->shape[2];
    cd.kh = kernels->shape[3];
    cd.kw = kernels->shape[4];
    cd.stride = stride;
    cd.pad = padding;
    if (kernels->shape[1] != cd.c_in)
        throw std::invalid_argument("conv3d channel mismatch");
    cd.od = (cd.d + 2 * padding - cd.kd) / stride + 1;
    cd.oh = (cd.h + 2 * padding - cd.kh) / stride + 1;
    cd.ow = (cd.w + 2 * padding - cd.kw) / stride + 1;
    if (cd.od < 1 || cd.oh < 1 || cd.ow < 1)
        throw std::invalid_argument("conv3d output would be empty");

    const bool ng = recording && (x->requires_grad || kernels->requires_grad);
    TensorPtr out = result({cd.c_out, cd.od, cd.oh, cd.ow}, ng);

    const std::int64_t ker_per_out =
        static_cast<std::int64_t>(cd.c_in) * cd.kd * cd.kh * cd.kw;

    auto fwd = [&, cd](int, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t co = lo; co < hi; ++co) {
            const double *ker = kernels->data.data() + co * ker_per_out;
            for (int oz = 0; oz < cd.od; ++oz)
                for (int oy = 0; oy < cd.oh; ++oy)
                    for (int ox = 0; ox < cd.ow; ++ox) {
                        double acc = 0.0;
                        for (int ci = 0; ci < cd.c_in; ++ci)
                            for (int kz = 0; kz < cd.kd; ++kz) {
                                const int z = oz * cd.stride - cd.pad + kz;
                                if (z < 0 || z >= cd.d)
                                    continue;
                                for (int ky = 0; ky < cd.kh; ++ky) {
                                    const int y = oy * cd.stride - cd.pad + ky;
                                    if (y < 0 || y >= cd.h)
                                        continue;
                                    for (int kx = 0; kx < cd.kw; ++kx) {
                                        const int xx = ox * cd.stride - cd.pad + kx;
                                        if (xx < 0 || xx >= cd.w)
                                            continue;
                                        acc += x->data[static_cast<std::size_t>(vol_index(
                                                   ci, z, y, xx, cd.d, cd.h, cd.w))] *
                                               ker[((static_cast<std::int64_t>(ci) * cd.kd + kz) *
                                                        cd.kh +
                                                    ky) *
                                                       cd.kw +
                                                   kx];
                                    }
                                }
                            }
                        out->data[static_cast<std::size_t>(
                            vol_index(static_cast<int>(co), oz, oy, ox, cd.od, cd.oh, cd.ow))] =
                            acc;
                    }
        }
    };
    ThreadPool::instance().parallel_for(cd.c_out, fwd);

    if (ng)
        record([x, kernels, out, cd, ker_per_out] {
            const double *g = out->grad.data();
            if (kernels->requires_grad) {
                kernels->ensure_grad();
                auto bwd_ker = [&, cd](int, std::int64_t lo, std::int64_t hi) {
                    for (std::int64_t co = lo; co < hi; ++co) {
                        double *kg = kernels->grad.data() + co * ker_per_out;
                        for (int oz = 0; oz < cd.od; ++oz)
                            for (int oy = 0; oy < cd.oh; ++oy)
                                for (int ox = 0; ox < cd.ow; ++ox) {
                                    const double go = g[static_cast<std::size_t>(vol_index(
                                        static_cast<int>(co), oz, oy, ox, cd.od, cd.oh, cd.ow))];
                                    if (go == 0.0)
                                        continue;
                                    for (int ci = 0; ci < cd.c_in; ++ci)
                                        for (int kz = 0; kz < cd.kd; ++kz) {
                                            const int z = oz * cd.stride - cd.pad + kz;
                                            if (z < 0 || z >= cd.d)
                                                continue;
                                            for (int ky = 0; ky < cd.kh; ++ky) {
                                                const int y = oy * cd.stride - cd.pad + ky;
                                                if (y < 0 || y >= cd.h)
                                                    continue;
                                                for (int kx = 0; kx < cd.kw; ++kx) {
                                                    const int xx = ox * cd.stride - cd.pad + kx;
                                                    if (xx < 0 || xx >= cd.w)
                                                        continue;
                                                    kg[((static_cast<std::int64_t>(ci) * cd.kd +
                                                         kz) *
                                                            cd.kh +
                                                        ky) *
                                                           cd.kw +
                                                       kx] +=
                                                        go *
                                                        x->data[static_cast<std::size_t>(vol_index(
                                                            ci, z, y, xx, cd.d, cd.h, cd.w))];
                                                }
                                            }
                                        }
                                }
                    }
                };
                ThreadPool::instance().parallel_for(cd.c_out, bwd_ker);
            }
            if (x->requires_grad) {
                x->ensure_grad();
                auto bwd_x = [&, cd](int, std::int64_t lo, std::int64_t hi) {
                    for (int co = 0; co < cd.c_out; ++co) {
                        const double *ker = kernels->data.data() + co * ker_per_out;
                        for (int oz = 0; oz < cd.od; ++oz)
                            for (int oy = 0; oy < cd.oh; ++oy)
                                for (int ox = 0; ox < cd.ow; ++ox) {
                                    const double go = g[static_cast<std::size_t>(
                                        vol_index(co, oz, oy, ox, cd.od, cd.oh, cd.ow))];
                                    if (go == 0.0)
                                        continue;
                                    for (std::int64_t ci = lo; ci < hi; ++ci)
                                        for (int kz = 0; kz < cd.kd; ++kz) {
                                            const int z = oz * cd.stride - cd.pad + kz;
                                            if (z < 0 || z >= cd.d)
                                                continue;
                                            for (int ky = 0; ky < cd.kh; ++ky) {
                                                const int y = oy * cd.stride - cd.pad + ky;
                                                if (y < 0 || y >= cd.h)
                                                    continue;
                                                for (int kx = 0; kx < cd.kw; ++kx) {
                                                    const int xx = ox * cd.stride - cd.pad + kx;
                                                    if (xx < 0 || xx >= cd.w)
                                                        continue;
                                                    x->grad[static_cast<std::size_t>(vol_index(
                                                        static_cast<int>(ci), z, y, xx, cd.d,
                                                        cd.h, cd.w))] +=
                                                        go * ker[((ci * cd.kd + kz) * cd.kh + ky) *
                                                                     cd.kw +
                                                                 kx];
                                                }
                                            }
                                        }
                                }
                    }
                };
                ThreadPool::instance().parallel_for(cd.c_in, bwd_x);
            }
        });
    return out;
}

TensorPtr Tape::global_avg_pool(const TensorPtr &x) {
    if (x->shape.size() != 4)
        throw std::invalid_argument("global_avg_pool input must be [C,D,H,W]");
    const int c = x->shape[0];
    const std::int64_t vol = static_cast<std::int64_t>(x->shape[1]) * x->shape[2] * x->shape[3];
    const bool ng = recording && x->requires_grad;
    TensorPtr out = result({1, c}, ng);
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        const double *base = x->data.data() + ch * vol;
        for (std::int64_t i = 0; i < vol; ++i)
            acc += base[i];
        out->data[static_cast<std::size_t>(ch)] = acc / static_cast<double>(vol);
    }
    if (ng)
        record([x, out, c, vol] {
            x->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                const double g = out->grad[static_cast<std::size_t>(ch)] / static_cast<double>(vol);
                double *base = x->grad.data() + ch * vol;
                for (std::int64_t i = 0; i < vol; ++i)
                    base[i] += g;
            }
        });
    return out;
}

TensorPtr Tape::concat_rows(const TensorPtr &a, const TensorPtr &b) {
    check_2d(a, "concat_rows lhs");
    check_2d(b, "concat_rows rhs");
    if (a->cols() != b->cols())
        throw std::invalid_argument("concat_rows width mismatch");
    const bool ng = recording && (a->requires_grad || b->requires_grad);
    TensorPtr out = result({a->rows() + b->rows(), a->cols()}, ng);
    std::copy(a->data.begin(), a->data.end(), out->data.begin());
    std::copy(b->data.begin(), b->data.end(), out->data.begin() + a->data.size());
    if (ng)
        record([a, b, out] {
            const double *g = out->grad.data();
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < a->data.size(); ++i)
                    a->grad[i] += g[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < b->data.size(); ++i)
                    b->grad[i] += g[a->data.size() + i];
            }
        });
    return out;
}

TensorPtr Tape::concat_cols(const TensorPtr &a, const TensorPtr &b) {
    check_2d(a, "concat_cols lhs");
    check_2d(b, "concat_cols rhs");
    if (a->rows() != b->rows())
        throw std::invalid_argument("concat_cols height mismatch");
    const int m = a->rows(), p = a->cols(), q = b->cols();
    const bool ng = recording && (a->requires_grad || b->requires_grad);
    TensorPtr out = result({m, p + q}, ng);
    for (int i = 0; i < m; ++i) {
        std::copy_n(a->data.begin() + static_cast<std::size_t>(i) * p, p,
                    out->data.begin() + static_cast<std::size_t>(i) * (p + q));
        std::copy_n(b->data.begin() + static_cast<std::size_t>(i) * q, q,
                    out->data.begin() + static_cast<std::size_t>(i) * (p + q) + p);
    }
    if (ng)
        record([a, b, out, m, p, q] {
            const double *g = out->grad.data();
            if (a->requires_grad) {
                a->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < p; ++j)
                        a->grad[static_cast<std::size_t>(i) * p + j] +=
                            g[static_cast<std::size_t>(i) * (p + q) + j];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < q; ++j)
                        b->grad[static_cast<std::size_t>(i) * q + j] +=
                            g[static_cast<std::size_t>(i) * (p + q) + p + j];
            }
        });
    return out;
}

TensorPtr Tape::repeat_row(const TensorPtr &x, int n_rows) {
    check_2d(x, "repeat_row input");
    if (x->rows() != 1)
        throw std::invalid_argument("repeat_row expects a single row");
    if (n_rows < 1)
        throw std::invalid_argument("repeat_row needs at least one row");
    const int d = x->cols();
    const bool ng = recording && x->requires_grad;
    TensorPtr out = result({n_rows, d}, ng);
    for (int i = 0; i < n_rows; ++i)
        std::copy_n(x->data.begin(), d, out->data.begin() + static_cast<std::size_t>(i) * d);
    if (ng)
        record([x, out, n_rows, d] {
            x->ensure_grad();
            const double *g = out->grad.data();
            for (int i = 0; i < n_rows; ++i)
                for (int j = 0; j < d; ++j)
                    x->grad[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * d + j];
        });
    return out;
}

TensorPtr Tape::gather_rows(const TensorPtr &x, const std::vector<int> &rows) {
    check_2d(x, "gather_rows input");
    const int d = x->cols();
    for (const int r : rows)
        if (r < 0 || r >= x->rows())
            throw std::out_of_range("gather_rows index out of range");
    const bool ng = recording && x->requires_grad;
    TensorPtr out = result({static_cast<int>(rows.size()), d}, ng);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(x->data.begin() + static_cast<std::size_t>(rows[i]) * d, d,
                    out->data.begin() + i * d);
    if (ng)
        record([x, out, rows, d] {
            x->ensure_grad();
            const double *g = out->grad.data();
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (int j = 0; j < d; ++j)
                    x->grad[static_cast<std::size_t>(rows[i]) * d + j] += g[i * d + j];
        });
    return out;
}

TensorPtr Tape::scatter_rows(const TensorPtr &x, const std::vector<int> &cells,
                             const std::array<int, 3> &dims) {
    check_2d(x, "scatter_rows input");
    if (static_cast<std::size_t>(x->rows()) != cells.size())
        throw std::invalid_argument("scatter_rows needs one cell per row");
    const std::int64_t vol = static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    for (const int cidx : cells)
        if (cidx < 0 || cidx >= vol)
            throw std::out_of_range("scatter_rows cell out of range");
    const int c = x->cols();
    const bool ng = recording && x->requires_grad;
    TensorPtr out = result({c, dims[0], dims[1], dims[2]}, ng);
    for (std::size_t k = 0; k < cells.size(); ++k)
        for (int ch = 0; ch < c; ++ch)
            out->data[static_cast<std::size_t>(ch) * vol + cells[k]] =
                x->data[k * static_cast<std::size_t>(c) + ch];
    if (ng)
        record([x, out, cells, c, vol] {
            x->ensure_grad();
            const double *g = out->grad.data();
            for (std::size_t k = 0; k < cells.size(); ++k)
                for (int ch = 0; ch < c; ++ch)
                    x->grad[k * static_cast<std::size_t>(c) + ch] +=
                        g[static_cast<std::size_t>(ch) * vol + cells[k]];
        });
    return out;
}

TensorPtr Tape::masked_cross_attention(const TensorPtr &q, const TensorPtr &k, const TensorPtr &v,
                                       const TensorPtr &mask_bias) {
    check_2d(q, "attention query");
    check_2d(k, "attention keys");
    check_2d(v, "attention values");
    const int batch = q->rows();
    const int kn = k->rows();
    if (q->cols() != k->cols() || v->rows() != kn)
        throw std::invalid_argument("attention shape mismatch");
    const bool per_row_bias = mask_bias->shape.size() == 2;
    if (per_row_bias) {
        if (mask_bias->rows() != batch || mask_bias->cols() != kn)
            throw std::invalid_argument("attention mask shape mismatch");
    } else if (mask_bias->numel() != kn) {
        throw std::invalid_argument("attention mask shape mismatch");
    }

    // Every query row needs at least one unmasked position.
    for (int b = 0; b < batch; ++b) {
        const double *bias =
            mask_bias->data.data() + (per_row_bias ? static_cast<std::size_t>(b) * kn : 0);
        bool any = false;
        for (int j = 0; j < kn && !any; ++j)
            any = bias[j] == 0.0;
        if (!any)
            throw std::runtime_error("empty attention support");
    }

    TensorPtr scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q->cols())));

    // Bias add; the mask is a constant, no gradient flows into it.
    {
        const bool ng = recording && scores->requires_grad;
        TensorPtr biased = result(scores->shape, ng);
        for (int b = 0; b < batch; ++b) {
            const double *bias =
                mask_bias->data.data() + (per_row_bias ? static_cast<std::size_t>(b) * kn : 0);
            for (int j = 0; j < kn; ++j)
                biased->data[static_cast<std::size_t>(b) * kn + j] =
                    scores->data[static_cast<std::size_t>(b) * kn + j] + bias[j];
        }
        if (ng)
            record([scores, biased] {
                scores->ensure_grad();
                for (std::size_t i = 0; i < scores->grad.size(); ++i)
                    scores->grad[i] += biased->grad[i];
            });
        scores = biased;
    }

    TensorPtr weights = softmax_lastdim(scores);

    // Exact post-softmax zeroing of masked positions. The -1e30 bias already
    // underflows them to zero; this pins the invariant and cuts their
    // gradient path.
    {
        const bool ng = recording && weights->requires_grad;
        TensorPtr zeroed = result(weights->shape, ng);
        for (int b = 0; b < batch; ++b) {
            const double *bias =
                mask_bias->data.data() + (per_row_bias ? static_cast<std::size_t>(b) * kn : 0);
            for (int j = 0; j < kn; ++j) {
                const std::size_t at = static_cast<std::size_t>(b) * kn + j;
                zeroed->data[at] = bias[j] == 0.0 ? weights->data[at] : 0.0;
            }
        }
        if (ng)
            record([weights, zeroed, mask_bias, per_row_bias, batch, kn] {
                weights->ensure_grad();
                for (int b = 0; b < batch; ++b) {
                    const double *bias =
                        mask_bias->data.data() +
                        (per_row_bias ? static_cast<std::size_t>(b) * kn : 0);
                    for (int j = 0; j < kn; ++j) {
                        const std::size_t at = static_cast<std::size_t>(b) * kn + j;
                        if (bias[j] == 0.0)
                            weights->grad[at] += zeroed->grad[at];
                    }
                }
            });
        weights = zeroed;
    }

    return matmul(weights, v);
}

TensorPtr Tape::sparse_cross_attention(const TensorPtr &q, const TensorPtr &k, const TensorPtr &v,
                                       const AttentionIndices &idx) {
    check_2d(q, "attention query");
    check_2d(k, "attention keys");
    check_2d(v, "attention values");
    const int batch = q->rows();
    const int dk = q->cols();
    const int dv = v->cols();
    const int kn = k->rows();
    if (k->cols() != dk || v->rows() != kn)
        throw std::invalid_argument("attention shape mismatch");
    if (idx.batch() != batch)
        throw std::invalid_argument("attention index batch mismatch");
    for (int b = 0; b < batch; ++b)
        if (idx.offsets[static_cast<std::size_t>(b) + 1] <= idx.offsets[static_cast<std::size_t>(b)])
            throw std::runtime_error("empty attention support");
    for (const std::int32_t r : idx.flat)
        if (r < 0 || r >= kn)
            throw std::out_of_range("attention index out of range");

    const double rsqrt = 1.0 / std::sqrt(static_cast<double>(dk));
    const bool ng = recording && (q->requires_grad || k->requires_grad || v->requires_grad);
    TensorPtr out = result({batch, dv}, ng);
    auto weights = std::make_shared<std::vector<double>>(idx.flat.size());
    auto indices = std::make_shared<AttentionIndices>(idx);

    auto fwd = [&](int, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t b = lo; b < hi; ++b) {
            const std::int32_t begin = indices->offsets[static_cast<std::size_t>(b)];
            const std::int32_t end = indices->offsets[static_cast<std::size_t>(b) + 1];
            const double *qrow = q->data.data() + b * dk;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::int32_t t = begin; t < end; ++t) {
                const double *krow = k->data.data() +
                                     static_cast<std::size_t>(indices->flat[static_cast<std::size_t>(t)]) * dk;
                const double s = dot4(qrow, krow, dk) * rsqrt;
                (*weights)[static_cast<std::size_t>(t)] = s;
                mx = std::max(mx, s);
            }
            double sum = 0.0;
            for (std::int32_t t = begin; t < end; ++t) {
                double &wt = (*weights)[static_cast<std::size_t>(t)];
                wt = std::exp(wt - mx);
                sum += wt;
            }
            const double inv = 1.0 / sum;
            double *orow = out->data.data() + b * dv;
            std::fill(orow, orow + dv, 0.0);
            for (std::int32_t t = begin; t < end; ++t) {
                double &wt = (*weights)[static_cast<std::size_t>(t)];
                wt *= inv;
                const double *vrow = v->data.data() +
                                     static_cast<std::size_t>(indices->flat[static_cast<std::size_t>(t)]) * dv;
                for (int j = 0; j < dv; ++j)
                    orow[j] += wt * vrow[j];
            }
        }
    };
    ThreadPool::instance().parallel_for(batch, fwd);

    if (ng)
        record([q, k, v, out, weights, indices, batch, dk, dv, rsqrt] {
            const double *g = out->grad.data();
            const bool need_q = q->requires_grad;
            const bool need_k = k->requires_grad;
            const bool need_v = v->requires_grad;
            if (need_q)
                q->ensure_grad();
            if (need_k)
                k->ensure_grad();
            if (need_v)
                v->ensure_grad();

            const int n_threads = ThreadPool::instance().size();
            const std::size_t kbuf = k->data.size();
            const std::size_t vbuf = v->data.size();
            std::vector<std::vector<double>> dk_scratch, dv_scratch;
            if (need_k)
                dk_scratch.assign(static_cast<std::size_t>(n_threads), std::vector<double>(kbuf, 0.0));
            if (need_v)
                dv_scratch.assign(static_cast<std::size_t>(n_threads), std::vector<double>(vbuf, 0.0));

            auto bwd = [&](int chunk, std::int64_t lo, std::int64_t hi) {
                std::vector<double> ds;
                for (std::int64_t b = lo; b < hi; ++b) {
                    const std::int32_t begin = indices->offsets[static_cast<std::size_t>(b)];
                    const std::int32_t end = indices->offsets[static_cast<std::size_t>(b) + 1];
                    const double *grow = g + b * dv;
                    const double *qrow = q->data.data() + b * dk;

                    ds.assign(static_cast<std::size_t>(end - begin), 0.0);
                    double wdot = 0.0;
                    for (std::int32_t t = begin; t < end; ++t) {
                        const std::int32_t r = indices->flat[static_cast<std::size_t>(t)];
                        const double w = (*weights)[static_cast<std::size_t>(t)];
                        const double *vrow = v->data.data() + static_cast<std::size_t>(r) * dv;
                        const double dw = dot4(grow, vrow, dv);
                        ds[static_cast<std::size_t>(t - begin)] = dw;
                        wdot += w * dw;
                        if (need_v) {
                            double *dvrow =
                                dv_scratch[static_cast<std::size_t>(chunk)].data() +
                                static_cast<std::size_t>(r) * dv;
                            for (int j = 0; j < dv; ++j)
                                dvrow[j] += w * grow[j];
                        }
                    }
                    for (std::int32_t t = begin; t < end; ++t) {
                        const std::int32_t r = indices->flat[static_cast<std::size_t>(t)];
                        const double w = (*weights)[static_cast<std::size_t>(t)];
                        const double dscore =
                            w * (ds[static_cast<std::size_t>(t - begin)] - wdot) * rsqrt;
                        if (need_q) {
                            const double *krow = k->data.data() + static_cast<std::size_t>(r) * dk;
                            double *dqrow = q->grad.data() + b * dk;
                            for (int j = 0; j < dk; ++j)
                                dqrow[j] += dscore * krow[j];
                        }
                        if (need_k) {
                            double *dkrow = dk_scratch[static_cast<std::size_t>(chunk)].data() +
                                            static_cast<std::size_t>(r) * dk;
                            for (int j = 0; j < dk; ++j)
                                dkrow[j] += dscore * qrow[j];
                        }
                    }
                }
            };
            ThreadPool::instance().parallel_for(batch, bwd);

            // Merge per-thread accumulators in a fixed order.
            for (int t = 0; t < n_threads; ++t) {
                if (need_k)
                    for (std::size_t i = 0; i < kbuf; ++i)
                        k->grad[i] += dk_scratch[static_cast<std::size_t>(t)][i];
                if (need_v)
                    for (std::size_t i = 0; i < vbuf; ++i)
                        v->grad[i] += dv_scratch[static_cast<std::size_t>(t)][i];
            }
        });
    return out;
}

TensorPtr Tape::mse_loss(const TensorPtr &pred, const TensorPtr &target) {
    if (pred->shape != target->shape)
        throw std::invalid_argument("mse_loss shape mismatch");
    const std::size_t n = pred->data.size();
    if (n == 0)
        throw std::invalid_argument("mse_loss on empty tensors");
    const bool ng = recording && (pred->requires_grad || target->requires_grad);
    TensorPtr out = result({1}, ng);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred->data[i] - target->data[i];
        acc += d * d;
    }
    out->data[0] = acc / static_cast<double>(n);
    if (ng)
        record([pred, target, out, n] {
            const double g = out->grad[0] * 2.0 / static_cast<double>(n);
            if (pred->requires_grad) {
                pred->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    pred->grad[i] += g * (pred->data[i] - target->data[i]);
            }
            if (target->requires_grad) {
                target->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    target->grad[i] -= g * (pred->data[i] - target->data[i]);
            }
        });
    return out;
}

void Tape::backward(const TensorPtr &loss) {
    if (steps_.empty())
        throw std::runtime_error("backward called before forward");
    if (loss->numel() != 1)
        throw std::invalid_argument("backward needs a scalar loss");
    if (!loss->requires_grad)
        throw std::runtime_error("loss is not connected to the recorded graph");
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it)
        (*it)();
}

void Tape::clear() { steps_.clear(); }

} // namespace radtwin::nn
