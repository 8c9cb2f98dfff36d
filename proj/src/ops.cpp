#include "mmvdn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mmvdn/kernels.hpp"

namespace mmvdn {
namespace {

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

void accumulate(Tape& t, Var v, const Tensor& g) {
  if (!v.requires_grad()) return;
  float* dst = t.grad_accumulator(v.id()).ptr();
  const float* src = g.ptr();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

// Elementwise op whose derivative is a function of the output value.
template <typename F, typename D>
Var pointwise(Var a, F f, D dydx) {
  Tensor out(a.shape());
  const float* x = a.value().ptr();
  float* y = out.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) y[i] = f(x[i]);
  return a.tape().record(std::move(out), {a}, [a, dydx](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.value(self);
    const Tensor& x = a.value();
    Tensor& ga = t.grad_accumulator(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dydx(x[i], y[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  const float* y = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    accumulate(t, a, g);
    accumulate(t, b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  const float* y = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    accumulate(t, a, g);
    if (b.requires_grad()) {
      Tensor& gb = t.grad_accumulator(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  const float* y = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    if (a.requires_grad()) {
      Tensor& ga = t.grad_accumulator(a.id());
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = t.grad_accumulator(b.id());
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, float factor) {
  return pointwise(
      a, [factor](float x) { return x * factor; }, [factor](float, float) { return factor; });
}

Var sum(Var a) {
  float acc = 0.f;
  for (float x : a.value().data()) acc += x;
  return a.tape().record(Tensor::scalar(acc), {a}, [a](Tape& t, int self) {
    const float g = t.upstream(self)[0];
    Tensor& ga = t.grad_accumulator(a.id());
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var relu(Var a) {
  return pointwise(
      a, [](float x) { return x > 0.f ? x : 0.f; }, [](float x, float) { return x > 0.f ? 1.f : 0.f; });
}

Var sigmoid(Var a) {
  return pointwise(
      a, [](float x) { return 1.f / (1.f + std::exp(-x)); }, [](float, float y) { return y * (1.f - y); });
}

Var tanh(Var a) {
  return pointwise(
      a, [](float x) { return std::tanh(x); }, [](float, float y) { return 1.f - y * y; });
}

Var matmul(Var a, Var b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool vec = sb.size() == 1;
  if (sa.size() != 2 || (sb.size() != 1 && sb.size() != 2) || sa[1] != sb[0]) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  }
  const int m = sa[0];
  const int k = sa[1];
  const int n = vec ? 1 : sb[1];
  Tensor out(vec ? Shape{m} : Shape{m, n});
  kernels::active().gemm_nn(m, n, k, a.value().ptr(), b.value().ptr(), out.ptr());
  return a.tape().record(std::move(out), {a, b}, [a, b, m, n, k](Tape& t, int self) {
    const auto& kt = kernels::active();
    const float* g = t.upstream(self).ptr();
    // dA = G * B^T, dB = A^T * G
    if (a.requires_grad()) kt.gemm_nt(m, k, n, g, b.value().ptr(), t.grad_accumulator(a.id()).ptr());
    if (b.requires_grad()) kt.gemm_tn(k, n, m, a.value().ptr(), g, t.grad_accumulator(b.id()).ptr());
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape shape = parts[0].shape();
  int lead = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != shape.size() || !std::equal(s.begin() + 1, s.end(), shape.begin() + 1)) {
      throw std::invalid_argument("concat: trailing extents differ between " + shape_str(shape) + " and " +
                                  shape_str(s));
    }
    lead += s[0];
  }
  shape[0] = lead;
  Tensor out(shape);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.ptr(), v.ptr() + v.size(), out.ptr() + offset);
    offset += v.size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [inputs](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    std::size_t off = 0;
    for (const Var& p : inputs) {
      const std::size_t len = p.value().size();
      if (p.requires_grad()) {
        Tensor& gp = t.grad_accumulator(p.id());
        for (std::size_t i = 0; i < len; ++i) gp[i] += g[off + i];
      }
      off += len;
    }
  });
}

Var slice(Var a, int begin, int end) {
  const Shape& s = a.shape();
  if (begin < 0 || end > s[0] || begin >= end) {
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") out of bounds for " + shape_str(s));
  }
  const std::size_t inner = a.value().size() / static_cast<std::size_t>(s[0]);
  Shape shape = s;
  shape[0] = end - begin;
  const float* src = a.value().ptr() + inner * static_cast<std::size_t>(begin);
  Tensor out(shape, std::vector<float>(src, src + inner * static_cast<std::size_t>(end - begin)));
  return a.tape().record(std::move(out), {a}, [a, begin, inner](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    float* dst = t.grad_accumulator(a.id()).ptr() + inner * static_cast<std::size_t>(begin);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [a](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_accumulator(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

namespace {

struct ConvGeom {
  int c, h, w, k, stride, pad, oh, ow;
};

// col[(c * k + ky) * k + kx][oy * ow + ox]
void im2col(const ConvGeom& g, const float* in, float* col) {
  const int plane = g.oh * g.ow;
  for (int c = 0; c < g.c; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        float* row = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * plane;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          float* dst = row + oy * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.ow, 0.f);
            continue;
          }
          const float* src = in + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.f;
          }
        }
      }
    }
  }
}

void col2im(const ConvGeom& g, const float* col, float* in) {
  const int plane = g.oh * g.ow;
  for (int c = 0; c < g.c; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const float* row = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * plane;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          float* dst = in + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var input, Var weight, Var bias, int stride, int pad) {
  const Shape& si = input.shape();
  const Shape& sw = weight.shape();
  if (si.size() != 3 || sw.size() != 4 || sw[2] != sw[3] || si[0] != sw[1]) {
    throw std::invalid_argument("conv2d: input " + shape_str(si) + " incompatible with weight " + shape_str(sw));
  }
  if (bias.shape() != Shape{sw[0]}) {
    throw std::invalid_argument("conv2d: bias " + shape_str(bias.shape()) + " does not match weight " +
                                shape_str(sw));
  }
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: stride must be >= 1 and pad >= 0");
  const int k = sw[2];
  if (si[1] + 2 * pad < k || si[2] + 2 * pad < k) {
    throw std::invalid_argument("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                                shape_str(si));
  }
  const ConvGeom g{si[0], si[1], si[2], k, stride, pad, (si[1] + 2 * pad - k) / stride + 1,
                   (si[2] + 2 * pad - k) / stride + 1};
  const int cout = sw[0];
  const int ckk = g.c * k * k;
  const int plane = g.oh * g.ow;

  auto col = std::make_shared<std::vector<float>>(static_cast<std::size_t>(ckk) * plane);
  im2col(g, input.value().ptr(), col->data());

  Tensor out({cout, g.oh, g.ow});
  const float* b = bias.value().ptr();
  for (int o = 0; o < cout; ++o) std::fill_n(out.ptr() + static_cast<std::size_t>(o) * plane, plane, b[o]);
  kernels::active().gemm_nn(cout, plane, ckk, weight.value().ptr(), col->data(), out.ptr());

  return input.tape().record(
      std::move(out), {input, weight, bias}, [input, weight, bias, g, cout, ckk, plane, col](Tape& t, int self) {
        const auto& kt = kernels::active();
        const float* dy = t.upstream(self).ptr();
        if (weight.requires_grad()) kt.gemm_nt(cout, ckk, plane, dy, col->data(), t.grad_accumulator(weight.id()).ptr());
        if (bias.requires_grad()) {
          Tensor& gb = t.grad_accumulator(bias.id());
          for (int o = 0; o < cout; ++o) {
            float acc = 0.f;
            for (int i = 0; i < plane; ++i) acc += dy[static_cast<std::size_t>(o) * plane + i];
            gb[static_cast<std::size_t>(o)] += acc;
          }
        }
        if (input.requires_grad()) {
          std::vector<float> dcol(static_cast<std::size_t>(ckk) * plane, 0.f);
          kt.gemm_tn(ckk, plane, cout, weight.value().ptr(), dy, dcol.data());
          col2im(g, dcol.data(), t.grad_accumulator(input.id()).ptr());
        }
      });
}

PoolResult maxpool2d(Var input, int kernel, int stride) {
  const Shape& s = input.shape();
  if (s.size() != 3) throw std::invalid_argument("maxpool2d: expected [C x H x W], got " + shape_str(s));
  if (kernel < 1 || stride < 1) throw std::invalid_argument("maxpool2d: kernel and stride must be >= 1");
  if (kernel > s[1] || kernel > s[2]) {
    throw std::invalid_argument("maxpool2d: kernel " + std::to_string(kernel) + " exceeds input " + shape_str(s));
  }
  const int c = s[0], h = s[1], w = s[2];
  const int oh = (h - kernel) / stride + 1;
  const int ow = (w - kernel) / stride + 1;
  Tensor out({c, oh, ow});
  std::vector<int> argmax(static_cast<std::size_t>(c) * oh * ow);
  const Tensor& x = input.value();
  for (int ch = 0; ch < c; ++ch) {
    const float* plane = x.ptr() + static_cast<std::size_t>(ch) * h * w;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        int best = (oy * stride) * w + ox * stride;
        for (int ky = 0; ky < kernel; ++ky) {
          for (int kx = 0; kx < kernel; ++kx) {
            const int idx = (oy * stride + ky) * w + ox * stride + kx;
            if (plane[idx] > plane[best]) best = idx;
          }
        }
        const std::size_t o = (static_cast<std::size_t>(ch) * oh + oy) * ow + ox;
        out[o] = plane[best];
        argmax[o] = best;
      }
    }
  }
  auto routes = std::make_shared<std::vector<int>>(argmax);
  Var v = input.tape().record(std::move(out), {input}, [input, routes, h, w, oh, ow](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    Tensor& gi = t.grad_accumulator(input.id());
    const std::size_t per = static_cast<std::size_t>(oh) * ow;
    for (std::size_t o = 0; o < g.size(); ++o) {
      const std::size_t ch = o / per;
      gi[ch * static_cast<std::size_t>(h) * w + static_cast<std::size_t>((*routes)[o])] += g[o];
    }
  });
  return {v, std::move(argmax)};
}

MaxResult elementwise_max(Var a, Var b) {
  require_same_shape("elementwise_max", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.shape());
  std::vector<std::uint8_t> mask(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = y[i] > x[i] ? 1 : 0;
    out[i] = mask[i] ? y[i] : x[i];
  }
  auto routes = std::make_shared<std::vector<std::uint8_t>>(mask);
  Var v = a.tape().record(std::move(out), {a, b}, [a, b, routes](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    const auto& m = *routes;
    if (a.requires_grad()) {
      Tensor& ga = t.grad_accumulator(a.id());
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!m[i]) ga[i] += g[i];
      }
    }
    if (b.requires_grad()) {
      Tensor& gb = t.grad_accumulator(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (m[i]) gb[i] += g[i];
      }
    }
  });
  return {v, std::move(mask)};
}

SpatialMaxResult spatial_max(Var map) {
  const Shape& s = map.shape();
  if (s.size() != 3) throw std::invalid_argument("spatial_max: expected [C x H x W], got " + shape_str(s));
  const int c = s[0];
  const std::size_t plane = static_cast<std::size_t>(s[1]) * s[2];
  const Tensor& x = map.value();
  Tensor out({c});
  std::vector<int> argmax(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    const float* p = x.ptr() + static_cast<std::size_t>(ch) * plane;
    std::size_t best = 0;
    for (std::size_t i = 1; i < plane; ++i) {
      if (p[i] > p[best]) best = i;
    }
    out[static_cast<std::size_t>(ch)] = p[best];
    argmax[static_cast<std::size_t>(ch)] = static_cast<int>(best);
  }
  auto routes = std::make_shared<std::vector<int>>(argmax);
  Var v = map.tape().record(std::move(out), {map}, [map, routes, plane](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    Tensor& gm = t.grad_accumulator(map.id());
    for (std::size_t ch = 0; ch < g.size(); ++ch) gm[ch * plane + static_cast<std::size_t>((*routes)[ch])] += g[ch];
  });
  return {v, std::move(argmax)};
}

std::vector<float> softmax(std::span<const float> logits) {
  std::vector<float> p(logits.size());
  if (logits.empty()) return p;
  const float mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    total += p[i];
  }
  for (float& v : p) v = static_cast<float>(v / total);
  return p;
}

Var softmax_cross_entropy(Var logits, int target) {
  const Tensor& z = logits.value();
  if (logits.shape().size() != 1) {
    throw std::invalid_argument("softmax_cross_entropy: logits must be a vector, got " + shape_str(logits.shape()));
  }
  if (target < 0 || static_cast<std::size_t>(target) >= z.size()) {
    throw std::invalid_argument("softmax_cross_entropy: target " + std::to_string(target) +
                                " out of range for vocabulary of " + std::to_string(z.size()));
  }
  const float mx = *std::max_element(z.data().begin(), z.data().end());
  double total = 0.0;
  for (float v : z.data()) total += std::exp(static_cast<double>(v - mx));
  const double log_norm = static_cast<double>(mx) + std::log(total);
  const float loss = static_cast<float>(log_norm - z[static_cast<std::size_t>(target)]);
  return logits.tape().record(Tensor::scalar(loss), {logits}, [logits, target](Tape& t, int self) {
    const float g = t.upstream(self)[0];
    std::vector<float> p = softmax(logits.value().data());
    p[static_cast<std::size_t>(target)] -= 1.f;
    Tensor& gl = t.grad_accumulator(logits.id());
    for (std::size_t i = 0; i < p.size(); ++i) gl[i] += g * p[i];
  });
}

}  // namespace mmvdn
