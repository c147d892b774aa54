#include "asmamba/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace asmamba::ops {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void require_rank3(const Var& x, const char* what) {
  if (x.value().rank() != 3) {
    throw std::invalid_argument(std::string(what) + ": expected (C,H,W), got " +
                                x.value().shape_string());
  }
}

void require_scalar(const Var& s, const char* what) {
  if (s.value().size() != 1) throw std::invalid_argument(std::string(what) + ": expected scalar");
}

template <class F, class G>
Var unary(const Var& x, F f, G df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_node(std::move(out), {x}, [x, df](const Tensor& g) {
    Tensor* gx = grad_of(x);
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += g[i] * df(xv[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  a.value().check_same(b.value(), "add");
  return make_node(a.value() + b.value(), {a, b}, [a, b](const Tensor& g) {
    accumulate(a, g);
    accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  return make_node(a.value() - b.value(), {a, b}, [a, b](const Tensor& g) {
    accumulate(a, g);
    if (Tensor* gb = grad_of(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  a.value().check_same(b.value(), "mul");
  Tensor out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_node(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (Tensor* ga = grad_of(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b.value()[i];
    }
    if (Tensor* gb = grad_of(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a.value()[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  a.value().check_same(b.value(), "div");
  Tensor out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  return make_node(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (Tensor* ga = grad_of(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / b.value()[i];
    }
    if (Tensor* gb = grad_of(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double bv = b.value()[i];
        (*gb)[i] -= g[i] * a.value()[i] / (bv * bv);
      }
    }
  });
}

Var scale(const Var& x, double s) { return affine(x, s, 0.0); }

Var affine(const Var& x, double a, double b) {
  Tensor out(x.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x.value()[i] + b;
  return make_node(std::move(out), {x}, [x, a](const Tensor& g) {
    if (Tensor* gx = grad_of(x)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += a * g[i];
    }
  });
}

Var scale_by(const Var& x, const Var& s) {
  require_scalar(s, "scale_by");
  const double sv = s.value()[0];
  Tensor out = x.value() * sv;
  return make_node(std::move(out), {x, s}, [x, s](const Tensor& g) {
    const double sv = s.value()[0];
    if (Tensor* gx = grad_of(x)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += sv * g[i];
    }
    if (Tensor* gs = grad_of(s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x.value()[i];
      (*gs)[0] += acc;
    }
  });
}

Var axpby(const Var& cx, const Var& x, const Var& cy, const Var& y) {
  require_scalar(cx, "axpby");
  require_scalar(cy, "axpby");
  x.value().check_same(y.value(), "axpby");
  const double a = cx.value()[0];
  const double b = cy.value()[0];
  Tensor out(x.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x.value()[i] + b * y.value()[i];
  return make_node(std::move(out), {cx, x, cy, y}, [cx, x, cy, y](const Tensor& g) {
    const double a = cx.value()[0];
    const double b = cy.value()[0];
    if (Tensor* gx = grad_of(x)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += a * g[i];
    }
    if (Tensor* gy = grad_of(y)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gy)[i] += b * g[i];
    }
    if (Tensor* ga = grad_of(cx)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x.value()[i];
      (*ga)[0] += acc;
    }
    if (Tensor* gb = grad_of(cy)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * y.value()[i];
      (*gb)[0] += acc;
    }
  });
}

Var mul_const(const Var& x, const Tensor& m) {
  x.value().check_same(m, "mul_const");
  Tensor out(x.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * m[i];
  return make_node(std::move(out), {x}, [x, m](const Tensor& g) {
    Tensor* gx = grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * m[i];
  });
}

Var sum(const Var& x) {
  return make_node(Tensor::scalar(x.value().sum()), {x}, [x](const Tensor& g) {
    Tensor* gx = grad_of(x);
    for (double& v : gx->values()) v += g[0];
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  return make_node(Tensor::scalar(x.value().sum() / n), {x}, [x, n](const Tensor& g) {
    Tensor* gx = grad_of(x);
    for (double& v : gx->values()) v += g[0] / n;
  });
}

Var abs(const Var& x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0 ? v : 0.0; }, [](double v) { return v > 0 ? 1.0 : 0.0; });
}

Var gelu(const Var& x) {
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        return cdf + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      });
}

Var softplus(const Var& x) {
  return unary(
      x, [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 - s);
      });
}

Var exp(const Var& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Var mean_abs_diff(const Var& a, const Var& b) { return mean(abs(sub(a, b))); }

Var masked_mean_abs_diff(const Var& a, const Var& b, const Tensor& mask) {
  a.value().check_same(mask, "masked_mean_abs_diff");
  double weight = mask.sum();
  if (weight <= 0.0) weight = 1.0;
  return scale(sum(mul_const(abs(sub(a, b)), mask)), 1.0 / weight);
}

Var conv2d(const Var& x, const Var& w, const Var& bias) {
  require_rank3(x, "conv2d");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (wv.rank() != 4 || wv.dim(1) != xv.channels() || wv.dim(2) != wv.dim(3) || wv.dim(2) % 2 == 0) {
    throw std::invalid_argument("conv2d: weight " + wv.shape_string() + " incompatible with input " +
                                xv.shape_string());
  }
  const int cin = xv.channels();
  const int h = xv.height();
  const int wd = xv.width();
  const int cout = wv.dim(0);
  const int k = wv.dim(2);
  const int pad = k / 2;
  const bool has_bias = static_cast<bool>(bias);
  if (has_bias && bias.value().size() != static_cast<std::size_t>(cout)) {
    throw std::invalid_argument("conv2d: bias size mismatch");
  }

  Tensor out = Tensor::chw(cout, h, wd);
  for (int co = 0; co < cout; ++co) {
    double* o = out.channel(co);
    if (has_bias) {
      const double bv = bias.value()[static_cast<std::size_t>(co)];
      for (std::size_t i = 0; i < out.plane(); ++i) o[i] = bv;
    }
    for (int ci = 0; ci < cin; ++ci) {
      const double* in = xv.channel(ci);
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double wk = wv[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx];
          if (wk == 0.0) continue;
          const int dy = ky - pad;
          const int dx = kx - pad;
          const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
          for (int y = y0; y < y1; ++y) {
            double* orow = o + static_cast<std::size_t>(y) * wd;
            const double* irow = in + static_cast<std::size_t>(y + dy) * wd + dx;
            for (int xx = x0; xx < x1; ++xx) orow[xx] += wk * irow[xx];
          }
        }
      }
    }
  }

  return make_node(std::move(out), {x, w, bias}, [x, w, bias, cin, cout, h, wd, k, pad](const Tensor& g) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    Tensor* gx = grad_of(x);
    Tensor* gw = grad_of(w);
    Tensor* gb = bias ? grad_of(bias) : nullptr;
    const std::size_t plane = static_cast<std::size_t>(h) * wd;
    for (int co = 0; co < cout; ++co) {
      const double* go = g.data() + static_cast<std::size_t>(co) * plane;
      if (gb) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += go[i];
        (*gb)[static_cast<std::size_t>(co)] += acc;
      }
      for (int ci = 0; ci < cin; ++ci) {
        const double* in = xv.channel(ci);
        double* gin = gx ? gx->channel(ci) : nullptr;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const std::size_t widx = ((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx;
            const double wk = wv[widx];
            const int dy = ky - pad;
            const int dx = kx - pad;
            const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
            const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
            double acc = 0.0;
            for (int y = y0; y < y1; ++y) {
              const double* grow = go + static_cast<std::size_t>(y) * wd;
              const double* irow = in + static_cast<std::size_t>(y + dy) * wd + dx;
              if (gin && wk != 0.0) {
                double* girow = gin + static_cast<std::size_t>(y + dy) * wd + dx;
                for (int xx = x0; xx < x1; ++xx) {
                  acc += grow[xx] * irow[xx];
                  girow[xx] += wk * grow[xx];
                }
              } else {
                for (int xx = x0; xx < x1; ++xx) acc += grow[xx] * irow[xx];
              }
            }
            if (gw) (*gw)[widx] += acc;
          }
        }
      }
    }
  });
}

Var layer_norm_channels(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require_rank3(x, "layer_norm_channels");
  const Tensor& xv = x.value();
  const int c = xv.channels();
  const std::size_t plane = xv.plane();
  if (gamma.value().size() != static_cast<std::size_t>(c) ||
      beta.value().size() != static_cast<std::size_t>(c)) {
    throw std::invalid_argument("layer_norm_channels: affine size mismatch");
  }
  auto mu = std::make_shared<std::vector<double>>(plane, 0.0);
  auto rstd = std::make_shared<std::vector<double>>(plane, 0.0);
  for (int ch = 0; ch < c; ++ch) {
    const double* in = xv.channel(ch);
    for (std::size_t i = 0; i < plane; ++i) (*mu)[i] += in[i];
  }
  for (double& m : *mu) m /= c;
  for (int ch = 0; ch < c; ++ch) {
    const double* in = xv.channel(ch);
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = in[i] - (*mu)[i];
      (*rstd)[i] += d * d;
    }
  }
  for (double& r : *rstd) r = 1.0 / std::sqrt(r / c + eps);

  Tensor out(xv.shape());
  for (int ch = 0; ch < c; ++ch) {
    const double* in = xv.channel(ch);
    double* o = out.channel(ch);
    const double ga = gamma.value()[static_cast<std::size_t>(ch)];
    const double be = beta.value()[static_cast<std::size_t>(ch)];
    for (std::size_t i = 0; i < plane; ++i) o[i] = (in[i] - (*mu)[i]) * (*rstd)[i] * ga + be;
  }

  return make_node(std::move(out), {x, gamma, beta}, [x, gamma, beta, mu, rstd, c, plane](const Tensor& g) {
    const Tensor& xv = x.value();
    Tensor* gx = grad_of(x);
    Tensor* gg = grad_of(gamma);
    Tensor* gbeta = grad_of(beta);
    std::vector<double> mean_gy(plane, 0.0);
    std::vector<double> mean_gy_xhat(plane, 0.0);
    for (int ch = 0; ch < c; ++ch) {
      const double* in = xv.channel(ch);
      const double* go = g.data() + static_cast<std::size_t>(ch) * plane;
      const double ga = gamma.value()[static_cast<std::size_t>(ch)];
      double acc_g = 0.0, acc_b = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double xhat = (in[i] - (*mu)[i]) * (*rstd)[i];
        acc_g += go[i] * xhat;
        acc_b += go[i];
        const double gy = go[i] * ga;
        mean_gy[i] += gy;
        mean_gy_xhat[i] += gy * xhat;
      }
      if (gg) (*gg)[static_cast<std::size_t>(ch)] += acc_g;
      if (gbeta) (*gbeta)[static_cast<std::size_t>(ch)] += acc_b;
    }
    if (!gx) return;
    for (std::size_t i = 0; i < plane; ++i) {
      mean_gy[i] /= c;
      mean_gy_xhat[i] /= c;
    }
    for (int ch = 0; ch < c; ++ch) {
      const double* in = xv.channel(ch);
      const double* go = g.data() + static_cast<std::size_t>(ch) * plane;
      const double ga = gamma.value()[static_cast<std::size_t>(ch)];
      double* gi = gx->channel(ch);
      for (std::size_t i = 0; i < plane; ++i) {
        const double xhat = (in[i] - (*mu)[i]) * (*rstd)[i];
        gi[i] += (*rstd)[i] * (go[i] * ga - mean_gy[i] - xhat * mean_gy_xhat[i]);
      }
    }
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const int h = parts[0].height();
  const int w = parts[0].width();
  int total = 0;
  for (const Var& p : parts) {
    require_rank3(p, "concat_channels");
    if (p.height() != h || p.width() != w) {
      throw std::invalid_argument("concat_channels: spatial size mismatch");
    }
    total += p.channels();
  }
  Tensor out = Tensor::chw(total, h, w);
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off);
    off += p.value().size();
  }
  return make_node(std::move(out), parts, [parts](const Tensor& g) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t n = p.value().size();
      if (Tensor* gp = grad_of(p)) {
        for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[off + i];
      }
      off += n;
    }
  });
}

Var slice_channels(const Var& x, int start, int count) {
  require_rank3(x, "slice_channels");
  if (start < 0 || count <= 0 || start + count > x.channels()) {
    throw std::invalid_argument("slice_channels: range out of bounds");
  }
  const std::size_t plane = x.value().plane();
  Tensor out = Tensor::chw(count, x.height(), x.width());
  const double* src = x.value().data() + static_cast<std::size_t>(start) * plane;
  std::copy(src, src + out.size(), out.data());
  return make_node(std::move(out), {x}, [x, start, plane](const Tensor& g) {
    Tensor* gx = grad_of(x);
    double* dst = gx->data() + static_cast<std::size_t>(start) * plane;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

namespace {

// Source index pair and weights for half-pixel bilinear 2x upsampling.
struct Tap {
  int i0, i1;
  double w0, w1;
};

std::vector<Tap> upsample_taps(int in) {
  std::vector<Tap> taps(static_cast<std::size_t>(2 * in));
  for (int o = 0; o < 2 * in; ++o) {
    double src = (o + 0.5) / 2.0 - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    const double f = src - i0;
    taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0 - f, f};
  }
  return taps;
}

}  // namespace

Var upsample2x(const Var& x) {
  require_rank3(x, "upsample2x");
  const int c = x.channels(), h = x.height(), w = x.width();
  auto ty = std::make_shared<std::vector<Tap>>(upsample_taps(h));
  auto tx = std::make_shared<std::vector<Tap>>(upsample_taps(w));
  Tensor out = Tensor::chw(c, 2 * h, 2 * w);
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < 2 * h; ++oy) {
      const Tap& a = (*ty)[static_cast<std::size_t>(oy)];
      for (int ox = 0; ox < 2 * w; ++ox) {
        const Tap& b = (*tx)[static_cast<std::size_t>(ox)];
        const Tensor& v = x.value();
        out.at(ch, oy, ox) = a.w0 * (b.w0 * v.at(ch, a.i0, b.i0) + b.w1 * v.at(ch, a.i0, b.i1)) +
                             a.w1 * (b.w0 * v.at(ch, a.i1, b.i0) + b.w1 * v.at(ch, a.i1, b.i1));
      }
    }
  }
  return make_node(std::move(out), {x}, [x, ty, tx, c, h, w](const Tensor& g) {
    Tensor* gx = grad_of(x);
    const int ow = 2 * w;
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < 2 * h; ++oy) {
        const Tap& a = (*ty)[static_cast<std::size_t>(oy)];
        for (int ox = 0; ox < ow; ++ox) {
          const Tap& b = (*tx)[static_cast<std::size_t>(ox)];
          const double gv = g[(static_cast<std::size_t>(ch) * 2 * h + oy) * ow + ox];
          gx->at(ch, a.i0, b.i0) += gv * a.w0 * b.w0;
          gx->at(ch, a.i0, b.i1) += gv * a.w0 * b.w1;
          gx->at(ch, a.i1, b.i0) += gv * a.w1 * b.w0;
          gx->at(ch, a.i1, b.i1) += gv * a.w1 * b.w1;
        }
      }
    }
  });
}

Var avg_pool2(const Var& x) {
  require_rank3(x, "avg_pool2");
  const int c = x.channels(), h = x.height(), w = x.width();
  if (h % 2 || w % 2) throw std::invalid_argument("avg_pool2: odd spatial size");
  Tensor out = Tensor::chw(c, h / 2, w / 2);
  const Tensor& v = x.value();
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h / 2; ++y) {
      for (int xx = 0; xx < w / 2; ++xx) {
        out.at(ch, y, xx) = 0.25 * (v.at(ch, 2 * y, 2 * xx) + v.at(ch, 2 * y, 2 * xx + 1) +
                                    v.at(ch, 2 * y + 1, 2 * xx) + v.at(ch, 2 * y + 1, 2 * xx + 1));
      }
    }
  }
  return make_node(std::move(out), {x}, [x, c, h, w](const Tensor& g) {
    Tensor* gx = grad_of(x);
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          gx->at(ch, y, xx) += 0.25 * g[(static_cast<std::size_t>(ch) * (h / 2) + y / 2) * (w / 2) + xx / 2];
        }
      }
    }
  });
}

Var crop(const Var& x, int top, int left, int height, int width) {
  require_rank3(x, "crop");
  if (top < 0 || left < 0 || top + height > x.height() || left + width > x.width()) {
    throw std::invalid_argument("crop: window out of bounds");
  }
  const int c = x.channels();
  Tensor out = Tensor::chw(c, height, width);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) out.at(ch, y, xx) = x.value().at(ch, top + y, left + xx);
    }
  }
  return make_node(std::move(out), {x}, [x, top, left, c, height, width](const Tensor& g) {
    Tensor* gx = grad_of(x);
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < height; ++y) {
        for (int xx = 0; xx < width; ++xx) {
          gx->at(ch, top + y, left + xx) += g[(static_cast<std::size_t>(ch) * height + y) * width + xx];
        }
      }
    }
  });
}

}  // namespace asmamba::ops
