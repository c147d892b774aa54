#include "asmamba/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace asmamba::spectral {

namespace {

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : p(fftw_alloc_complex(n)) {
    if (!p) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(p); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* p;
};

// Plans are created once per (h, w, sign) under a lock; fftw_execute_dft on
// a cached plan with fresh aligned buffers is thread-safe.
fftw_plan plan_for(int h, int w, int sign) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(h, w, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  FftwBuffer a(static_cast<std::size_t>(h) * w), b(static_cast<std::size_t>(h) * w);
  fftw_plan p = fftw_plan_dft_2d(h, w, a.p, b.p, sign, FFTW_ESTIMATE);
  if (!p) throw std::runtime_error("fftw: planning failed");
  cache.emplace(key, p);
  return p;
}

// Unnormalized full complex transform in place of `buf`.
void run(std::vector<Complex>& buf, int h, int w, int sign) {
  const std::size_t n = static_cast<std::size_t>(h) * w;
  FftwBuffer in(n), out(n);
  for (std::size_t i = 0; i < n; ++i) {
    in.p[i][0] = buf[i].real();
    in.p[i][1] = buf[i].imag();
  }
  fftw_execute_dft(plan_for(h, w, sign), in.p, out.p);
  for (std::size_t i = 0; i < n; ++i) buf[i] = Complex(out.p[i][0], out.p[i][1]);
}

Tensor as_chw(const Tensor& x) {
  if (x.rank() == 3) return x;
  if (x.rank() == 2) return x.reshaped({1, x.dim(0), x.dim(1)});
  throw std::invalid_argument("spectral: expected rank-2 or rank-3 input");
}

// Adjoint of rfft2: Re of the unnormalized inverse of the zero-extended half
// spectrum.
void rfft2_adjoint(const Complex* g, int h, int w, double* out) {
  const int wh = half_width(w);
  std::vector<Complex> full(static_cast<std::size_t>(h) * w, Complex(0.0, 0.0));
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < wh; ++v) full[static_cast<std::size_t>(u) * w + v] = g[u * wh + v];
  }
  run(full, h, w, FFTW_BACKWARD);
  for (std::size_t i = 0; i < full.size(); ++i) out[i] = full[i].real();
}

bool interior_column(int v, int w) { return v != 0 && 2 * v != w; }

}  // namespace

int half_width(int width) { return width / 2 + 1; }

std::vector<Complex> fft2(const double* x, int height, int width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("fft2: empty input");
  std::vector<Complex> buf(static_cast<std::size_t>(height) * width);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = Complex(x[i], 0.0);
  run(buf, height, width, FFTW_FORWARD);
  return buf;
}

std::vector<Complex> rfft2(const double* x, int height, int width) {
  const std::vector<Complex> full = fft2(x, height, width);
  const int wh = half_width(width);
  std::vector<Complex> half(static_cast<std::size_t>(height) * wh);
  for (int u = 0; u < height; ++u) {
    for (int v = 0; v < wh; ++v) half[static_cast<std::size_t>(u) * wh + v] = full[static_cast<std::size_t>(u) * width + v];
  }
  return half;
}

void irfft2(const Complex* z, int height, int width, double* out) {
  const int wh = half_width(width);
  std::vector<Complex> full(static_cast<std::size_t>(height) * width);
  for (int u = 0; u < height; ++u) {
    for (int v = 0; v < width; ++v) {
      Complex val;
      if (v < wh) {
        val = z[u * wh + v];
      } else {
        val = std::conj(z[((height - u) % height) * wh + (width - v)]);
      }
      full[static_cast<std::size_t>(u) * width + v] = val;
    }
  }
  run(full, height, width, FFTW_BACKWARD);
  const double norm = 1.0 / (static_cast<double>(height) * width);
  for (std::size_t i = 0; i < full.size(); ++i) out[i] = full[i].real() * norm;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

Spectrum amplitude_phase_split(const Tensor& input) {
  const Tensor x = as_chw(input);
  const int c = x.channels(), h = x.height(), w = x.width();
  const int wh = half_width(w);
  Spectrum s{Tensor::chw(c, h, wh), Tensor::chw(c, h, wh), w};
  for (int ch = 0; ch < c; ++ch) {
    const auto z = rfft2(x.channel(ch), h, w);
    for (std::size_t i = 0; i < z.size(); ++i) {
      s.amplitude.channel(ch)[i] = std::abs(z[i]);
      double p = std::arg(z[i]);
      if (p <= -std::numbers::pi) p = std::numbers::pi;
      s.phase.channel(ch)[i] = p;
    }
  }
  return s;
}

Tensor recombine(const Spectrum& s) {
  if (!s.amplitude.same_shape(s.phase) || s.amplitude.rank() != 3) {
    throw std::invalid_argument("recombine: amplitude/phase shape mismatch");
  }
  const int c = s.amplitude.channels(), h = s.amplitude.height();
  if (s.amplitude.width() != half_width(s.width)) throw std::invalid_argument("recombine: bad width");
  Tensor out = Tensor::chw(c, h, s.width);
  std::vector<Complex> z(s.amplitude.plane());
  for (int ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = std::polar(s.amplitude.channel(ch)[i], s.phase.channel(ch)[i]);
    }
    irfft2(z.data(), h, s.width, out.channel(ch));
  }
  return out;
}

Var rfft2(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw std::invalid_argument("rfft2: expected (C,H,W)");
  const int c = xv.channels(), h = xv.height(), w = xv.width();
  const int wh = half_width(w);
  Tensor out = Tensor::chw(2 * c, h, wh);
  for (int ch = 0; ch < c; ++ch) {
    const auto z = rfft2(xv.channel(ch), h, w);
    for (std::size_t i = 0; i < z.size(); ++i) {
      out.channel(ch)[i] = z[i].real();
      out.channel(c + ch)[i] = z[i].imag();
    }
  }
  return make_node(std::move(out), {x}, [x, c, h, w, wh](const Tensor& g) {
    Tensor* gx = grad_of(x);
    const std::size_t n = static_cast<std::size_t>(h) * wh;
    std::vector<Complex> gz(n);
    std::vector<double> tmp(static_cast<std::size_t>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < n; ++i) {
        gz[i] = Complex(g[static_cast<std::size_t>(ch) * n + i], g[static_cast<std::size_t>(c + ch) * n + i]);
      }
      rfft2_adjoint(gz.data(), h, w, tmp.data());
      double* dst = gx->channel(ch);
      for (std::size_t i = 0; i < tmp.size(); ++i) dst[i] += tmp[i];
    }
  });
}

Var irfft2(const Var& z, int width) {
  const Tensor& zv = z.value();
  if (zv.rank() != 3 || zv.channels() % 2 != 0 || zv.width() != half_width(width)) {
    throw std::invalid_argument("irfft2: packed spectrum shape mismatch");
  }
  const int c = zv.channels() / 2, h = zv.height(), wh = zv.width();
  const std::size_t n = static_cast<std::size_t>(h) * wh;
  Tensor out = Tensor::chw(c, h, width);
  std::vector<Complex> buf(n);
  for (int ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = Complex(zv.channel(ch)[i], zv.channel(c + ch)[i]);
    irfft2(buf.data(), h, width, out.channel(ch));
  }
  return make_node(std::move(out), {z}, [z, c, h, width, wh, n](const Tensor& g) {
    Tensor* gz = grad_of(z);
    const double norm = 1.0 / (static_cast<double>(h) * width);
    const std::size_t plane = static_cast<std::size_t>(h) * width;
    for (int ch = 0; ch < c; ++ch) {
      const auto spec = rfft2(g.data() + static_cast<std::size_t>(ch) * plane, h, width);
      for (int u = 0; u < h; ++u) {
        for (int v = 0; v < wh; ++v) {
          const std::size_t i = static_cast<std::size_t>(u) * wh + v;
          const double wgt = (interior_column(v, width) ? 2.0 : 1.0) * norm;
          gz->channel(ch)[i] += wgt * spec[i].real();
          gz->channel(c + ch)[i] += wgt * spec[i].imag();
        }
      }
    }
    (void)n;
  });
}

Var magnitude(const Var& z) {
  const Tensor& zv = z.value();
  const int c = zv.channels() / 2;
  const std::size_t n = static_cast<std::size_t>(c) * zv.plane();
  Tensor out = Tensor::chw(c, zv.height(), zv.width());
  for (std::size_t i = 0; i < n; ++i) out[i] = std::hypot(zv[i], zv[n + i]);
  return make_node(std::move(out), {z}, [z, n](const Tensor& g) {
    Tensor* gz = grad_of(z);
    const Tensor& zv = z.value();
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::hypot(zv[i], zv[n + i]);
      if (r == 0.0) continue;
      (*gz)[i] += g[i] * zv[i] / r;
      (*gz)[n + i] += g[i] * zv[n + i] / r;
    }
  });
}

Var phasor(const Var& z) {
  const Tensor& zv = z.value();
  const std::size_t n = zv.size() / 2;
  Tensor out(zv.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::hypot(zv[i], zv[n + i]);
    if (r == 0.0) {
      out[i] = 1.0;
      out[n + i] = 0.0;
    } else {
      out[i] = zv[i] / r;
      out[n + i] = zv[n + i] / r;
    }
  }
  return make_node(std::move(out), {z}, [z, n](const Tensor& g) {
    Tensor* gz = grad_of(z);
    const Tensor& zv = z.value();
    for (std::size_t i = 0; i < n; ++i) {
      const double re = zv[i], im = zv[n + i];
      const double r = std::hypot(re, im);
      if (r == 0.0) continue;
      const double r3 = r * r * r;
      const double gre = g[i], gim = g[n + i];
      (*gz)[i] += (gre * im * im - gim * re * im) / r3;
      (*gz)[n + i] += (-gre * re * im + gim * re * re) / r3;
    }
  });
}

Var polar_mul(const Var& amp, const Var& unit) {
  const Tensor& av = amp.value();
  const Tensor& uv = unit.value();
  const std::size_t n = av.size();
  if (uv.size() != 2 * n) throw std::invalid_argument("polar_mul: shape mismatch");
  Tensor out(uv.shape());
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = av[i] * uv[i];
    out[n + i] = av[i] * uv[n + i];
  }
  return make_node(std::move(out), {amp, unit}, [amp, unit, n](const Tensor& g) {
    const Tensor& av = amp.value();
    const Tensor& uv = unit.value();
    if (Tensor* ga = grad_of(amp)) {
      for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i] * uv[i] + g[n + i] * uv[n + i];
    }
    if (Tensor* gu = grad_of(unit)) {
      for (std::size_t i = 0; i < n; ++i) {
        (*gu)[i] += g[i] * av[i];
        (*gu)[n + i] += g[n + i] * av[i];
      }
    }
  });
}

}  // namespace asmamba::spectral
