#include "asmamba/wavelet.hpp"

#include <stdexcept>

#include "asmamba/ops.hpp"

namespace asmamba::wavelet {

namespace {

Tensor as_chw(const Tensor& x) {
  if (x.rank() == 3) return x;
  if (x.rank() == 2) return x.reshaped({1, x.dim(0), x.dim(1)});
  throw std::invalid_argument("wavelet: expected rank-2 or rank-3 input, got " + x.shape_string());
}

// Packed analysis: out has 4C channels in LL, LH, HL, HH block order.
Tensor analysis(const Tensor& x) {
  const int c = x.channels(), h = x.height(), w = x.width();
  if (h % 2 != 0 || w % 2 != 0) {
    throw std::invalid_argument("dwt2: spatial size must be even, got " + x.shape_string());
  }
  const int hh = h / 2, hw = w / 2;
  Tensor out = Tensor::chw(4 * c, hh, hw);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < hh; ++i) {
      for (int j = 0; j < hw; ++j) {
        const double a = x.at(ch, 2 * i, 2 * j);
        const double b = x.at(ch, 2 * i, 2 * j + 1);
        const double cc = x.at(ch, 2 * i + 1, 2 * j);
        const double d = x.at(ch, 2 * i + 1, 2 * j + 1);
        out.at(ch, i, j) = 0.5 * (a + b + cc + d);
        out.at(c + ch, i, j) = 0.5 * (a - b + cc - d);
        out.at(2 * c + ch, i, j) = 0.5 * (a + b - cc - d);
        out.at(3 * c + ch, i, j) = 0.5 * (a - b - cc + d);
      }
    }
  }
  return out;
}

Tensor synthesis(const Tensor& p) {
  if (p.rank() != 3 || p.channels() % 4 != 0) {
    throw std::invalid_argument("idwt2: packed bands need 4C channels, got " + p.shape_string());
  }
  const int c = p.channels() / 4, hh = p.height(), hw = p.width();
  Tensor out = Tensor::chw(c, 2 * hh, 2 * hw);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < hh; ++i) {
      for (int j = 0; j < hw; ++j) {
        const double ll = p.at(ch, i, j);
        const double lh = p.at(c + ch, i, j);
        const double hl = p.at(2 * c + ch, i, j);
        const double hhv = p.at(3 * c + ch, i, j);
        out.at(ch, 2 * i, 2 * j) = 0.5 * (ll + lh + hl + hhv);
        out.at(ch, 2 * i, 2 * j + 1) = 0.5 * (ll - lh + hl - hhv);
        out.at(ch, 2 * i + 1, 2 * j) = 0.5 * (ll + lh - hl - hhv);
        out.at(ch, 2 * i + 1, 2 * j + 1) = 0.5 * (ll - lh - hl + hhv);
      }
    }
  }
  return out;
}

Tensor channel_block(const Tensor& t, int start, int count) {
  Tensor out = Tensor::chw(count, t.height(), t.width());
  const double* src = t.data() + static_cast<std::size_t>(start) * t.plane();
  std::copy(src, src + out.size(), out.data());
  return out;
}

Tensor stack(std::initializer_list<const Tensor*> parts) {
  int total = 0;
  const Tensor& first = **parts.begin();
  for (const Tensor* p : parts) {
    if (p->rank() != 3 || p->height() != first.height() || p->width() != first.width()) {
      throw std::invalid_argument("wavelet: inconsistent band shapes");
    }
    total += p->channels();
  }
  Tensor out = Tensor::chw(total, first.height(), first.width());
  std::size_t off = 0;
  for (const Tensor* p : parts) {
    std::copy(p->data(), p->data() + p->size(), out.data() + off);
    off += p->size();
  }
  return out;
}

}  // namespace

void SubBands::validate() const {
  if (ll.rank() != 3 || !ll.same_shape(lh) || !ll.same_shape(hl) || !ll.same_shape(hh)) {
    throw std::invalid_argument("SubBands: bands must share one (C, H, W) shape");
  }
}

double SubBands::energy() const {
  return ll.sum_squares() + lh.sum_squares() + hl.sum_squares() + hh.sum_squares();
}

SubBands dwt2(const Tensor& x) { return unpack(analysis(as_chw(x))); }

Tensor idwt2(const SubBands& bands) {
  bands.validate();
  return synthesis(pack(bands));
}

Tensor pack(const SubBands& b) {
  b.validate();
  return stack({&b.ll, &b.lh, &b.hl, &b.hh});
}

SubBands unpack(const Tensor& packed) {
  if (packed.rank() != 3 || packed.channels() % 4 != 0) {
    throw std::invalid_argument("unpack: expected 4C channels, got " + packed.shape_string());
  }
  const int c = packed.channels() / 4;
  return SubBands{channel_block(packed, 0, c), channel_block(packed, c, c),
                  channel_block(packed, 2 * c, c), channel_block(packed, 3 * c, c)};
}

Tensor concat_hf(const SubBands& b) {
  b.validate();
  return stack({&b.lh, &b.hl, &b.hh});
}

HighBands split_hf(const Tensor& hf) {
  if (hf.rank() != 3 || hf.channels() % 3 != 0) {
    throw std::invalid_argument("split_hf: expected 3C channels, got " + hf.shape_string());
  }
  const int c = hf.channels() / 3;
  return HighBands{channel_block(hf, 0, c), channel_block(hf, c, c), channel_block(hf, 2 * c, c)};
}

Tensor pad_to_multiple(const Tensor& x, int multiple) {
  const Tensor src = as_chw(x);
  const int c = src.channels(), h = src.height(), w = src.width();
  const int ph = (h + multiple - 1) / multiple * multiple;
  const int pw = (w + multiple - 1) / multiple * multiple;
  if (ph == h && pw == w) return x;
  if (ph - h >= h || pw - w >= w) throw std::invalid_argument("pad_to_multiple: image too small");
  auto reflect = [](int i, int n) { return i < n ? i : 2 * n - 2 - i; };
  Tensor out = Tensor::chw(c, ph, pw);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < ph; ++i) {
      for (int j = 0; j < pw; ++j) out.at(ch, i, j) = src.at(ch, reflect(i, h), reflect(j, w));
    }
  }
  return x.rank() == 2 ? out.reshaped({ph, pw}) : out;
}

Var dwt2(const Var& x) {
  return make_node(analysis(x.value()), {x}, [x](const Tensor& g) { accumulate(x, synthesis(g)); });
}

Var idwt2(const Var& packed) {
  return make_node(synthesis(packed.value()), {packed},
                   [packed](const Tensor& g) { accumulate(packed, analysis(g)); });
}

Var hwd(const Var& x, const Var& mix_w, const Var& mix_b) {
  return ops::conv2d(dwt2(x), mix_w, mix_b);
}

}  // namespace asmamba::wavelet
