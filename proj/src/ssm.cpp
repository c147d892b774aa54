#include "asmamba/ssm.hpp"

#include <cmath>
#include <stdexcept>

#include "asmamba/ops.hpp"
#include "asmamba/parallel.hpp"

namespace asmamba::ssm {

Discretized discretize(double a, double delta, double b) {
  if (!(delta > 0.0)) throw std::invalid_argument("discretize: delta must be positive");
  const ZohDerivatives z = zoh_derivatives(a, delta);
  return {z.a_bar, z.gain * b};
}

ZohDerivatives zoh_derivatives(double a, double delta) {
  const double z = delta * a;
  const double ea = std::exp(z);
  ZohDerivatives out{ea, 0.0, ea, 0.0};
  if (std::abs(a) <= 1e-8) {
    out.gain = delta;
    out.d_a = 0.5 * delta * delta;
  } else if (std::abs(z) < 1e-4) {
    // Series of (exp(z) - 1) / z avoids cancellation near z = 0.
    out.gain = delta * (1.0 + z * (0.5 + z / 6.0));
    out.d_a = delta * delta * (0.5 + z / 3.0 + z * z / 8.0);
  } else {
    const double em1 = ea - 1.0;
    out.gain = em1 / a;
    out.d_a = (delta * ea * a - em1) / (a * a);
  }
  return out;
}

std::vector<int> scan_order(int height, int width, ScanDirection dir) {
  const int n = height * width;
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    int pos = t;
    if (dir == ScanDirection::ColForward || dir == ScanDirection::ColReverse) {
      pos = (t % height) * width + t / height;
    }
    order[static_cast<std::size_t>(t)] = pos;
  }
  if (dir == ScanDirection::RowReverse || dir == ScanDirection::ColReverse) {
    std::reverse(order.begin(), order.end());
  }
  return order;
}

namespace {

void check_scan_shapes(const ScanTensors& in, std::size_t order_len) {
  const Tensor& x = in.x;
  if (x.rank() != 3 || x.plane() == 0) throw std::invalid_argument("scan: empty or malformed sequence");
  const int ch = x.channels();
  const int n = in.a.rank() == 2 ? in.a.dim(1) : -1;
  if (!x.same_shape(in.delta) || in.a.rank() != 2 || in.a.dim(0) != ch ||
      in.d.size() != static_cast<std::size_t>(ch) || in.b.rank() != 3 || in.b.channels() != n ||
      in.b.plane() != x.plane() || !in.b.same_shape(in.c)) {
    throw std::invalid_argument("scan: inconsistent input shapes");
  }
  if (order_len != x.plane()) throw std::invalid_argument("scan: order length mismatch");
}

// Sequential recurrence for one channel; y_out receives the state readout
// (without the skip term) at each visited position.
void scan_channel_sequential(const ScanTensors& in, int ch, std::span<const int> order,
                             double* y_out) {
  const int n_state = in.a.dim(1);
  const std::size_t plane = in.x.plane();
  const double* x = in.x.channel(ch);
  const double* dl = in.delta.channel(ch);
  const double* a = in.a.data() + static_cast<std::size_t>(ch) * n_state;
  std::vector<double> h(static_cast<std::size_t>(n_state), 0.0);
  for (std::size_t t = 0; t < order.size(); ++t) {
    const auto pos = static_cast<std::size_t>(order[t]);
    const double xv = x[pos];
    const double dt = dl[pos];
    double acc = 0.0;
    for (int n = 0; n < n_state; ++n) {
      const ZohDerivatives z = zoh_derivatives(a[n], dt);
      const std::size_t bi = static_cast<std::size_t>(n) * plane + pos;
      h[static_cast<std::size_t>(n)] = z.a_bar * h[static_cast<std::size_t>(n)] + z.gain * in.b[bi] * xv;
      acc += in.c[bi] * h[static_cast<std::size_t>(n)];
    }
    y_out[pos] = acc;
  }
}

// Three-phase blocked scan over the linear recurrence h_t = p_t h_{t-1} + u_t.
// Phase 1 scans every chunk from a zero state, phase 2 propagates carries
// across chunks, phase 3 adds each chunk's carry-in contribution.
void scan_channel_chunked(const ScanTensors& in, int ch, std::span<const int> order, int chunk,
                          double* y_out) {
  const int n_state = in.a.dim(1);
  const std::size_t plane = in.x.plane();
  const std::size_t len = order.size();
  const std::size_t k = static_cast<std::size_t>(std::max(1, chunk));
  const std::size_t n_chunks = (len + k - 1) / k;
  const double* x = in.x.channel(ch);
  const double* dl = in.delta.channel(ch);
  const double* a = in.a.data() + static_cast<std::size_t>(ch) * n_state;
  const auto ns = static_cast<std::size_t>(n_state);

  std::vector<double> end_state(n_chunks * ns, 0.0);
  std::vector<double> end_prod(n_chunks * ns, 1.0);

  parallel_for(n_chunks, [&](std::size_t j) {
    std::vector<double> h(ns, 0.0);
    std::vector<double> prod(ns, 1.0);
    for (std::size_t t = j * k; t < std::min(len, (j + 1) * k); ++t) {
      const auto pos = static_cast<std::size_t>(order[t]);
      double acc = 0.0;
      for (std::size_t n = 0; n < ns; ++n) {
        const ZohDerivatives z = zoh_derivatives(a[n], dl[pos]);
        const std::size_t bi = n * plane + pos;
        h[n] = z.a_bar * h[n] + z.gain * in.b[bi] * x[pos];
        prod[n] *= z.a_bar;
        acc += in.c[bi] * h[n];
      }
      y_out[pos] = acc;
    }
    for (std::size_t n = 0; n < ns; ++n) {
      end_state[j * ns + n] = h[n];
      end_prod[j * ns + n] = prod[n];
    }
  });

  std::vector<double> carry_in(n_chunks * ns, 0.0);
  for (std::size_t j = 1; j < n_chunks; ++j) {
    for (std::size_t n = 0; n < ns; ++n) {
      carry_in[j * ns + n] =
          end_prod[(j - 1) * ns + n] * carry_in[(j - 1) * ns + n] + end_state[(j - 1) * ns + n];
    }
  }

  parallel_for(n_chunks, [&](std::size_t j) {
    if (j == 0) return;
    std::vector<double> prod(ns, 1.0);
    for (std::size_t t = j * k; t < std::min(len, (j + 1) * k); ++t) {
      const auto pos = static_cast<std::size_t>(order[t]);
      double acc = 0.0;
      for (std::size_t n = 0; n < ns; ++n) {
        prod[n] *= std::exp(dl[pos] * a[n]);
        acc += in.c[n * plane + pos] * prod[n] * carry_in[j * ns + n];
      }
      y_out[pos] += acc;
    }
  });
}

}  // namespace

Tensor scan_forward(const ScanTensors& in, std::span<const int> order, ScanStrategy strategy,
                    int chunk) {
  check_scan_shapes(in, order.size());
  for (double v : in.delta.values()) {
    if (!(v > 0.0)) throw std::invalid_argument("scan: delta must be positive");
  }
  Tensor y(in.x.shape());
  for (int ch = 0; ch < in.x.channels(); ++ch) {
    double* yc = y.channel(ch);
    if (strategy == ScanStrategy::Chunked) {
      scan_channel_chunked(in, ch, order, chunk, yc);
    } else {
      scan_channel_sequential(in, ch, order, yc);
    }
    const double dv = in.d[static_cast<std::size_t>(ch)];
    const double* x = in.x.channel(ch);
    for (std::size_t i = 0; i < in.x.plane(); ++i) yc[i] += dv * x[i];
  }
  return y;
}

Var scan(const Var& x, const Var& delta, const Var& b, const Var& c, const Var& a, const Var& d,
         std::vector<int> order, ScanStrategy strategy) {
  Tensor y = scan_forward({x.value(), delta.value(), b.value(), c.value(), a.value(), d.value()},
                          order, strategy);
  auto ord = std::make_shared<std::vector<int>>(std::move(order));
  return make_node(std::move(y), {x, delta, b, c, a, d}, [x, delta, b, c, a, d, ord](const Tensor& g) {
    const Tensor& xv = x.value();
    const Tensor& dv = delta.value();
    const Tensor& bv = b.value();
    const Tensor& cv = c.value();
    const Tensor& av = a.value();
    const Tensor& skip = d.value();
    Tensor* gx = grad_of(x);
    Tensor* gdelta = grad_of(delta);
    Tensor* gb = grad_of(b);
    Tensor* gc = grad_of(c);
    Tensor* ga = grad_of(a);
    Tensor* gd = grad_of(d);
    const int channels = xv.channels();
    const auto ns = static_cast<std::size_t>(av.dim(1));
    const std::size_t plane = xv.plane();
    const std::size_t len = ord->size();
    std::vector<double> hist(len * ns);
    std::vector<double> gh(ns);

    for (int ch = 0; ch < channels; ++ch) {
      const double* xc = xv.channel(ch);
      const double* dc = dv.channel(ch);
      const double* ac = av.data() + static_cast<std::size_t>(ch) * ns;
      const double* gc_out = g.data() + static_cast<std::size_t>(ch) * plane;
      const double dskip = skip[static_cast<std::size_t>(ch)];

      // Recompute the state history for this channel.
      std::vector<double> h(ns, 0.0);
      for (std::size_t t = 0; t < len; ++t) {
        const auto pos = static_cast<std::size_t>((*ord)[t]);
        for (std::size_t n = 0; n < ns; ++n) {
          const ZohDerivatives z = zoh_derivatives(ac[n], dc[pos]);
          h[n] = z.a_bar * h[n] + z.gain * bv[n * plane + pos] * xc[pos];
          hist[t * ns + n] = h[n];
        }
      }

      std::fill(gh.begin(), gh.end(), 0.0);
      double gd_acc = 0.0;
      for (std::size_t t = len; t-- > 0;) {
        const auto pos = static_cast<std::size_t>((*ord)[t]);
        const double xval = xc[pos];
        const double dt = dc[pos];
        const double gy = gc_out[pos];
        gd_acc += gy * xval;
        double gx_acc = gy * dskip;
        double gdt = 0.0;
        for (std::size_t n = 0; n < ns; ++n) {
          const std::size_t bi = n * plane + pos;
          const double ht = hist[t * ns + n];
          const double hprev = t > 0 ? hist[(t - 1) * ns + n] : 0.0;
          if (gc) (*gc)[bi] += gy * ht;
          const double ght = gh[n] + gy * cv[bi];
          const ZohDerivatives z = zoh_derivatives(ac[n], dt);
          const double g_abar = ght * hprev;
          const double g_bbar = ght * xval;  // w.r.t. gain * b
          gx_acc += ght * z.gain * bv[bi];
          if (gb) (*gb)[bi] += g_bbar * z.gain;
          const double g_gain = g_bbar * bv[bi];
          gdt += g_abar * ac[n] * z.a_bar + g_gain * z.d_delta;
          if (ga) (*ga)[static_cast<std::size_t>(ch) * ns + n] += g_abar * dt * z.a_bar + g_gain * z.d_a;
          gh[n] = ght * z.a_bar;
        }
        if (gx) gx->channel(ch)[pos] += gx_acc;
        if (gdelta) gdelta->channel(ch)[pos] += gdt;
      }
      if (gd) (*gd)[static_cast<std::size_t>(ch)] += gd_acc;
    }
  });
}

SSMParams make_ssm_params(ParamStore& store, const std::string& prefix, int channels,
                          int state_dim, Rng& rng) {
  SSMParams p;
  p.channels = channels;
  p.state_dim = state_dim;
  Tensor a_log({channels, state_dim});
  for (int c = 0; c < channels; ++c) {
    for (int n = 0; n < state_dim; ++n) a_log.at(c, n) = std::log(static_cast<double>(n + 1));
  }
  p.a_log = &store.add(prefix + ".a_log", std::move(a_log));
  p.d = &store.add(prefix + ".d", Tensor({channels}, 1.0));

  const double proj_std = 1.0 / std::sqrt(static_cast<double>(channels));
  p.delta_w = &store.add(prefix + ".delta_w", randn({channels, channels, 1, 1}, 0.1 * proj_std, rng));
  Tensor delta_b({channels});
  std::uniform_real_distribution<double> u(std::log(0.01), std::log(0.1));
  for (double& v : delta_b.values()) {
    const double dt = std::exp(u(rng));
    v = dt + std::log(-std::expm1(-dt));  // inverse softplus
  }
  p.delta_b = &store.add(prefix + ".delta_b", std::move(delta_b));
  p.b_w = &store.add(prefix + ".b_w", randn({state_dim, channels, 1, 1}, proj_std, rng));
  p.b_b = &store.add(prefix + ".b_b", Tensor({state_dim}));
  p.c_w = &store.add(prefix + ".c_w", randn({state_dim, channels, 1, 1}, proj_std, rng));
  p.c_b = &store.add(prefix + ".c_b", Tensor({state_dim}));
  return p;
}

Projections project(Context& ctx, const SSMParams& p, const Var& x) {
  Projections pr;
  pr.delta = ops::softplus(ops::conv2d(x, ctx.param(*p.delta_w), ctx.param(*p.delta_b)));
  pr.b = ops::conv2d(x, ctx.param(*p.b_w), ctx.param(*p.b_b));
  pr.c = ops::conv2d(x, ctx.param(*p.c_w), ctx.param(*p.c_b));
  pr.a = ops::scale(ops::exp(ctx.param(*p.a_log)), -1.0);
  pr.d = ctx.param(*p.d);
  return pr;
}

Var selective_scan(Context& ctx, const SSMParams& p, const Var& x, std::vector<int> order,
                   ScanStrategy strategy) {
  const Projections pr = project(ctx, p, x);
  return scan(x, pr.delta, pr.b, pr.c, pr.a, pr.d, std::move(order), strategy);
}

MambaBlock MambaBlock::create(ParamStore& store, const std::string& prefix, int channels,
                              const MambaBlockOptions& opts, Rng& rng) {
  MambaBlock m;
  m.channels = channels;
  m.four_directions = opts.four_directions;
  m.ln1_g = &store.add(prefix + ".ln1_g", Tensor({channels}, 1.0));
  m.ln1_b = &store.add(prefix + ".ln1_b", Tensor({channels}));
  m.ssm = make_ssm_params(store, prefix + ".ssm", channels, opts.state_dim, rng);
  m.alpha = &store.add(prefix + ".alpha", Tensor::scalar(opts.residual_init));
  m.ln2_g = &store.add(prefix + ".ln2_g", Tensor({channels}, 1.0));
  m.ln2_b = &store.add(prefix + ".ln2_b", Tensor({channels}));
  const int hidden = 2 * channels;
  m.ffn_w1 = &store.add(prefix + ".ffn_w1",
                        randn({hidden, channels, 1, 1}, 1.0 / std::sqrt(double(channels)), rng));
  m.ffn_b1 = &store.add(prefix + ".ffn_b1", Tensor({hidden}));
  m.ffn_w2 = &store.add(prefix + ".ffn_w2",
                        randn({channels, hidden, 1, 1}, 1.0 / std::sqrt(double(hidden)), rng));
  m.ffn_b2 = &store.add(prefix + ".ffn_b2", Tensor({channels}));
  m.beta = &store.add(prefix + ".beta", Tensor::scalar(opts.residual_init));
  return m;
}

std::vector<ScanDirection> MambaBlock::directions() const {
  if (four_directions) {
    return {ScanDirection::RowForward, ScanDirection::RowReverse, ScanDirection::ColForward,
            ScanDirection::ColReverse};
  }
  return {ScanDirection::RowForward, ScanDirection::RowReverse};
}

Var MambaBlock::ssm_branch(Context& ctx, const Var& z) const {
  // Projections are pointwise, so they are shared by all directions.
  const Projections pr = project(ctx, ssm, z);
  const auto dirs = directions();
  Var total;
  for (ScanDirection dir : dirs) {
    Var y = scan(z, pr.delta, pr.b, pr.c, pr.a, pr.d, scan_order(z.height(), z.width(), dir));
    total = total ? ops::add(total, y) : y;
  }
  return ops::scale(total, 1.0 / static_cast<double>(dirs.size()));
}

Var MambaBlock::forward(Context& ctx, const Var& x) const {
  const Var z = ops::layer_norm_channels(x, ctx.param(*ln1_g), ctx.param(*ln1_b));
  const Var fm = ops::add(x, ops::scale_by(ssm_branch(ctx, z), ctx.param(*alpha)));
  const Var z2 = ops::layer_norm_channels(fm, ctx.param(*ln2_g), ctx.param(*ln2_b));
  const Var hidden = ops::gelu(ops::conv2d(z2, ctx.param(*ffn_w1), ctx.param(*ffn_b1)));
  const Var ffn = ops::conv2d(hidden, ctx.param(*ffn_w2), ctx.param(*ffn_b2));
  return ops::add(fm, ops::scale_by(ffn, ctx.param(*beta)));
}

}  // namespace asmamba::ssm
