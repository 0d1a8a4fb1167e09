#include "pointcpr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>

#include "pointcpr/errors.hpp"

namespace pointcpr {

namespace {

// Splits `shape` around `axis` into (outer, length, inner).
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_to_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

// Elementwise binary op where one side may broadcast as a trailing suffix.
template <typename Fwd, typename DA, typename DB>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, DA da, DB db) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool a_big = is_suffix(sb, sa);
  if (!a_big && !is_suffix(sa, sb)) {
    throw DimensionError(std::string(op) + ": cannot broadcast " + shape_to_string(sa) + " with " +
                         shape_to_string(sb));
  }
  const Shape& out_shape = a_big ? sa : sb;
  const std::size_t n = shape_numel(out_shape);
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();

  std::vector<double> out(n);
  auto xa = a.data();
  auto xb = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(xa[i % na], xb[i % nb]);

  return Tensor::make_result(out_shape, std::move(out), {a, b},
                             [a, b, n, na, nb, da, db](const BackwardContext& ctx) {
                               auto xa = a.data();
                               auto xb = b.data();
                               if (ctx.needs(0)) {
                                 auto ga = ctx.input_grads[0];
                                 for (std::size_t i = 0; i < n; ++i) {
                                   ga[i % na] += ctx.out_grad[i] * da(xa[i % na], xb[i % nb]);
                                 }
                               }
                               if (ctx.needs(1)) {
                                 auto gb = ctx.input_grads[1];
                                 for (std::size_t i = 0; i < n; ++i) {
                                   gb[i % nb] += ctx.out_grad[i] * db(xa[i % na], xb[i % nb]);
                                 }
                               }
                             });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return Tensor::make_result(a.shape(), std::move(out), {a}, [a, deriv](const BackwardContext& ctx) {
    auto x = a.data();
    auto g = ctx.input_grads[0];
    for (std::size_t i = 0; i < x.size(); ++i) g[i] += ctx.out_grad[i] * deriv(x[i], ctx.out_data[i]);
  });
}

// C[m,n] += A[m,k] * B[k,n]; i-k-j order keeps each output row's
// accumulation sequence independent of the row's position.
void gemm_acc(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C + i * n;
    const double* arow = A + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  auto mismatch = [&](const std::string& why) {
    return DimensionError("matmul: " + why + " for shapes " + shape_to_string(sa) + " and " +
                          shape_to_string(sb));
  };
  if (sa.size() < 2 || sb.size() < 2) throw mismatch("operands need rank >= 2");
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa.back();
  const std::size_t n = sb.back();
  if (sb[sb.size() - 2] != k) throw mismatch("inner extents disagree");

  const std::size_t ra = sa.size() - 2;
  const std::size_t rb = sb.size() - 2;
  const std::size_t r = std::max(ra, rb);
  Shape batch(r);
  std::vector<std::size_t> da(r, 1), db(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    if (i >= r - ra) da[i] = sa[i - (r - ra)];
    if (i >= r - rb) db[i] = sb[i - (r - rb)];
    if (da[i] != db[i] && da[i] != 1 && db[i] != 1) throw mismatch("batch extents not broadcastable");
    batch[i] = std::max(da[i], db[i]);
  }
  const std::size_t nbatch = shape_numel(batch);

  // Per-batch offsets into a and b (0 stride on broadcast axes).
  auto offsets = std::make_shared<std::vector<std::pair<std::size_t, std::size_t>>>(nbatch);
  {
    std::vector<std::size_t> stride_a(r, 0), stride_b(r, 0);
    std::size_t acc_a = m * k, acc_b = k * n;
    for (std::size_t i = r; i-- > 0;) {
      stride_a[i] = da[i] == 1 ? 0 : acc_a;
      stride_b[i] = db[i] == 1 ? 0 : acc_b;
      acc_a *= da[i];
      acc_b *= db[i];
    }
    std::vector<std::size_t> idx(r, 0);
    for (std::size_t t = 0; t < nbatch; ++t) {
      std::size_t oa = 0, ob = 0;
      for (std::size_t i = 0; i < r; ++i) {
        oa += idx[i] * stride_a[i];
        ob += idx[i] * stride_b[i];
      }
      (*offsets)[t] = {oa, ob};
      for (std::size_t i = r; i-- > 0;) {
        if (++idx[i] < batch[i]) break;
        idx[i] = 0;
      }
    }
  }

  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(nbatch * m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t t = 0; t < nbatch; ++t) {
    gemm_acc(pa + (*offsets)[t].first, pb + (*offsets)[t].second, out.data() + t * m * n, m, k, n);
  }

  return Tensor::make_result(
      std::move(out_shape), std::move(out), {a, b},
      [a, b, offsets, m, k, n](const BackwardContext& ctx) {
        const double* pa = a.data().data();
        const double* pb = b.data().data();
        const std::size_t nbatch = offsets->size();
        for (std::size_t t = 0; t < nbatch; ++t) {
          const double* gc = ctx.out_grad.data() + t * m * n;
          const auto [oa, ob] = (*offsets)[t];
          if (ctx.needs(0)) {
            // dA = dC * B^T
            double* ga = ctx.input_grads[0].data() + oa;
            const double* B = pb + ob;
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                double s = 0.0;
                const double* brow = B + p * n;
                const double* grow = gc + i * n;
                for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                ga[i * k + p] += s;
              }
            }
          }
          if (ctx.needs(1)) {
            // dB = A^T * dC
            double* gb = ctx.input_grads[1].data() + ob;
            const double* A = pa + oa;
            for (std::size_t i = 0; i < m; ++i) {
              const double* grow = gc + i * n;
              for (std::size_t p = 0; p < k; ++p) {
                const double av = A[i * k + p];
                double* brow = gb + p * n;
                for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
              }
            }
          }
        }
      });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                         shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [](const BackwardContext& ctx) {
    auto g = ctx.input_grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.out_grad[i];
  });
}

Tensor permute(const Tensor& a, std::span<const std::size_t> order) {
  const Shape& in = a.shape();
  const std::size_t r = in.size();
  if (order.size() != r) {
    throw DimensionError("permute: order length " + std::to_string(order.size()) +
                         " does not match rank of " + shape_to_string(in));
  }
  std::vector<bool> seen(r, false);
  for (std::size_t o : order) {
    if (o >= r || seen[o]) throw DimensionError("permute: invalid axis order");
    seen[o] = true;
  }
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = in[order[i]];

  const std::size_t n = a.numel();
  auto src = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t t = 0; t < n; ++t) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_stride[order[i]];
    (*src)[t] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<double> out(n);
  auto x = a.data();
  for (std::size_t t = 0; t < n; ++t) out[t] = x[(*src)[t]];
  return Tensor::make_result(std::move(out_shape), std::move(out), {a},
                             [src](const BackwardContext& ctx) {
                               auto g = ctx.input_grads[0];
                               for (std::size_t t = 0; t < src->size(); ++t) {
                                 g[(*src)[t]] += ctx.out_grad[t];
                               }
                             });
}

Tensor transpose(const Tensor& a, std::size_t axis0, std::size_t axis1) {
  std::vector<std::size_t> order(a.rank());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (axis0 >= order.size() || axis1 >= order.size()) {
    throw DimensionError("transpose: axis out of range for " + shape_to_string(a.shape()));
  }
  std::swap(order[axis0], order[axis1]);
  return permute(a, order);
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [](double x, double) {
        return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
      });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "softmax");
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.length; ++j) mx = std::max(mx, x[base + j * s.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < s.length; ++j) {
        const double e = std::exp(x[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.length; ++j) out[base + j * s.inner] /= total;
    }
  }
  return Tensor::make_result(a.shape(), std::move(out), {a}, [s](const BackwardContext& ctx) {
    auto g = ctx.input_grads[0];
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.length * s.inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.length; ++j) {
          const std::size_t t = base + j * s.inner;
          dot += ctx.out_grad[t] * ctx.out_data[t];
        }
        for (std::size_t j = 0; j < s.length; ++j) {
          const std::size_t t = base + j * s.inner;
          g[t] += ctx.out_data[t] * (ctx.out_grad[t] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "log_softmax");
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.length; ++j) mx = std::max(mx, x[base + j * s.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < s.length; ++j) total += std::exp(x[base + j * s.inner] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t j = 0; j < s.length; ++j) out[base + j * s.inner] = x[base + j * s.inner] - lse;
    }
  }
  return Tensor::make_result(a.shape(), std::move(out), {a}, [s](const BackwardContext& ctx) {
    auto g = ctx.input_grads[0];
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.length * s.inner + in;
        double total = 0.0;
        for (std::size_t j = 0; j < s.length; ++j) total += ctx.out_grad[base + j * s.inner];
        for (std::size_t j = 0; j < s.length; ++j) {
          const std::size_t t = base + j * s.inner;
          g[t] += ctx.out_grad[t] - std::exp(ctx.out_data[t]) * total;
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Shape& sx = x.shape();
  const std::size_t d = sx.back();
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: gamma/beta " + shape_to_string(gamma.shape()) + "/" +
                         shape_to_string(beta.shape()) + " do not match last extent of " +
                         shape_to_string(sx));
  }
  const std::size_t rows = x.numel() / d;
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * inv;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return Tensor::make_result(
      sx, std::move(out), {x, gamma, beta}, [gamma, xhat, rstd, rows, d](const BackwardContext& ctx) {
        auto gv = gamma.data();
        const auto& xh = *xhat;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* dy = ctx.out_grad.data() + r * d;
          const double* h = xh.data() + r * d;
          if (ctx.needs(1)) {
            for (std::size_t j = 0; j < d; ++j) ctx.input_grads[1][j] += dy[j] * h[j];
          }
          if (ctx.needs(2)) {
            for (std::size_t j = 0; j < d; ++j) ctx.input_grads[2][j] += dy[j];
          }
          if (ctx.needs(0)) {
            double mean_dh = 0.0;
            double mean_dh_h = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = dy[j] * gv[j];
              mean_dh += dh;
              mean_dh_h += dh * h[j];
            }
            mean_dh /= static_cast<double>(d);
            mean_dh_h /= static_cast<double>(d);
            double* gx = ctx.input_grads[0].data() + r * d;
            for (std::size_t j = 0; j < d; ++j) {
              gx[j] += (*rstd)[r] * (dy[j] * gv[j] - mean_dh - h[j] * mean_dh_h);
            }
          }
        }
      });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  Shape out_shape = parts[0].shape();
  if (axis >= out_shape.size()) throw DimensionError("concat: axis out of range");
  std::vector<std::size_t> lengths;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != out_shape.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != out_shape[i]) {
        throw DimensionError("concat: shape " + shape_to_string(s) + " incompatible with " +
                             shape_to_string(parts[0].shape()));
      }
    }
    lengths.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit s = split_axis(out_shape, axis, "concat");
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto x = parts[p].data();
    const std::size_t chunk = lengths[p] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(x.data() + o * chunk, chunk, out.data() + o * s.length * s.inner + offset);
    }
    offset += chunk;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::make_result(std::move(out_shape), std::move(out), std::move(inputs),
                             [lengths, s](const BackwardContext& ctx) {
                               std::size_t offset = 0;
                               for (std::size_t p = 0; p < lengths.size(); ++p) {
                                 const std::size_t chunk = lengths[p] * s.inner;
                                 if (ctx.needs(p)) {
                                   auto g = ctx.input_grads[p];
                                   for (std::size_t o = 0; o < s.outer; ++o) {
                                     const double* src =
                                         ctx.out_grad.data() + o * s.length * s.inner + offset;
                                     for (std::size_t t = 0; t < chunk; ++t) g[o * chunk + t] += src[t];
                                   }
                                 }
                                 offset += chunk;
                               }
                             });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisSplit s = split_axis(a.shape(), axis, "slice");
  if (begin >= end || end > s.length) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis of length " + std::to_string(s.length));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * s.inner;
  std::vector<double> out(s.outer * chunk);
  auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.data() + o * s.length * s.inner + begin * s.inner, chunk, out.data() + o * chunk);
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), {a},
                             [s, begin, chunk](const BackwardContext& ctx) {
                               auto g = ctx.input_grads[0];
                               for (std::size_t o = 0; o < s.outer; ++o) {
                                 double* dst = g.data() + o * s.length * s.inner + begin * s.inner;
                                 const double* src = ctx.out_grad.data() + o * chunk;
                                 for (std::size_t t = 0; t < chunk; ++t) dst[t] += src[t];
                               }
                             });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices) {
  const std::size_t rows = a.dim(0);
  const std::size_t width = a.numel() / rows;
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  Shape out_shape = a.shape();
  out_shape[0] = indices.size();
  std::vector<double> out(indices.size() * width);
  auto x = a.data();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[r]) +
                           " out of range for " + shape_to_string(a.shape()));
    }
    std::copy_n(x.data() + indices[r] * width, width, out.data() + r * width);
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(indices.begin(), indices.end());
  return Tensor::make_result(std::move(out_shape), std::move(out), {a},
                             [idx, width](const BackwardContext& ctx) {
                               auto g = ctx.input_grads[0];
                               for (std::size_t r = 0; r < idx->size(); ++r) {
                                 double* dst = g.data() + (*idx)[r] * width;
                                 const double* src = ctx.out_grad.data() + r * width;
                                 for (std::size_t t = 0; t < width; ++t) dst[t] += src[t];
                               }
                             });
}

Tensor max_along(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "max_along");
  auto x = a.data();
  auto arg = std::make_shared<std::vector<std::size_t>>(s.outer * s.inner);
  std::vector<double> out(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      std::size_t best = base;
      for (std::size_t j = 1; j < s.length; ++j) {
        const std::size_t t = base + j * s.inner;
        if (x[t] > x[best]) best = t;
      }
      out[o * s.inner + in] = x[best];
      (*arg)[o * s.inner + in] = best;
    }
  }
  return Tensor::make_result(drop_axis(a.shape(), axis), std::move(out), {a},
                             [arg](const BackwardContext& ctx) {
                               auto g = ctx.input_grads[0];
                               for (std::size_t t = 0; t < arg->size(); ++t) {
                                 g[(*arg)[t]] += ctx.out_grad[t];
                               }
                             });
}

Tensor mean_along(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "mean_along");
  auto x = a.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  const double inv = 1.0 / static_cast<double>(s.length);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      double total = 0.0;
      for (std::size_t j = 0; j < s.length; ++j) total += x[o * s.length * s.inner + j * s.inner + in];
      out[o * s.inner + in] = total * inv;
    }
  }
  return Tensor::make_result(drop_axis(a.shape(), axis), std::move(out), {a},
                             [s, inv](const BackwardContext& ctx) {
                               auto g = ctx.input_grads[0];
                               for (std::size_t o = 0; o < s.outer; ++o) {
                                 for (std::size_t in = 0; in < s.inner; ++in) {
                                   const double gv = ctx.out_grad[o * s.inner + in] * inv;
                                   for (std::size_t j = 0; j < s.length; ++j) {
                                     g[o * s.length * s.inner + j * s.inner + in] += gv;
                                   }
                                 }
                               }
                             });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return Tensor::make_result({1}, {total}, {a}, [](const BackwardContext& ctx) {
    for (double& g : ctx.input_grads[0]) g += ctx.out_grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("cross_entropy: logits " + shape_to_string(logits.shape()) +
                         " do not match " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  auto x = logits.data();
  auto probs = std::make_shared<std::vector<double>>(batch * classes);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] >= classes) {
      throw ArgumentError("cross_entropy: label " + std::to_string(labels[b]) + " >= class count " +
                          std::to_string(classes));
    }
    const double* row = x.data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    for (std::size_t c = 0; c < classes; ++c) (*probs)[b * classes + c] = std::exp(row[c] - mx) / z;
    total += -(row[labels[b]] - mx - std::log(z));
  }
  auto lab = std::make_shared<std::vector<std::size_t>>(labels.begin(), labels.end());
  return Tensor::make_result(
      {1}, {total / static_cast<double>(batch)}, {logits},
      [probs, lab, batch, classes](const BackwardContext& ctx) {
        auto g = ctx.input_grads[0];
        const double w = ctx.out_grad[0] / static_cast<double>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < classes; ++c) {
            const double target = c == (*lab)[b] ? 1.0 : 0.0;
            g[b * classes + c] += w * ((*probs)[b * classes + c] - target);
          }
        }
      });
}

}  // namespace pointcpr
