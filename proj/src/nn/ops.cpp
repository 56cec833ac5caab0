#include "sssbathy/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "sssbathy/error.hpp"

namespace sssbathy::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

struct ColGeometry {
  std::size_t channels, img_h, img_w, k, stride, pad, col_h, col_w;
  std::size_t rows() const { return channels * k * k; }
  std::size_t cols() const { return col_h * col_w; }
};

// cols[(c, ki, kj), (oh, ow)] = img[c, oh * s - p + ki, ow * s - p + kj] (zero outside).
void im2col(const double* img, const ColGeometry& g, double* cols) {
  const auto ncols = static_cast<std::ptrdiff_t>(g.cols());
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = img + c * g.img_h * g.img_w;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        double* out = cols + ((c * g.k + ki) * g.k + kj) * ncols;
        for (std::size_t oh = 0; oh < g.col_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          double* row = out + oh * g.col_w;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.img_h)) {
            std::fill(row, row + g.col_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(ih) * g.img_w;
          for (std::size_t ow = 0; ow < g.col_w; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
            row[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.img_w)) ? 0.0 : src[iw];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: img += scatter(cols).
void col2im(const double* cols, const ColGeometry& g, double* img) {
  const auto ncols = static_cast<std::ptrdiff_t>(g.cols());
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = img + c * g.img_h * g.img_w;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const double* in = cols + ((c * g.k + ki) * g.k + kj) * ncols;
        for (std::size_t oh = 0; oh < g.col_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.img_h)) continue;
          double* dst = plane + static_cast<std::size_t>(ih) * g.img_w;
          const double* row = in + oh * g.col_w;
          for (std::size_t ow = 0; ow < g.col_w; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.img_w)) dst[iw] += row[ow];
          }
        }
      }
    }
  }
}

void check_bias(const Var& bias, std::size_t channels, const char* op) {
  if (bias && bias->value.numel() != channels) throw ParameterError(std::string(op) + ": bias size mismatch");
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry geo) {
  const Shape xs = x->value.shape();
  const Shape ws = weight->value.shape();
  if (ws.c != xs.c) throw ParameterError("conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
                                         std::to_string(ws.c));
  if (ws.h != ws.w) throw ParameterError("conv2d: kernel must be square");
  if (geo.stride == 0) throw ParameterError("conv2d: stride must be >= 1");
  const std::size_t k = ws.h;
  if (xs.h + 2 * geo.pad < k || xs.w + 2 * geo.pad < k) throw ParameterError("conv2d: kernel larger than input");
  check_bias(bias, ws.n, "conv2d");
  const std::size_t oh = (xs.h + 2 * geo.pad - k) / geo.stride + 1;
  const std::size_t ow = (xs.w + 2 * geo.pad - k) / geo.stride + 1;
  const ColGeometry g{xs.c, xs.h, xs.w, k, geo.stride, geo.pad, oh, ow};
  const std::size_t cout = ws.n;

  Tensor out(Shape{xs.n, cout, oh, ow});
  std::vector<double> cols(g.rows() * g.cols());
  const CMapMat wmat(weight->value.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(g.rows()));
  for (std::size_t n = 0; n < xs.n; ++n) {
    im2col(x->value.sample(n).data(), g, cols.data());
    const CMapMat cm(cols.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    MapMat om(out.sample(n).data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(g.cols()));
    om.noalias() = wmat * cm;
    if (bias) {
      for (std::size_t c = 0; c < cout; ++c) om.row(static_cast<Eigen::Index>(c)).array() += bias->value[c];
    }
  }

  return make_result(std::move(out), {x, weight, bias}, [g, cout](Node& self) {
    const Var& x = self.parents[0];
    const Var& w = self.parents[1];
    const Var& b = self.parents[2];
    const std::size_t batch = self.value.shape().n;
    const CMapMat wmat(w->value.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(g.rows()));
    std::vector<double> cols(g.rows() * g.cols());
    std::vector<double> dcols(g.rows() * g.cols());
    for (std::size_t n = 0; n < batch; ++n) {
      const CMapMat dout(self.grad.sample(n).data(), static_cast<Eigen::Index>(cout),
                         static_cast<Eigen::Index>(g.cols()));
      if (w->requires_grad) {
        im2col(x->value.sample(n).data(), g, cols.data());
        const CMapMat cm(cols.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
        MapMat dw(w->grad_buffer().data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(g.rows()));
        dw.noalias() += dout * cm.transpose();
      }
      if (b && b->requires_grad) {
        Tensor& db = b->grad_buffer();
        const double* d = self.grad.sample(n).data();
        for (std::size_t c = 0; c < cout; ++c) {
          double s = 0.0;
          for (std::size_t j = 0; j < g.cols(); ++j) s += d[c * g.cols() + j];
          db[c] += s;
        }
      }
      if (x->requires_grad) {
        MapMat dc(dcols.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
        dc.noalias() = wmat.transpose() * dout;
        col2im(dcols.data(), g, x->grad_buffer().sample(n).data());
      }
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry geo) {
  const Shape xs = x->value.shape();
  const Shape ws = weight->value.shape();
  if (ws.n != xs.c) throw ParameterError("conv_transpose2d: input has " + std::to_string(xs.c) +
                                         " channels, weight expects " + std::to_string(ws.n));
  if (ws.h != ws.w) throw ParameterError("conv_transpose2d: kernel must be square");
  if (geo.stride == 0 || geo.output_pad >= geo.stride) throw ParameterError("conv_transpose2d: invalid stride/output_pad");
  const std::size_t k = ws.h;
  const std::size_t cin = xs.c, cout = ws.c;
  const long full_h = static_cast<long>((xs.h - 1) * geo.stride + k + geo.output_pad) - 2 * static_cast<long>(geo.pad);
  const long full_w = static_cast<long>((xs.w - 1) * geo.stride + k + geo.output_pad) - 2 * static_cast<long>(geo.pad);
  if (full_h <= 0 || full_w <= 0) throw ParameterError("conv_transpose2d: empty output");
  check_bias(bias, cout, "conv_transpose2d");
  const ColGeometry g{cout, static_cast<std::size_t>(full_h), static_cast<std::size_t>(full_w), k, geo.stride, geo.pad,
                      xs.h, xs.w};

  Tensor out(Shape{xs.n, cout, g.img_h, g.img_w});
  std::vector<double> cols(g.rows() * g.cols());
  const CMapMat wmat(weight->value.data(), static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(g.rows()));
  for (std::size_t n = 0; n < xs.n; ++n) {
    const CMapMat xm(x->value.sample(n).data(), static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(g.cols()));
    MapMat cm(cols.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    cm.noalias() = wmat.transpose() * xm;
    double* o = out.sample(n).data();
    col2im(cols.data(), g, o);
    if (bias) {
      for (std::size_t c = 0; c < cout; ++c) {
        double* plane = o + c * g.img_h * g.img_w;
        for (std::size_t i = 0; i < g.img_h * g.img_w; ++i) plane[i] += bias->value[c];
      }
    }
  }

  return make_result(std::move(out), {x, weight, bias}, [g, cin, cout](Node& self) {
    const Var& x = self.parents[0];
    const Var& w = self.parents[1];
    const Var& b = self.parents[2];
    const std::size_t batch = self.value.shape().n;
    const CMapMat wmat(w->value.data(), static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(g.rows()));
    std::vector<double> dcols(g.rows() * g.cols());
    for (std::size_t n = 0; n < batch; ++n) {
      const double* dout = self.grad.sample(n).data();
      im2col(dout, g, dcols.data());
      const CMapMat dc(dcols.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
      if (w->requires_grad) {
        const CMapMat xm(x->value.sample(n).data(), static_cast<Eigen::Index>(cin),
                         static_cast<Eigen::Index>(g.cols()));
        MapMat dw(w->grad_buffer().data(), static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(g.rows()));
        dw.noalias() += xm * dc.transpose();
      }
      if (x->requires_grad) {
        MapMat dx(x->grad_buffer().sample(n).data(), static_cast<Eigen::Index>(cin),
                  static_cast<Eigen::Index>(g.cols()));
        dx.noalias() += wmat * dc;
      }
      if (b && b->requires_grad) {
        Tensor& db = b->grad_buffer();
        for (std::size_t c = 0; c < cout; ++c) {
          const double* plane = dout + c * g.img_h * g.img_w;
          double s = 0.0;
          for (std::size_t i = 0; i < g.img_h * g.img_w; ++i) s += plane[i];
          db[c] += s;
        }
      }
    }
  });
}

Var instance_norm(const Var& x, double eps) {
  const Shape s = x->value.shape();
  const std::size_t hw = s.plane();
  if (hw == 0) throw ParameterError("instance_norm: empty spatial dims");
  Tensor out(s);
  std::vector<double> inv_std(s.n * s.c);
  const double* in = x->value.data();
  double* o = out.data();
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const double* src = in + p * hw;
    double mean = 0.0;
    for (std::size_t i = 0; i < hw; ++i) mean += src[i];
    mean /= static_cast<double>(hw);
    double var = 0.0;
    for (std::size_t i = 0; i < hw; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<double>(hw);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[p] = is;
    for (std::size_t i = 0; i < hw; ++i) o[p * hw + i] = (src[i] - mean) * is;
  }
  return make_result(std::move(out), {x}, [inv_std = std::move(inv_std), hw](Node& self) {
    const Var& x = self.parents[0];
    double* dx = x->grad_buffer().data();
    const double* dy = self.grad.data();
    const double* xhat = self.value.data();
    const double m = static_cast<double>(hw);
    for (std::size_t p = 0; p < inv_std.size(); ++p) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += dy[p * hw + i];
        sum_dy_xhat += dy[p * hw + i] * xhat[p * hw + i];
      }
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t j = p * hw + i;
        dx[j] += inv_std[p] * (dy[j] - sum_dy / m - xhat[j] * sum_dy_xhat / m);
      }
    }
  });
}

Var relu(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return make_result(std::move(out), {x}, [](Node& self) {
    const Var& x = self.parents[0];
    double* dx = x->grad_buffer().data();
    for (std::size_t i = 0; i < self.value.numel(); ++i) {
      if (x->value[i] > 0.0) dx[i] += self.grad[i];
    }
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "add");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (const Var& p : self.parents) {
      if (!p->requires_grad) continue;
      double* d = p->grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.numel(); ++i) d[i] += self.grad[i];
    }
  });
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var softplus(const Var& x, double floor) {
  Tensor out = x->value;
  for (double& v : out.values()) v = softplus_value(v) + floor;
  return make_result(std::move(out), {x}, [](Node& self) {
    const Var& x = self.parents[0];
    double* dx = x->grad_buffer().data();
    for (std::size_t i = 0; i < self.value.numel(); ++i) dx[i] += self.grad[i] * sigmoid_value(x->value[i]);
  });
}

Var select_channel(const Var& x, std::size_t c) {
  const Shape s = x->value.shape();
  if (c >= s.c) throw ParameterError("select_channel: channel out of range");
  Tensor out(Shape{s.n, 1, s.h, s.w});
  const std::size_t hw = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    std::copy_n(x->value.data() + (n * s.c + c) * hw, hw, out.data() + n * hw);
  }
  return make_result(std::move(out), {x}, [c, s, hw](Node& self) {
    double* dx = self.parents[0]->grad_buffer().data();
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t i = 0; i < hw; ++i) dx[(n * s.c + c) * hw + i] += self.grad[n * hw + i];
    }
  });
}

Var weighted_sum(const Var& x, const Tensor& weights) {
  check_same_shape(x->value, weights, "weighted_sum");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.numel(); ++i) s += x->value[i] * weights[i];
  return make_result(Tensor(Shape{}, s), {x}, [weights](Node& self) {
    double* dx = self.parents[0]->grad_buffer().data();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < weights.numel(); ++i) dx[i] += g * weights[i];
  });
}

Var laplace_nll(const Var& mu, const Var& var, const Tensor& target, const Tensor& mask) {
  check_same_shape(mu->value, var->value, "laplace_nll");
  check_same_shape(mu->value, target, "laplace_nll");
  check_same_shape(mu->value, mask, "laplace_nll");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < target.numel(); ++i) {
    if (mask[i] == 0.0) continue;
    const double v = var->value[i];
    sum += std::abs(target[i] - mu->value[i]) / v + std::log(v);
    ++count;
  }
  if (count == 0) throw EmptyMaskError();
  const double inv_n = 1.0 / static_cast<double>(count);
  return make_result(Tensor(Shape{}, sum / static_cast<double>(count)), {mu, var}, [target, mask, inv_n](Node& self) {
    const Var& mu = self.parents[0];
    const Var& var = self.parents[1];
    const double g = self.grad[0] * inv_n;
    double* dmu = mu->requires_grad ? mu->grad_buffer().data() : nullptr;
    double* dvar = var->requires_grad ? var->grad_buffer().data() : nullptr;
    for (std::size_t i = 0; i < target.numel(); ++i) {
      if (mask[i] == 0.0) continue;
      const double r = target[i] - mu->value[i];
      const double v = var->value[i];
      const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
      if (dmu) dmu[i] += g * (-sign / v);
      if (dvar) dvar[i] += g * (-std::abs(r) / (v * v) + 1.0 / v);
    }
  });
}

Var masked_mae(const Var& mu, const Tensor& target, const Tensor& mask) {
  check_same_shape(mu->value, target, "masked_mae");
  check_same_shape(mu->value, mask, "masked_mae");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < target.numel(); ++i) {
    if (mask[i] == 0.0) continue;
    sum += std::abs(target[i] - mu->value[i]);
    ++count;
  }
  if (count == 0) throw EmptyMaskError();
  const double inv_n = 1.0 / static_cast<double>(count);
  return make_result(Tensor(Shape{}, sum / static_cast<double>(count)), {mu}, [target, mask, inv_n](Node& self) {
    const Var& mu = self.parents[0];
    double* dmu = mu->grad_buffer().data();
    const double g = self.grad[0] * inv_n;
    for (std::size_t i = 0; i < target.numel(); ++i) {
      if (mask[i] == 0.0) continue;
      const double r = target[i] - mu->value[i];
      dmu[i] += g * (r > 0.0 ? -1.0 : (r < 0.0 ? 1.0 : 0.0));
    }
  });
}

}  // namespace sssbathy::nn
