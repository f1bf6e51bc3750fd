// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include "segravir/error.hpp"

namespace segravir::ops {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

using NodePtr = std::shared_ptr<detail::Node>;

bool needs_graph(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

// Creates the output node; when `record` is set, wires `parents` and marks
// the output as requiring grad.
NodePtr make_output(Shape shape, std::vector<double> data, bool record,
                    std::initializer_list<const Tensor*> parents) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  if (record) {
    node->requires_grad = true;
    for (const Tensor* p : parents) {
      if (p->defined()) node->parents.push_back(p->node());
    }
  }
  return node;
}

// Parent gradient buffer, or nullptr if that parent needs none.
std::vector<double>* grad_of(const NodePtr& parent) {
  if (!parent || !parent->requires_grad) return nullptr;
  return &parent->ensure_grad();
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (!t.defined() || t.rank() != rank) {
    throw InvalidArgument(std::string(what) + " must have rank " +
                          std::to_string(rank) + ", got " +
                          (t.defined() ? to_string(t.shape()) : "undefined"));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(what) + ": shape mismatch " +
                          to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kh, kw;
  std::size_t out_h, out_w;
  int stride, padding;
};

// Unfolds one CHW image into a [C*kh*kw, out_h*out_w] row-major matrix.
void im2col(const double* image, const ConvGeometry& g, double* cols) {
  const std::size_t out_area = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double* row = cols + ((c * g.kh + ki) * g.kw + kj) * out_area;
        for (std::size_t oi = 0; oi < g.out_h; ++oi) {
          const long ii = static_cast<long>(oi) * g.stride + ki - g.padding;
          double* dst = row + oi * g.out_w;
          if (ii < 0 || ii >= static_cast<long>(g.height)) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + ii * g.width;
          for (std::size_t oj = 0; oj < g.out_w; ++oj) {
            const long jj = static_cast<long>(oj) * g.stride + kj - g.padding;
            dst[oj] = (jj < 0 || jj >= static_cast<long>(g.width)) ? 0.0
                                                                   : src[jj];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto the image.
void col2im_add(const double* cols, const ConvGeometry& g, double* image) {
  const std::size_t out_area = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double* row = cols + ((c * g.kh + ki) * g.kw + kj) * out_area;
        for (std::size_t oi = 0; oi < g.out_h; ++oi) {
          const long ii = static_cast<long>(oi) * g.stride + ki - g.padding;
          if (ii < 0 || ii >= static_cast<long>(g.height)) continue;
          const double* src = row + oi * g.out_w;
          double* dst = plane + ii * g.width;
          for (std::size_t oj = 0; oj < g.out_w; ++oj) {
            const long jj = static_cast<long>(oj) * g.stride + kj - g.padding;
            if (jj >= 0 && jj < static_cast<long>(g.width)) dst[jj] += src[oj];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.padding == 0;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding) {
  require_rank(input, 4, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  if (stride < 1) throw InvalidArgument("conv2d stride must be >= 1");
  if (padding < 0) throw InvalidArgument("conv2d padding must be >= 0");
  const std::size_t batch = input.dim(0);
  const std::size_t filters = kernel.dim(0);
  ConvGeometry g{};
  g.channels = input.dim(1);
  g.height = input.dim(2);
  g.width = input.dim(3);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  g.stride = stride;
  g.padding = padding;
  if (kernel.dim(1) != g.channels) {
    throw InvalidArgument("conv2d channel mismatch: input " +
                          to_string(input.shape()) + " has " +
                          std::to_string(g.channels) + " channels, kernel " +
                          to_string(kernel.shape()) + " expects " +
                          std::to_string(kernel.dim(1)));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != filters)) {
    throw InvalidArgument("conv2d bias shape " + to_string(bias.shape()) +
                          " does not match " + std::to_string(filters) +
                          " filters");
  }
  const std::size_t padded_h = g.height + 2 * padding;
  const std::size_t padded_w = g.width + 2 * padding;
  if (g.kh > padded_h || g.kw > padded_w) {
    throw InvalidArgument("conv2d kernel " + to_string(kernel.shape()) +
                          " larger than padded input " +
                          to_string(input.shape()));
  }
  g.out_h = (padded_h - g.kh) / stride + 1;
  g.out_w = (padded_w - g.kw) / stride + 1;

  const std::size_t in_image = g.channels * g.height * g.width;
  const std::size_t out_area = g.out_h * g.out_w;
  const std::size_t patch = g.channels * g.kh * g.kw;
  std::vector<double> out(batch * filters * out_area);
  std::vector<double> cols(is_pointwise(g) ? 0 : patch * out_area);
  ConstMatrixMap w(kernel.data().data(), filters, patch);
  for (std::size_t n = 0; n < batch; ++n) {
    const double* x = input.data().data() + n * in_image;
    const double* col_ptr = x;
    if (!is_pointwise(g)) {
      im2col(x, g, cols.data());
      col_ptr = cols.data();
    }
    MatrixMap y(out.data() + n * filters * out_area, filters, out_area);
    y.noalias() = w * ConstMatrixMap(col_ptr, patch, out_area);
    if (bias.defined()) {
      for (std::size_t f = 0; f < filters; ++f) {
        y.row(f).array() += bias.data()[f];
      }
    }
  }

  const bool record = needs_graph({&input, &kernel, &bias});
  auto node = make_output({batch, filters, g.out_h, g.out_w}, std::move(out),
                          record, {&input, &kernel, &bias});
  if (record) {
    NodePtr in_node = input.node();
    NodePtr k_node = kernel.node();
    NodePtr b_node = bias.defined() ? bias.node() : nullptr;
    node->backward_fn = [in_node, k_node, b_node, g, batch, filters, in_image,
                         out_area, patch](detail::Node& self) {
      std::vector<double>* dx = grad_of(in_node);
      std::vector<double>* dk = grad_of(k_node);
      std::vector<double>* db = grad_of(b_node);
      ConstMatrixMap w(k_node->data.data(), filters, patch);
      std::vector<double> cols(is_pointwise(g) ? 0 : patch * out_area);
      std::vector<double> dcols(patch * out_area);
      for (std::size_t n = 0; n < batch; ++n) {
        ConstMatrixMap dy(self.grad.data() + n * filters * out_area, filters,
                          out_area);
        if (db) {
          for (std::size_t f = 0; f < filters; ++f) {
            (*db)[f] += dy.row(f).sum();
          }
        }
        if (dk) {
          const double* x = in_node->data.data() + n * in_image;
          const double* col_ptr = x;
          if (!is_pointwise(g)) {
            im2col(x, g, cols.data());
            col_ptr = cols.data();
          }
          MatrixMap dw(dk->data(), filters, patch);
          dw.noalias() +=
              dy * ConstMatrixMap(col_ptr, patch, out_area).transpose();
        }
        if (dx) {
          double* dx_n = dx->data() + n * in_image;
          if (is_pointwise(g)) {
            MatrixMap(dx_n, patch, out_area).noalias() += w.transpose() * dy;
          } else {
            MatrixMap(dcols.data(), patch, out_area).noalias() =
                w.transpose() * dy;
            col2im_add(dcols.data(), g, dx_n);
          }
        }
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel,
                         const Tensor& bias, int stride) {
  require_rank(input, 4, "transposed_conv2d input");
  require_rank(kernel, 4, "transposed_conv2d kernel");
  if (stride < 1) throw InvalidArgument("transposed_conv2d stride must be >= 1");
  if (kernel.dim(2) != kernel.dim(3)) {
    throw InvalidArgument("transposed_conv2d kernel must be square, got " +
                          to_string(kernel.shape()));
  }
  if (kernel.dim(2) != static_cast<std::size_t>(stride)) {
    throw InvalidArgument("transposed_conv2d kernel size " +
                          std::to_string(kernel.dim(2)) +
                          " must equal stride " + std::to_string(stride));
  }
  const std::size_t batch = input.dim(0);
  const std::size_t channels = input.dim(1);
  const std::size_t height = input.dim(2);
  const std::size_t width = input.dim(3);
  if (kernel.dim(0) != channels) {
    throw InvalidArgument("transposed_conv2d channel mismatch: input " +
                          to_string(input.shape()) + " vs kernel " +
                          to_string(kernel.shape()));
  }
  const std::size_t filters = kernel.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != filters)) {
    throw InvalidArgument("transposed_conv2d bias shape " +
                          to_string(bias.shape()) + " does not match " +
                          std::to_string(filters) + " filters");
  }
  const std::size_t s = static_cast<std::size_t>(stride);
  const std::size_t taps = filters * s * s;
  const std::size_t in_area = height * width;
  const std::size_t out_h = height * s;
  const std::size_t out_w = width * s;
  const std::size_t out_image = filters * out_h * out_w;

  // cols[(f,a,b), (i,j)] = sum_c K[c,(f,a,b)] * X[c,(i,j)]
  std::vector<double> out(batch * out_image);
  std::vector<double> cols(taps * in_area);
  ConstMatrixMap k(kernel.data().data(), channels, taps);
  for (std::size_t n = 0; n < batch; ++n) {
    ConstMatrixMap x(input.data().data() + n * channels * in_area, channels,
                     in_area);
    MatrixMap(cols.data(), taps, in_area).noalias() = k.transpose() * x;
    double* y = out.data() + n * out_image;
    for (std::size_t f = 0; f < filters; ++f) {
      const double b = bias.defined() ? bias.data()[f] : 0.0;
      for (std::size_t a = 0; a < s; ++a) {
        for (std::size_t c = 0; c < s; ++c) {
          const double* src = cols.data() + ((f * s + a) * s + c) * in_area;
          for (std::size_t i = 0; i < height; ++i) {
            double* dst = y + (f * out_h + i * s + a) * out_w + c;
            for (std::size_t j = 0; j < width; ++j) {
              dst[j * s] = src[i * width + j] + b;
            }
          }
        }
      }
    }
  }

  const bool record = needs_graph({&input, &kernel, &bias});
  auto node = make_output({batch, filters, out_h, out_w}, std::move(out),
                          record, {&input, &kernel, &bias});
  if (record) {
    NodePtr in_node = input.node();
    NodePtr k_node = kernel.node();
    NodePtr b_node = bias.defined() ? bias.node() : nullptr;
    node->backward_fn = [in_node, k_node, b_node, batch, channels, filters, s,
                         taps, in_area, height, width, out_h, out_w,
                         out_image](detail::Node& self) {
      std::vector<double>* dx = grad_of(in_node);
      std::vector<double>* dk = grad_of(k_node);
      std::vector<double>* db = grad_of(b_node);
      ConstMatrixMap k(k_node->data.data(), channels, taps);
      std::vector<double> dcols(taps * in_area);
      for (std::size_t n = 0; n < batch; ++n) {
        const double* dy = self.grad.data() + n * out_image;
        for (std::size_t f = 0; f < filters; ++f) {
          for (std::size_t a = 0; a < s; ++a) {
            for (std::size_t c = 0; c < s; ++c) {
              double* dst = dcols.data() + ((f * s + a) * s + c) * in_area;
              for (std::size_t i = 0; i < height; ++i) {
                const double* src = dy + (f * out_h + i * s + a) * out_w + c;
                for (std::size_t j = 0; j < width; ++j) {
                  dst[i * width + j] = src[j * s];
                }
              }
            }
          }
        }
        ConstMatrixMap gcols(dcols.data(), taps, in_area);
        if (db) {
          for (std::size_t f = 0; f < filters; ++f) {
            double acc = 0.0;
            for (std::size_t t = 0; t < s * s; ++t) {
              acc += gcols.row(f * s * s + t).sum();
            }
            (*db)[f] += acc;
          }
        }
        if (dk) {
          ConstMatrixMap x(in_node->data.data() + n * channels * in_area,
                           channels, in_area);
          MatrixMap(dk->data(), channels, taps).noalias() +=
              x * gcols.transpose();
        }
        if (dx) {
          MatrixMap(dx->data() + n * channels * in_area, channels, in_area)
              .noalias() += k * gcols;
        }
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

BatchNormStats BatchNormStats::for_channels(std::size_t channels) {
  BatchNormStats stats;
  stats.running_mean.assign(channels, 0.0);
  stats.running_var.assign(channels, 1.0);
  return stats;
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, Mode mode) {
  require_rank(input, 4, "batch_norm input");
  const std::size_t batch = input.dim(0);
  const std::size_t channels = input.dim(1);
  const std::size_t area = input.dim(2) * input.dim(3);
  if (gamma.numel() != channels || beta.numel() != channels) {
    throw InvalidArgument("batch_norm affine parameters must have " +
                          std::to_string(channels) + " elements");
  }
  if (stats.running_mean.size() != channels ||
      stats.running_var.size() != channels) {
    throw InvalidArgument("batch_norm running stats sized for " +
                          std::to_string(stats.running_mean.size()) +
                          " channels, input has " + std::to_string(channels));
  }
  const std::size_t count = batch * area;
  if (count == 0) throw InvalidArgument("batch_norm over an empty batch");

  const double* x = input.data().data();
  std::vector<double> xhat(input.numel());
  std::vector<double> inv_std(channels);
  std::vector<double> out(input.numel());
  for (std::size_t c = 0; c < channels; ++c) {
    double mu;
    double var;
    if (mode == Mode::kTrain) {
      double acc = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const double* p = x + (n * channels + c) * area;
        for (std::size_t i = 0; i < area; ++i) acc += p[i];
      }
      mu = acc / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const double* p = x + (n * channels + c) * area;
        for (std::size_t i = 0; i < area; ++i) {
          const double d = p[i] - mu;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(count);
      const double unbiased =
          count > 1 ? sq / static_cast<double>(count - 1) : var;
      stats.running_mean[c] =
          (1.0 - stats.momentum) * stats.running_mean[c] + stats.momentum * mu;
      stats.running_var[c] = (1.0 - stats.momentum) * stats.running_var[c] +
                             stats.momentum * unbiased;
    } else {
      mu = stats.running_mean[c];
      var = stats.running_var[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + stats.epsilon);
    const double g = gamma.data()[c];
    const double b = beta.data()[c];
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t base = (n * channels + c) * area;
      for (std::size_t i = 0; i < area; ++i) {
        const double h = (x[base + i] - mu) * inv_std[c];
        xhat[base + i] = h;
        out[base + i] = g * h + b;
      }
    }
  }

  const bool record = needs_graph({&input, &gamma, &beta});
  auto node = make_output(input.shape(), std::move(out), record,
                          {&input, &gamma, &beta});
  if (record) {
    NodePtr in_node = input.node();
    NodePtr g_node = gamma.node();
    NodePtr b_node = beta.node();
    node->backward_fn = [in_node, g_node, b_node, xhat = std::move(xhat),
                         inv_std = std::move(inv_std), batch, channels, area,
                         count, mode](detail::Node& self) {
      std::vector<double>* dx = grad_of(in_node);
      std::vector<double>* dg = grad_of(g_node);
      std::vector<double>* db = grad_of(b_node);
      const double* dy = self.grad.data();
      for (std::size_t c = 0; c < channels; ++c) {
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (std::size_t n = 0; n < batch; ++n) {
          const std::size_t base = (n * channels + c) * area;
          for (std::size_t i = 0; i < area; ++i) {
            sum_dy += dy[base + i];
            sum_dy_xhat += dy[base + i] * xhat[base + i];
          }
        }
        if (dg) (*dg)[c] += sum_dy_xhat;
        if (db) (*db)[c] += sum_dy;
        if (!dx) continue;
        const double g = g_node->data[c];
        const double m = static_cast<double>(count);
        for (std::size_t n = 0; n < batch; ++n) {
          const std::size_t base = (n * channels + c) * area;
          for (std::size_t i = 0; i < area; ++i) {
            if (mode == Mode::kTrain) {
              (*dx)[base + i] += g * inv_std[c] / m *
                                 (m * dy[base + i] - sum_dy -
                                  xhat[base + i] * sum_dy_xhat);
            } else {
              (*dx)[base + i] += g * inv_std[c] * dy[base + i];
            }
          }
        }
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  const bool record = needs_graph({&x});
  auto node = make_output(x.shape(), std::move(out), record, {&x});
  if (record) {
    NodePtr in_node = x.node();
    node->backward_fn = [in_node](detail::Node& self) {
      std::vector<double>& dx = in_node->ensure_grad();
      for (std::size_t i = 0; i < dx.size(); ++i) {
        if (in_node->data[i] > 0.0) dx[i] += self.grad[i];
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor softmax(const Tensor& logits, int axis, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("softmax temperature must be positive and finite, got " +
                          std::to_string(temperature));
  }
  const Shape& shape = logits.shape();
  if (axis < 0 || static_cast<std::size_t>(axis) >= shape.size()) {
    throw InvalidArgument("softmax axis " + std::to_string(axis) +
                          " out of range for " + to_string(shape));
  }
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t k = shape[axis];

  const double* z = logits.data().data();
  std::vector<double> out(logits.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * k * inner + in;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        peak = std::max(peak, z[base + c * inner]);
      }
      double total = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double e = std::exp((z[base + c * inner] - peak) / temperature);
        out[base + c * inner] = e;
        total += e;
      }
      for (std::size_t c = 0; c < k; ++c) out[base + c * inner] /= total;
    }
  }

  const bool record = needs_graph({&logits});
  auto node = make_output(shape, std::move(out), record, {&logits});
  if (record) {
    NodePtr in_node = logits.node();
    node->backward_fn = [in_node, outer, inner, k,
                         temperature](detail::Node& self) {
      std::vector<double>& dz = in_node->ensure_grad();
      const double* y = self.data.data();
      const double* dy = self.grad.data();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * k * inner + in;
          double dot = 0.0;
          for (std::size_t c = 0; c < k; ++c) {
            dot += dy[base + c * inner] * y[base + c * inner];
          }
          for (std::size_t c = 0; c < k; ++c) {
            const std::size_t idx = base + c * inner;
            dz[idx] += y[idx] * (dy[idx] - dot) / temperature;
          }
        }
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor dropout(const Tensor& x, double rate, std::uint64_t seed, Mode mode) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw InvalidArgument("dropout rate must lie in [0, 1), got " +
                          std::to_string(rate));
  }
  if (mode == Mode::kEval || rate == 0.0) return x;

  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = uniform(engine) < rate ? 0.0 : keep_scale;
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * mask[i];

  const bool record = needs_graph({&x});
  auto node = make_output(x.shape(), std::move(out), record, {&x});
  if (record) {
    NodePtr in_node = x.node();
    node->backward_fn = [in_node, mask = std::move(mask)](detail::Node& self) {
      std::vector<double>& dx = in_node->ensure_grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * mask[i];
    };
  }
  return Tensor::from_node(std::move(node));
}

namespace {

Tensor elementwise_binary(const Tensor& a, const Tensor& b, int kind,
                          const char* name) {
  require_same_shape(a, b, name);
  const std::size_t n = a.numel();
  std::vector<double> out(n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = kind == 0 ? pa[i] + pb[i] : kind == 1 ? pa[i] - pb[i] : pa[i] * pb[i];
  }
  const bool record = needs_graph({&a, &b});
  auto node = make_output(a.shape(), std::move(out), record, {&a, &b});
  if (record) {
    NodePtr na = a.node();
    NodePtr nb = b.node();
    node->backward_fn = [na, nb, kind](detail::Node& self) {
      const std::size_t n = self.grad.size();
      if (std::vector<double>* da = grad_of(na)) {
        for (std::size_t i = 0; i < n; ++i) {
          (*da)[i] += kind == 2 ? self.grad[i] * nb->data[i] : self.grad[i];
        }
      }
      if (std::vector<double>* db = grad_of(nb)) {
        for (std::size_t i = 0; i < n; ++i) {
          (*db)[i] += kind == 0   ? self.grad[i]
                      : kind == 1 ? -self.grad[i]
                                  : self.grad[i] * na->data[i];
        }
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary(a, b, 0, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary(a, b, 1, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_binary(a, b, 2, "mul");
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v *= factor;
  const bool record = needs_graph({&x});
  auto node = make_output(x.shape(), std::move(out), record, {&x});
  if (record) {
    NodePtr in_node = x.node();
    node->backward_fn = [in_node, factor](detail::Node& self) {
      std::vector<double>& dx = in_node->ensure_grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += factor * self.grad[i];
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const bool record = needs_graph({&x});
  auto node = make_output({}, {acc}, record, {&x});
  if (record) {
    NodePtr in_node = x.node();
    node->backward_fn = [in_node](detail::Node& self) {
      std::vector<double>& dx = in_node->ensure_grad();
      for (double& d : dx) d += self.grad[0];
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw InvalidArgument("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor weighted_sum(const std::vector<Tensor>& scalars,
                    const std::vector<double>& weights) {
  if (scalars.size() != weights.size()) {
    throw InvalidArgument("weighted_sum: " + std::to_string(scalars.size()) +
                          " terms but " + std::to_string(weights.size()) +
                          " weights");
  }
  double total = 0.0;
  bool record = false;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (weights[i] == 0.0) continue;
    if (scalars[i].numel() != 1) {
      throw InvalidArgument("weighted_sum expects scalar terms, got " +
                            to_string(scalars[i].shape()));
    }
    total += weights[i] * scalars[i].item();
    record = record || (grad_enabled() && scalars[i].requires_grad());
    active.push_back(i);
  }
  auto node = std::make_shared<detail::Node>();
  node->data = {total};
  if (record) {
    node->requires_grad = true;
    std::vector<std::pair<NodePtr, double>> terms;
    for (std::size_t i : active) {
      node->parents.push_back(scalars[i].node());
      terms.emplace_back(scalars[i].node(), weights[i]);
    }
    node->backward_fn = [terms = std::move(terms)](detail::Node& self) {
      for (const auto& [parent, w] : terms) {
        if (std::vector<double>* d = grad_of(parent)) (*d)[0] += w * self.grad[0];
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

}  // namespace segravir::ops
