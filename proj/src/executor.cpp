// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#include "poseopt/executor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "poseopt/common.hpp"
#include "poseopt/kernels.hpp"

namespace poseopt {

namespace {

Tensor make_3d(const TensorShape& s) {
  return Tensor({static_cast<uint32_t>(s.dims[0]), static_cast<uint32_t>(s.dims[1]),
                 static_cast<uint32_t>(s.dims[2])});
}

Tensor run_conv(const OpNode& n, const Tensor& in, const NodeWeights& nw,
                const TensorShape& out_shape) {
  const ConvAttrs& a = n.conv();
  int icg = a.in_channels / a.groups;
  int ocg = a.out_channels / a.groups;
  std::vector<uint32_t> want{static_cast<uint32_t>(a.out_channels),
                             static_cast<uint32_t>(icg), static_cast<uint32_t>(a.kernel_h),
                             static_cast<uint32_t>(a.kernel_w)};
  if (nw.weight.dims != want)
    throw data_error("ShapeMismatch", "weight tensor shape mismatch at node '" + n.id + "'");
  if (a.has_bias &&
      (!nw.bias || nw.bias->dims != std::vector<uint32_t>{static_cast<uint32_t>(a.out_channels)}))
    throw data_error("ShapeMismatch", "bias tensor shape mismatch at node '" + n.id + "'");

  Tensor out = make_3d(out_shape);
  int oh = static_cast<int>(out.dims[1]);
  int ow = static_cast<int>(out.dims[2]);
  std::vector<double> acc(ow);
  for (int oc = 0; oc < a.out_channels; ++oc) {
    int group = oc / ocg;
    const float* w_oc = nw.weight.data.data() +
                        static_cast<size_t>(oc) * icg * a.kernel_h * a.kernel_w;
    double bias = a.has_bias ? static_cast<double>(nw.bias->data[oc]) : 0.0;
    for (int oy = 0; oy < oh; ++oy) {
      std::fill(acc.begin(), acc.end(), bias);
      kernels::ConvRowArgs args;
      args.in = in.data.data();
      args.in_h = static_cast<int>(in.dims[1]);
      args.in_w = static_cast<int>(in.dims[2]);
      args.w = w_oc;
      args.icg = icg;
      args.in_c_offset = group * icg;
      args.kh = a.kernel_h;
      args.kw = a.kernel_w;
      args.stride = a.stride;
      args.pad = a.padding;
      args.dil = a.dilation;
      args.oy = oy;
      args.out_w = ow;
      args.acc = acc.data();
      kernels::conv2d_row(args);
      float* out_row = &out.at3(oc, oy, 0);
      for (int ox = 0; ox < ow; ++ox) out_row[ox] = static_cast<float>(acc[ox]);
    }
  }
  return out;
}

Tensor run_activation(const OpNode& n, Tensor t, const WeightStore& w) {
  switch (n.act().fn) {
    case ActFn::Relu:
      kernels::relu(t.data.data(), t.data.size());
      break;
    case ActFn::Hardtanh:
      kernels::hardtanh(t.data.data(), t.data.size());
      break;
    case ActFn::Sigmoid:
      for (float& v : t.data)
        v = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
      break;
    case ActFn::Swish:
      for (float& v : t.data) {
        double x = v;
        v = static_cast<float>(x / (1.0 + std::exp(-x)));
      }
      break;
    case ActFn::Prelu: {
      auto it = w.entries.find(n.id);
      if (it == w.entries.end())
        throw data_error("MissingWeights", "prelu node '" + n.id + "' needs per-channel slopes");
      const Tensor& slope = it->second.weight;
      if (slope.dims != std::vector<uint32_t>{t.dims[0]})
        throw data_error("ShapeMismatch", "prelu slope shape mismatch at '" + n.id + "'");
      size_t per_ch = static_cast<size_t>(t.dims[1]) * t.dims[2];
      for (uint32_t c = 0; c < t.dims[0]; ++c) {
        float s = slope.data[c];
        float* p = t.data.data() + static_cast<size_t>(c) * per_ch;
        for (size_t i = 0; i < per_ch; ++i)
          if (p[i] < 0.0f) p[i] *= s;
      }
      break;
    }
  }
  return t;
}

Tensor run_upsample(const OpNode& n, const Tensor& in, const TensorShape& out_shape) {
  const UpsampleAttrs& a = n.upsample();
  Tensor out = make_3d(out_shape);
  int ih = static_cast<int>(in.dims[1]), iw = static_cast<int>(in.dims[2]);
  int oh = static_cast<int>(out.dims[1]), ow = static_cast<int>(out.dims[2]);
  for (uint32_t c = 0; c < out.dims[0]; ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        if (a.mode == UpsampleMode::Nearest) {
          out.at3(c, y, x) = in.at3(c, y / a.scale, x / a.scale);
        } else {
          // half-pixel (align_corners=false) source mapping
          double sy = (y + 0.5) / a.scale - 0.5;
          double sx = (x + 0.5) / a.scale - 0.5;
          int y0 = static_cast<int>(std::floor(sy));
          int x0 = static_cast<int>(std::floor(sx));
          double fy = sy - y0, fx = sx - x0;
          auto sample = [&](int yy, int xx) {
            yy = std::min(std::max(yy, 0), ih - 1);
            xx = std::min(std::max(xx, 0), iw - 1);
            return static_cast<double>(in.at3(c, yy, xx));
          };
          double v = (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                     fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
          out.at3(c, y, x) = static_cast<float>(v);
        }
      }
    }
  }
  return out;
}

Tensor run_maxpool(const OpNode& n, const Tensor& in, const TensorShape& out_shape) {
  const PoolAttrs& a = n.pool();
  Tensor out = make_3d(out_shape);
  int ih = static_cast<int>(in.dims[1]), iw = static_cast<int>(in.dims[2]);
  for (uint32_t c = 0; c < out.dims[0]; ++c) {
    for (uint32_t y = 0; y < out.dims[1]; ++y) {
      for (uint32_t x = 0; x < out.dims[2]; ++x) {
        float best = -std::numeric_limits<float>::infinity();
        for (int ky = 0; ky < a.kernel; ++ky) {
          int iy = static_cast<int>(y) * a.stride - a.padding + ky;
          if (iy < 0 || iy >= ih) continue;
          for (int kx = 0; kx < a.kernel; ++kx) {
            int ix = static_cast<int>(x) * a.stride - a.padding + kx;
            if (ix < 0 || ix >= iw) continue;
            best = std::max(best, in.at3(c, iy, ix));
          }
        }
        out.at3(c, y, x) = best;
      }
    }
  }
  return out;
}

}  // namespace

std::map<std::string, Tensor> run(const Graph& g, const WeightStore& w,
                                  const std::map<std::string, Tensor>& inputs) {
  auto shapes = infer_shapes(g);
  std::map<std::string, Tensor> values;
  for (const auto& gin : g.inputs) {
    auto it = inputs.find(gin.name);
    if (it == inputs.end())
      throw data_error("ShapeMismatch", "missing graph input '" + gin.name + "'");
    const Tensor& t = it->second;
    std::vector<uint32_t> want;
    for (int64_t d : gin.shape.dims) want.push_back(static_cast<uint32_t>(d));
    if (t.dims != want)
      throw data_error("ShapeMismatch", "input '" + gin.name + "' has wrong shape");
    values[gin.name] = t;
  }
  for (size_t idx : topo_order(g)) {
    const OpNode& n = g.nodes[idx];
    switch (n.kind) {
      case OpKind::Conv2d: {
        auto it = w.entries.find(n.id);
        if (it == w.entries.end())
          throw data_error("MissingWeights", "no weights for conv node '" + n.id + "'");
        values[n.id] = run_conv(n, values.at(n.inputs[0]), it->second, shapes.at(n.id));
        break;
      }
      case OpKind::Activation:
        values[n.id] = run_activation(n, values.at(n.inputs[0]), w);
        break;
      case OpKind::Add: {
        Tensor out = values.at(n.inputs[0]);
        for (size_t i = 1; i < n.inputs.size(); ++i) {
          const Tensor& o = values.at(n.inputs[i]);
          for (size_t j = 0; j < out.data.size(); ++j)
            out.data[j] = static_cast<float>(static_cast<double>(out.data[j]) +
                                             static_cast<double>(o.data[j]));
        }
        values[n.id] = std::move(out);
        break;
      }
      case OpKind::Concat: {
        Tensor out = make_3d(shapes.at(n.id));
        size_t off = 0;
        for (const auto& ref : n.inputs) {
          const Tensor& t = values.at(ref);
          std::copy(t.data.begin(), t.data.end(), out.data.begin() + off);
          off += t.data.size();
        }
        values[n.id] = std::move(out);
        break;
      }
      case OpKind::Upsample:
        values[n.id] = run_upsample(n, values.at(n.inputs[0]), shapes.at(n.id));
        break;
      case OpKind::MaxPool:
        values[n.id] = run_maxpool(n, values.at(n.inputs[0]), shapes.at(n.id));
        break;
    }
  }
  std::map<std::string, Tensor> out;
  for (const auto& o : g.outputs) out[o] = values.at(o);
  return out;
}

}  // namespace poseopt
