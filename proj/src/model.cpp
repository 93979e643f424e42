#include "faultbin/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "faultbin/rng.hpp"

namespace faultbin {

namespace {

template <class T>
struct Trace {
  std::vector<RowMatrix<T>> acts;  // acts[i] enters layer i; back() is the output
  std::vector<RowMatrix<T>> cols;  // im2col per layer (conv only)
  std::vector<std::vector<int>> argmax;
};

TensorShape input_shape(const ModelSpec& s) { return {s.channels, s.height, s.width}; }

int conv_out(int n, const LayerSpec& l) { return n + 2 * l.pad - l.kernel + 1; }

template <class T>
RowMatrix<T> run_forward(const Model<T>& model, const RowMatrix<T>& x, const OutputOffsets<T>* offsets,
                         Trace<T>* trace) {
  const auto& spec = model.spec;
  const auto shapes = layer_shapes(spec);
  if (x.cols() != input_shape(spec).size()) {
    throw LearnError("input has " + std::to_string(x.cols()) + " features, model expects " +
                     std::to_string(input_shape(spec).size()));
  }
  const Eigen::Index batch = x.rows();
  RowMatrix<T> cur = x;
  if (trace) {
    trace->acts.assign(spec.layers.size() + 1, {});
    trace->cols.assign(spec.layers.size(), {});
    trace->argmax.assign(spec.layers.size(), {});
  }
  int p = 0;
  TensorShape in = input_shape(spec);
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& l = spec.layers[li];
    const TensorShape out = shapes[li];
    if (trace) trace->acts[li] = cur;
    const bool has_offset = offsets && p < static_cast<int>(offsets->size()) && (*offsets)[p].size() > 0;
    switch (l.kind) {
      case LayerKind::Linear: {
        RowMatrix<T> y = cur * model.weights[p];
        y.rowwise() += model.biases[p];
        if (has_offset) y.rowwise() += (*offsets)[p];
        cur = std::move(y);
        ++p;
        break;
      }
      case LayerKind::Conv: {
        RowMatrix<T> cols = im2col<T>(cur, in, l.kernel, l.pad);
        RowMatrix<T> y2 = cols * model.weights[p];
        y2.rowwise() += model.biases[p];
        if (has_offset) y2.rowwise() += (*offsets)[p];
        const int hw = out.h * out.w;
        RowMatrix<T> y(batch, out.size());
        for (Eigen::Index b = 0; b < batch; ++b)
          for (int co = 0; co < out.c; ++co)
            for (int q = 0; q < hw; ++q) y(b, co * hw + q) = y2(b * hw + q, co);
        if (trace) trace->cols[li] = std::move(cols);
        cur = std::move(y);
        ++p;
        break;
      }
      case LayerKind::ReLU:
        cur = cur.cwiseMax(T(0));
        break;
      case LayerKind::MaxPool: {
        RowMatrix<T> y(batch, out.size());
        std::vector<int> arg(static_cast<std::size_t>(batch) * out.size());
        for (Eigen::Index b = 0; b < batch; ++b)
          for (int c = 0; c < out.c; ++c)
            for (int oy = 0; oy < out.h; ++oy)
              for (int ox = 0; ox < out.w; ++ox) {
                int best = -1;
                T bv{};
                for (int dy = 0; dy < l.pool; ++dy)
                  for (int dx = 0; dx < l.pool; ++dx) {
                    const int idx = c * in.h * in.w + (oy * l.pool + dy) * in.w + ox * l.pool + dx;
                    if (best < 0 || cur(b, idx) > bv) {
                      best = idx;
                      bv = cur(b, idx);
                    }
                  }
                const int o = c * out.h * out.w + oy * out.w + ox;
                y(b, o) = bv;
                arg[static_cast<std::size_t>(b) * out.size() + o] = best;
              }
        if (trace) trace->argmax[li] = std::move(arg);
        cur = std::move(y);
        break;
      }
      case LayerKind::Flatten:
        break;
    }
    in = out;
  }
  if (trace) trace->acts.back() = cur;
  return cur;
}

template <class T>
void col2im_add(const RowMatrix<T>& dcols, const TensorShape& in, int kernel, int pad, Eigen::Index batch,
                RowMatrix<T>& dx) {
  const int ho = in.h + 2 * pad - kernel + 1;
  const int wo = in.w + 2 * pad - kernel + 1;
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int ci = 0; ci < in.c; ++ci)
      for (int ky = 0; ky < kernel; ++ky)
        for (int kx = 0; kx < kernel; ++kx) {
          const int col = (ci * kernel + ky) * kernel + kx;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy + ky - pad;
            if (iy < 0 || iy >= in.h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox + kx - pad;
              if (ix < 0 || ix >= in.w) continue;
              dx(b, ci * in.h * in.w + iy * in.w + ix) += dcols(b * ho * wo + oy * wo + ox, col);
            }
          }
        }
}

void check_layer(bool ok, std::size_t i, const std::string& what) {
  if (!ok) throw LearnError("layer " + std::to_string(i) + ": " + what);
}

}  // namespace

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Linear: return "linear";
    case LayerKind::Conv: return "conv";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view s) {
  for (auto k : {LayerKind::Linear, LayerKind::Conv, LayerKind::ReLU, LayerKind::MaxPool, LayerKind::Flatten}) {
    if (to_string(k) == s) return k;
  }
  throw LearnError("unknown layer kind '" + std::string(s) + "'");
}

std::vector<TensorShape> layer_shapes(const ModelSpec& spec) {
  if (spec.channels <= 0 || spec.height <= 0 || spec.width <= 0) throw LearnError("input shape must be positive");
  std::vector<TensorShape> out;
  TensorShape s = input_shape(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::Linear:
        check_layer(l.in == s.size(), i, "linear expects " + std::to_string(l.in) + " inputs, gets " + std::to_string(s.size()));
        check_layer(l.out > 0, i, "linear needs outputs");
        s = {l.out, 1, 1};
        break;
      case LayerKind::Conv:
        check_layer(l.in == s.c, i, "conv expects " + std::to_string(l.in) + " channels, gets " + std::to_string(s.c));
        check_layer(l.out > 0 && l.kernel > 0 && l.pad >= 0, i, "conv needs outputs, a kernel and pad >= 0");
        check_layer(conv_out(s.h, l) > 0 && conv_out(s.w, l) > 0, i, "kernel larger than the padded input");
        s = {l.out, conv_out(s.h, l), conv_out(s.w, l)};
        break;
      case LayerKind::MaxPool:
        check_layer(l.pool > 0 && s.h / l.pool > 0 && s.w / l.pool > 0, i, "pool window larger than the input");
        s = {s.c, s.h / l.pool, s.w / l.pool};
        break;
      case LayerKind::ReLU:
        break;
      case LayerKind::Flatten:
        s = {s.size(), 1, 1};
        break;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<int> param_layers(const ModelSpec& spec) {
  std::vector<int> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::Linear || spec.layers[i].kind == LayerKind::Conv) out.push_back(static_cast<int>(i));
  }
  return out;
}

ModelSpec mlp_spec(const std::vector<int>& sizes, int height, int width) {
  if (sizes.size() < 2) throw LearnError("an MLP needs input and output sizes");
  if (sizes.front() != height * width) throw LearnError("MLP input width must equal height * width");
  ModelSpec s;
  s.height = height;
  s.width = width;
  s.layers.push_back({LayerKind::Flatten});
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    s.layers.push_back({LayerKind::Linear, sizes[i], sizes[i + 1]});
    if (i + 2 < sizes.size()) s.layers.push_back({LayerKind::ReLU});
  }
  layer_shapes(s);
  return s;
}

ModelSpec lenet5_spec() {
  ModelSpec s;
  s.layers = {
      {LayerKind::Conv, 1, 6, 5, 2},   {LayerKind::ReLU}, {LayerKind::MaxPool, 0, 0, 0, 0, 2},
      {LayerKind::Conv, 6, 16, 5, 0},  {LayerKind::ReLU}, {LayerKind::MaxPool, 0, 0, 0, 0, 2},
      {LayerKind::Conv, 16, 120, 5, 0}, {LayerKind::ReLU}, {LayerKind::Flatten},
      {LayerKind::Linear, 120, 84},    {LayerKind::ReLU}, {LayerKind::Linear, 84, 10},
  };
  return s;
}

nlohmann::json spec_to_json(const ModelSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    nlohmann::json j{{"kind", to_string(l.kind)}};
    if (l.kind == LayerKind::Linear || l.kind == LayerKind::Conv) {
      j["in"] = l.in;
      j["out"] = l.out;
    }
    if (l.kind == LayerKind::Conv) {
      j["kernel"] = l.kernel;
      j["pad"] = l.pad;
    }
    if (l.kind == LayerKind::MaxPool) j["pool"] = l.pool;
    layers.push_back(j);
  }
  return {{"channels", spec.channels}, {"height", spec.height}, {"width", spec.width}, {"layers", layers}};
}

ModelSpec spec_from_json(const nlohmann::json& doc) {
  try {
    ModelSpec s;
    s.channels = doc.value("channels", 1);
    s.height = doc.at("height").get<int>();
    s.width = doc.at("width").get<int>();
    for (const auto& j : doc.at("layers")) {
      LayerSpec l;
      l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
      l.in = j.value("in", 0);
      l.out = j.value("out", 0);
      l.kernel = j.value("kernel", 0);
      l.pad = j.value("pad", 0);
      l.pool = j.value("pool", 2);
      s.layers.push_back(l);
    }
    layer_shapes(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw LearnError(std::string("bad model spec: ") + e.what());
  }
}

MacCount count_macs(const ModelSpec& spec) {
  const auto shapes = layer_shapes(spec);
  MacCount m;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.kind == LayerKind::Linear) {
      m.multiplications += static_cast<long long>(l.in) * l.out;
    } else if (l.kind == LayerKind::Conv) {
      const long long df2 = static_cast<long long>(shapes[i].h) * shapes[i].w;
      m.multiplications += static_cast<long long>(l.in) * l.kernel * l.kernel * df2 * l.out;
    }
  }
  m.additions = m.multiplications;
  return m;
}

template <class T>
RowMatrix<T> im2col(const RowMatrix<T>& x, const TensorShape& in, int kernel, int pad) {
  const int ho = in.h + 2 * pad - kernel + 1;
  const int wo = in.w + 2 * pad - kernel + 1;
  const Eigen::Index batch = x.rows();
  RowMatrix<T> cols = RowMatrix<T>::Zero(batch * ho * wo, static_cast<Eigen::Index>(in.c) * kernel * kernel);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int ci = 0; ci < in.c; ++ci)
      for (int ky = 0; ky < kernel; ++ky)
        for (int kx = 0; kx < kernel; ++kx) {
          const int col = (ci * kernel + ky) * kernel + kx;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy + ky - pad;
            if (iy < 0 || iy >= in.h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox + kx - pad;
              if (ix < 0 || ix >= in.w) continue;
              cols(b * ho * wo + oy * wo + ox, col) = x(b, ci * in.h * in.w + iy * in.w + ix);
            }
          }
        }
  return cols;
}

template <class T>
Model<T> init_model(const ModelSpec& spec, std::uint64_t seed) {
  const auto shapes = layer_shapes(spec);
  Model<T> m;
  m.spec = spec;
  std::mt19937_64 rng(mix64(seed));
  for (int li : param_layers(spec)) {
    const auto& l = spec.layers[li];
    const int fan_in = l.kind == LayerKind::Linear ? l.in : l.in * l.kernel * l.kernel;
    const double limit = std::sqrt(6.0 / fan_in);
    RowMatrix<T> w(fan_in, l.out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
    m.weights.push_back(std::move(w));
    m.biases.push_back(RowVector<T>::Zero(l.out));
  }
  return m;
}

template <class T>
RowMatrix<T> forward_logits(const Model<T>& model, const RowMatrix<T>& x, const OutputOffsets<T>* offsets) {
  return run_forward<T>(model, x, offsets, nullptr);
}

template <class T>
T loss_and_gradients(const Model<T>& model, const RowMatrix<T>& x, std::span<const std::uint8_t> labels,
                     Gradients<T>* grads, const OutputOffsets<T>* offsets) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw LearnError("label count differs from batch size");
  Trace<T> trace;
  const RowMatrix<T> logits = run_forward<T>(model, x, offsets, grads ? &trace : nullptr);
  const Eigen::Index batch = x.rows();
  RowMatrix<T> d(batch, logits.cols());
  T loss = 0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const T mx = logits.row(b).maxCoeff();
    T sum = 0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) sum += std::exp(logits(b, k) - mx);
    for (Eigen::Index k = 0; k < logits.cols(); ++k) d(b, k) = std::exp(logits(b, k) - mx) / sum;
    loss += std::log(sum) + mx - logits(b, labels[b]);
    d(b, labels[b]) -= T(1);
  }
  loss /= static_cast<T>(batch);
  if (!grads) return loss;
  d /= static_cast<T>(batch);

  const auto& spec = model.spec;
  const auto shapes = layer_shapes(spec);
  const auto params = param_layers(spec);
  grads->weights.assign(params.size(), {});
  grads->biases.assign(params.size(), {});
  int p = static_cast<int>(params.size());
  for (int li = static_cast<int>(spec.layers.size()) - 1; li >= 0; --li) {
    const auto& l = spec.layers[li];
    const RowMatrix<T>& in_act = trace.acts[li];
    const TensorShape in = li == 0 ? input_shape(spec) : shapes[li - 1];
    const TensorShape out = shapes[li];
    switch (l.kind) {
      case LayerKind::Linear: {
        --p;
        grads->weights[p] = in_act.transpose() * d;
        grads->biases[p] = d.colwise().sum();
        if (li > 0) d = (d * model.weights[p].transpose()).eval();
        break;
      }
      case LayerKind::Conv: {
        --p;
        const int hw = out.h * out.w;
        RowMatrix<T> d2(batch * hw, out.c);
        for (Eigen::Index b = 0; b < batch; ++b)
          for (int co = 0; co < out.c; ++co)
            for (int q = 0; q < hw; ++q) d2(b * hw + q, co) = d(b, co * hw + q);
        grads->weights[p] = trace.cols[li].transpose() * d2;
        grads->biases[p] = d2.colwise().sum();
        if (li > 0) {
          const RowMatrix<T> dcols = d2 * model.weights[p].transpose();
          RowMatrix<T> dx = RowMatrix<T>::Zero(batch, in.size());
          col2im_add<T>(dcols, in, l.kernel, l.pad, batch, dx);
          d = std::move(dx);
        }
        break;
      }
      case LayerKind::ReLU:
        d = d.cwiseProduct((in_act.array() > T(0)).matrix().template cast<T>());
        break;
      case LayerKind::MaxPool: {
        RowMatrix<T> dx = RowMatrix<T>::Zero(batch, in.size());
        const auto& arg = trace.argmax[li];
        for (Eigen::Index b = 0; b < batch; ++b)
          for (int o = 0; o < out.size(); ++o) dx(b, arg[static_cast<std::size_t>(b) * out.size() + o]) += d(b, o);
        d = std::move(dx);
        break;
      }
      case LayerKind::Flatten:
        break;
    }
  }
  return loss;
}

std::vector<RowMatrixF> layer_inputs(const FloatModel& model, const RowMatrixF& x) {
  Trace<float> trace;
  run_forward<float>(model, x, nullptr, &trace);
  std::vector<RowMatrixF> out;
  for (int li : param_layers(model.spec)) out.push_back(std::move(trace.acts[li]));
  return out;
}

void train(FloatModel& model, const Dataset& data, const TrainOptions& opts) {
  if (opts.epochs < 0 || opts.batch <= 0 || !(opts.lr > 0)) throw LearnError("invalid training options");
  if (data.size() == 0) throw LearnError("empty training set");
  std::mt19937_64 rng(mix64(opts.seed ^ 0x7a1eULL));
  std::vector<int> order(data.size());
  std::vector<RowMatrixF> vw;
  std::vector<RowVector<float>> vb;
  for (std::size_t p = 0; p < model.weights.size(); ++p) {
    vw.push_back(RowMatrixF::Zero(model.weights[p].rows(), model.weights[p].cols()));
    vb.push_back(RowVector<float>::Zero(model.biases[p].size()));
  }
  const auto apply_masks = [&] {
    if (!opts.masks) return;
    for (std::size_t p = 0; p < model.weights.size(); ++p) model.weights[p] = model.weights[p].cwiseProduct((*opts.masks)[p]);
  };
  apply_masks();
  const Eigen::Index features = data.images.cols();
  RowMatrixF xb;
  std::vector<std::uint8_t> yb;
  Gradients<float> g;
  float lr = opts.lr;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    partial_shuffle(order, rng);
    OutputOffsets<float> offsets;
    if (opts.offsets) offsets = opts.offsets(model);
    for (int start = 0; start < data.size(); start += opts.batch) {
      const int n = std::min(opts.batch, data.size() - start);
      xb.resize(n, features);
      yb.resize(n);
      for (int i = 0; i < n; ++i) {
        xb.row(i) = data.images.row(order[start + i]);
        yb[i] = data.labels[order[start + i]];
      }
      loss_and_gradients<float>(model, xb, yb, &g, opts.offsets ? &offsets : nullptr);
      for (std::size_t p = 0; p < model.weights.size(); ++p) {
        if (opts.weight_decay > 0) g.weights[p] += opts.weight_decay * model.weights[p];
        vw[p] = opts.momentum * vw[p] - lr * g.weights[p];
        vb[p] = opts.momentum * vb[p] - lr * g.biases[p];
        model.weights[p] += vw[p];
        model.biases[p] += vb[p];
      }
      apply_masks();
    }
    lr *= opts.lr_decay;
  }
}

FloatModel train_baseline(const Dataset& data, const ModelSpec& spec, const TrainOptions& opts) {
  auto model = init_model<float>(spec, opts.seed);
  train(model, data, opts);
  return model;
}

std::vector<int> predict(const FloatModel& model, const RowMatrixF& x) {
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  constexpr Eigen::Index kChunk = 1000;
  for (Eigen::Index s = 0; s < x.rows(); s += kChunk) {
    const Eigen::Index n = std::min(kChunk, x.rows() - s);
    const RowMatrixF logits = forward_logits<float>(model, x.middleRows(s, n));
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index k = 0;
      logits.row(i).maxCoeff(&k);
      out[static_cast<std::size_t>(s + i)] = static_cast<int>(k);
    }
  }
  return out;
}

double accuracy(const FloatModel& model, const Dataset& data) {
  const auto pred = predict(model, data.images);
  long hit = 0;
  for (int i = 0; i < data.size(); ++i) hit += pred[i] == data.labels[i];
  return data.size() == 0 ? 0.0 : static_cast<double>(hit) / data.size();
}

std::vector<RowMatrixF> prune(FloatModel& model, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw LearnError("prune fraction must be in [0, 1)");
  struct Entry {
    float mag;
    std::size_t layer;
    Eigen::Index idx;
  };
  std::vector<Entry> all;
  for (std::size_t p = 0; p < model.weights.size(); ++p)
    for (Eigen::Index i = 0; i < model.weights[p].size(); ++i) all.push_back({std::abs(model.weights[p].data()[i]), p, i});
  const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(all.size())));
  const auto less = [](const Entry& a, const Entry& b) {
    if (a.mag != b.mag) return a.mag < b.mag;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.idx < b.idx;
  };
  if (take > 0 && take < all.size()) std::nth_element(all.begin(), all.begin() + static_cast<long>(take), all.end(), less);
  std::vector<RowMatrixF> masks;
  for (const auto& w : model.weights) masks.push_back(RowMatrixF::Ones(w.rows(), w.cols()));
  for (std::size_t i = 0; i < take; ++i) {
    masks[all[i].layer].data()[all[i].idx] = 0.0F;
    model.weights[all[i].layer].data()[all[i].idx] = 0.0F;
  }
  return masks;
}

long long count_zero_weights(const FloatModel& model) {
  long long n = 0;
  for (const auto& w : model.weights) n += (w.array() == 0.0F).count();
  return n;
}

long long count_weights(const FloatModel& model) {
  long long n = 0;
  for (const auto& w : model.weights) n += w.size();
  return n;
}

nlohmann::json model_to_json(const FloatModel& model) {
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t p = 0; p < model.weights.size(); ++p) {
    const auto& w = model.weights[p];
    const auto& b = model.biases[p];
    params.push_back({{"rows", w.rows()},
                      {"cols", w.cols()},
                      {"weights", std::vector<float>(w.data(), w.data() + w.size())},
                      {"bias", std::vector<float>(b.data(), b.data() + b.size())}});
  }
  return {{"format", "faultbin-model"}, {"version", 1}, {"spec", spec_to_json(model.spec)}, {"params", params}};
}

FloatModel model_from_json(const nlohmann::json& doc) {
  try {
    FloatModel m;
    m.spec = spec_from_json(doc.at("spec"));
    const auto ref = init_model<float>(m.spec, 0);
    const auto& params = doc.at("params");
    if (params.size() != ref.weights.size()) throw LearnError("parameter count does not match the spec");
    for (std::size_t p = 0; p < params.size(); ++p) {
      const auto w = params[p].at("weights").get<std::vector<float>>();
      const auto b = params[p].at("bias").get<std::vector<float>>();
      if (static_cast<Eigen::Index>(w.size()) != ref.weights[p].size() ||
          static_cast<Eigen::Index>(b.size()) != ref.biases[p].size()) {
        throw LearnError("parameter " + std::to_string(p) + " has the wrong size");
      }
      m.weights.push_back(Eigen::Map<const RowMatrixF>(w.data(), ref.weights[p].rows(), ref.weights[p].cols()));
      m.biases.push_back(Eigen::Map<const RowVector<float>>(b.data(), static_cast<Eigen::Index>(b.size())));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LearnError(std::string("bad model file: ") + e.what());
  }
}

template Model<float> init_model<float>(const ModelSpec&, std::uint64_t);
template Model<double> init_model<double>(const ModelSpec&, std::uint64_t);
template RowMatrix<float> forward_logits<float>(const Model<float>&, const RowMatrix<float>&, const OutputOffsets<float>*);
template RowMatrix<double> forward_logits<double>(const Model<double>&, const RowMatrix<double>&, const OutputOffsets<double>*);
template float loss_and_gradients<float>(const Model<float>&, const RowMatrix<float>&, std::span<const std::uint8_t>,
                                         Gradients<float>*, const OutputOffsets<float>*);
template double loss_and_gradients<double>(const Model<double>&, const RowMatrix<double>&, std::span<const std::uint8_t>,
                                           Gradients<double>*, const OutputOffsets<double>*);
template RowMatrix<float> im2col<float>(const RowMatrix<float>&, const TensorShape&, int, int);
template RowMatrix<double> im2col<double>(const RowMatrix<double>&, const TensorShape&, int, int);

}  // namespace faultbin
