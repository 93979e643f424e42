#include "faultbin/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "faultbin/parallel.hpp"

namespace faultbin {

namespace {

using RowMatrixD = RowMatrix<double>;

double max_abs_scale(double max_abs, double qmax) { return max_abs > 0.0 ? max_abs / qmax : 1.0; }

template <class T>
RowMatrixD int_matmul(const RowMatrix<T>& q, const IntMatrix& w) {
  const RowMatrix<T> wf = Eigen::Map<const Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                              w.data.data(), w.rows, w.cols)
                              .template cast<T>();
  return (q * wf).template cast<double>();
}

// Products are int8 x int8, so float sums stay exact below 2^24.
RowMatrixD exact_matmul(const RowMatrixF& q, const IntMatrix& w) {
  if (static_cast<double>(w.rows) * 127.0 * 127.0 < 16777216.0) return int_matmul<float>(q, w);
  return int_matmul<double>(q.cast<double>(), w);
}

IntMatrix to_int_matrix(const RowMatrixF& q) {
  IntMatrix m(static_cast<int>(q.rows()), static_cast<int>(q.cols()));
  for (Eigen::Index i = 0; i < q.size(); ++i) m.data[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(q.data()[i]);
  return m;
}

}  // namespace

std::int32_t quantize_value(double x, double scale) {
  const double q = std::nearbyint(x / scale);
  return static_cast<std::int32_t>(std::clamp(q, -127.0, 127.0));
}

QuantizedModel quantize(const FloatModel& model, const RowMatrixF& calibration) {
  if (calibration.rows() == 0) throw LearnError("quantization needs calibration samples");
  const auto inputs = layer_inputs(model, calibration);
  QuantizedModel q;
  q.spec = model.spec;
  for (std::size_t p = 0; p < model.weights.size(); ++p) {
    const auto& w = model.weights[p];
    QuantLayer l;
    l.in_scale = max_abs_scale(inputs[p].cwiseAbs().maxCoeff(), 127.0);
    l.w_scale = max_abs_scale(w.cwiseAbs().maxCoeff(), 127.0);
    l.weights = IntMatrix(static_cast<int>(w.rows()), static_cast<int>(w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) l.weights.data[static_cast<std::size_t>(i)] = quantize_value(w.data()[i], l.w_scale);
    for (Eigen::Index j = 0; j < model.biases[p].size(); ++j) {
      const double b = std::nearbyint(model.biases[p](j) / (l.in_scale * l.w_scale));
      l.bias.push_back(static_cast<std::int32_t>(std::clamp(b, -2147483647.0, 2147483647.0)));
    }
    q.layers.push_back(std::move(l));
  }
  return q;
}

nlohmann::json quantized_to_json(const QuantizedModel& q) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : q.layers) {
    layers.push_back({{"rows", l.weights.rows},
                      {"cols", l.weights.cols},
                      {"weights", l.weights.data},
                      {"bias", l.bias},
                      {"w_scale", l.w_scale},
                      {"in_scale", l.in_scale}});
  }
  return {{"format", "faultbin-qmodel"}, {"version", 1}, {"spec", spec_to_json(q.spec)}, {"layers", layers}};
}

QuantizedModel quantized_from_json(const nlohmann::json& doc) {
  try {
    QuantizedModel q;
    q.spec = spec_from_json(doc.at("spec"));
    const auto ref = init_model<float>(q.spec, 0);
    const auto& layers = doc.at("layers");
    if (layers.size() != ref.weights.size()) throw LearnError("layer count does not match the spec");
    for (std::size_t p = 0; p < layers.size(); ++p) {
      QuantLayer l;
      l.weights = IntMatrix(static_cast<int>(ref.weights[p].rows()), static_cast<int>(ref.weights[p].cols()));
      l.weights.data = layers[p].at("weights").get<std::vector<std::int32_t>>();
      l.bias = layers[p].at("bias").get<std::vector<std::int32_t>>();
      l.w_scale = layers[p].at("w_scale").get<double>();
      l.in_scale = layers[p].at("in_scale").get<double>();
      if (static_cast<Eigen::Index>(l.weights.data.size()) != ref.weights[p].size() ||
          static_cast<Eigen::Index>(l.bias.size()) != ref.biases[p].size()) {
        throw LearnError("layer " + std::to_string(p) + " has the wrong size");
      }
      for (auto v : l.weights.data) {
        if (v < -128 || v > 127) throw LearnError("weight outside int8");
      }
      if (!(l.w_scale > 0) || !(l.in_scale > 0)) throw LearnError("scales must be positive");
      q.layers.push_back(std::move(l));
    }
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw LearnError(std::string("bad quantized model file: ") + e.what());
  }
}

std::vector<std::vector<std::int64_t>> layer_offsets(const QuantizedModel& q, const FaultMap& map, ExecMode mode,
                                                     const ErrorModel& model) {
  std::vector<std::vector<std::int64_t>> out;
  for (const auto& l : q.layers) out.push_back(worst_case_offsets(map, l.weights.rows, l.weights.cols, mode, model));
  return out;
}

QuantForward quantized_forward(const QuantizedModel& q, const RowMatrixF& x, const Injection* inj) {
  const auto& spec = q.spec;
  const auto shapes = layer_shapes(spec);
  if (x.cols() != spec.channels * spec.height * spec.width) {
    throw LearnError("input has " + std::to_string(x.cols()) + " features, model expects " +
                     std::to_string(spec.channels * spec.height * spec.width));
  }
  if (inj && inj->map == nullptr) throw LearnError("injection without a fault map");
  std::vector<std::vector<std::int64_t>> offsets;
  if (inj && !inj->literal) offsets = layer_offsets(q, *inj->map, inj->mode, inj->err.model);

  QuantForward out;
  const Eigen::Index batch = x.rows();
  RowMatrixD cur = x.cast<double>();
  double scale = 1.0;
  TensorShape in{spec.channels, spec.height, spec.width};
  int p = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& l = spec.layers[li];
    const TensorShape shape = shapes[li];
    if (l.kind == LayerKind::Linear || l.kind == LayerKind::Conv) {
      const auto& ql = q.layers[p];
      RowMatrixF qin(cur.rows(), cur.cols());
      for (Eigen::Index i = 0; i < cur.size(); ++i) qin.data()[i] = static_cast<float>(quantize_value(cur.data()[i] * scale, ql.in_scale));
      if (l.kind == LayerKind::Conv) qin = im2col<float>(qin, in, l.kernel, l.pad);

      RowMatrixD acc;
      if (inj && inj->literal) {
        const IntMatrix xi = to_int_matrix(qin);
        const AccMatrix y = inj->mode == ExecMode::Systolic
                                ? systolic_exec(ql.weights, xi, *inj->map, plan_bypass(ql.weights, *inj->map), inj->err)
                                : simd_exec(ql.weights, xi, *inj->map, inj->err);
        acc.resize(y.rows, y.cols);
        for (std::size_t i = 0; i < y.data.size(); ++i) acc.data()[i] = static_cast<double>(y.data[i]);
      } else {
        acc = exact_matmul(qin, ql.weights);
        if (!offsets.empty()) {
          for (Eigen::Index j = 0; j < acc.cols(); ++j) acc.col(j).array() += static_cast<double>(offsets[p][j]);
        }
      }
      for (Eigen::Index j = 0; j < acc.cols(); ++j) acc.col(j).array() += static_cast<double>(ql.bias[j]);
      out.macs += static_cast<long long>(qin.rows()) * qin.cols() * ql.weights.cols;

      if (l.kind == LayerKind::Conv) {
        const int hw = shape.h * shape.w;
        RowMatrixD y(batch, shape.size());
        for (Eigen::Index b = 0; b < batch; ++b)
          for (int co = 0; co < shape.c; ++co)
            for (int k = 0; k < hw; ++k) y(b, co * hw + k) = acc(b * hw + k, co);
        cur = std::move(y);
      } else {
        cur = std::move(acc);
      }
      scale = ql.in_scale * ql.w_scale;
      ++p;
    } else if (l.kind == LayerKind::ReLU) {
      cur = cur.cwiseMax(0.0);
    } else if (l.kind == LayerKind::MaxPool) {
      RowMatrixD y(batch, shape.size());
      for (Eigen::Index b = 0; b < batch; ++b)
        for (int c = 0; c < shape.c; ++c)
          for (int oy = 0; oy < shape.h; ++oy)
            for (int ox = 0; ox < shape.w; ++ox) {
              double best = -std::numeric_limits<double>::infinity();
              for (int dy = 0; dy < l.pool; ++dy)
                for (int dx = 0; dx < l.pool; ++dx)
                  best = std::max(best, cur(b, c * in.h * in.w + (oy * l.pool + dy) * in.w + ox * l.pool + dx));
              y(b, c * shape.h * shape.w + oy * shape.w + ox) = best;
            }
      cur = std::move(y);
    }
    in = shape;
  }
  out.logits = cur.cast<std::int64_t>();
  out.scale = scale;
  if (batch > 0) out.macs /= batch;
  return out;
}

std::vector<int> argmax_rows(const RowMatrixI64& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index k = 0;
    logits.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

std::vector<int> forward_faulty(const QuantizedModel& q, const RowMatrixF& x, const FaultMap& map,
                                const ArrayErrorModel& err, ExecMode mode) {
  Injection inj{&map, err, mode, err.model.mode == ErrorMode::PerFaultNetlist};
  return argmax_rows(quantized_forward(q, x, &inj).logits);
}

double quantized_accuracy(const QuantizedModel& q, const Dataset& data, const Injection* inj, int threads) {
  constexpr int kChunk = 500;
  const int n = data.size();
  if (n == 0) return 0.0;
  const int chunks = (n + kChunk - 1) / kChunk;
  std::vector<long> hits(static_cast<std::size_t>(chunks), 0);
  parallel_chunks(static_cast<std::size_t>(chunks), threads, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t c = begin; c < end; ++c) {
      const int s = static_cast<int>(c) * kChunk;
      const int m = std::min(kChunk, n - s);
      const auto pred = argmax_rows(quantized_forward(q, data.images.middleRows(s, m), inj).logits);
      for (int i = 0; i < m; ++i) hits[c] += pred[i] == data.labels[s + i];
    }
  });
  long total = 0;
  for (long h : hits) total += h;
  return static_cast<double>(total) / n;
}

long inference_steps(const QuantizedModel& q, int rows, int cols) {
  long steps = 0;
  for (const auto& l : q.layers) steps += static_cast<long>((l.weights.rows + rows - 1) / rows) * ((l.weights.cols + cols - 1) / cols);
  return steps;
}

}  // namespace faultbin
