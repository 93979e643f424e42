#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "doctest.h"
#include "faultbin/experiment.hpp"
#include "faultbin/cones.hpp"
#include "faultbin/rng.hpp"

using namespace faultbin;

namespace {

// Points in the unit square split by x0 + 0.5 x1 > 0.7, kept 0.05 away from
// the line (two classes), or banded by the same sum.
Dataset toy_dataset(int n, std::uint64_t seed, int classes = 2) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.height = 1;
  d.width = 2;
  d.images.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    double a = 0;
    double b = 0;
    do {
      a = uniform01(rng);
      b = uniform01(rng);
    } while (classes == 2 && std::abs(a + 0.5 * b - 0.7) < 0.05);
    d.images(i, 0) = static_cast<float>(a);
    d.images(i, 1) = static_cast<float>(b);
    const double s = a + 0.5 * b;
    d.labels.push_back(static_cast<std::uint8_t>(classes == 2 ? (s > 0.7) : std::min(classes - 1, static_cast<int>(s / 1.5 * classes))));
  }
  return d;
}

// Random images for shape-level tests.
Dataset noise_dataset(int n, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.height = h;
  d.width = w;
  d.images.resize(n, h * w);
  for (Eigen::Index i = 0; i < d.images.size(); ++i) d.images.data()[i] = static_cast<float>(uniform01(rng));
  for (int i = 0; i < n; ++i) d.labels.push_back(static_cast<std::uint8_t>(rng() % 3));
  return d;
}

ModelSpec small_cnn() {
  ModelSpec s;
  s.height = 6;
  s.width = 6;
  s.layers = {{LayerKind::Conv, 1, 2, 3, 1}, {LayerKind::ReLU}, {LayerKind::MaxPool, 0, 0, 0, 0, 2},
              {LayerKind::Flatten},           {LayerKind::Linear, 18, 3}};
  return s;
}

// Multiplications by literally walking every output value of every layer.
long long brute_force_macs(const ModelSpec& spec) {
  long long n = 0;
  TensorShape s{spec.channels, spec.height, spec.width};
  for (const auto& l : spec.layers) {
    if (l.kind == LayerKind::Linear) {
      for (int o = 0; o < l.out; ++o)
        for (int i = 0; i < l.in; ++i) ++n;
      s = {l.out, 1, 1};
    } else if (l.kind == LayerKind::Conv) {
      const int ho = s.h + 2 * l.pad - l.kernel + 1;
      const int wo = s.w + 2 * l.pad - l.kernel + 1;
      for (int co = 0; co < l.out; ++co)
        for (int y = 0; y < ho; ++y)
          for (int x = 0; x < wo; ++x) n += static_cast<long long>(l.in) * l.kernel * l.kernel;
      s = {l.out, ho, wo};
    } else if (l.kind == LayerKind::MaxPool) {
      s = {s.c, s.h / l.pool, s.w / l.pool};
    } else if (l.kind == LayerKind::Flatten) {
      s = {s.size(), 1, 1};
    }
  }
  return n;
}

ModelSpec random_spec(std::mt19937_64& rng) {
  ModelSpec s;
  s.height = 8 + static_cast<int>(rng() % 9);
  s.width = s.height;
  int c = 1;
  int hw = s.height;
  const int convs = static_cast<int>(rng() % 3);
  for (int i = 0; i < convs; ++i) {
    const int k = 1 + static_cast<int>(rng() % 3);
    const int pad = static_cast<int>(rng() % 2);
    const int out = 1 + static_cast<int>(rng() % 4);
    s.layers.push_back({LayerKind::Conv, c, out, k, pad});
    s.layers.push_back({LayerKind::ReLU});
    c = out;
    hw = hw + 2 * pad - k + 1;
    if (hw >= 4 && (rng() & 1U)) {
      s.layers.push_back({LayerKind::MaxPool, 0, 0, 0, 0, 2});
      hw /= 2;
    }
  }
  s.layers.push_back({LayerKind::Flatten});
  int width = c * hw * hw;
  const int hidden = static_cast<int>(rng() % 3);
  for (int i = 0; i < hidden; ++i) {
    const int out = 2 + static_cast<int>(rng() % 20);
    s.layers.push_back({LayerKind::Linear, width, out});
    s.layers.push_back({LayerKind::ReLU});
    width = out;
  }
  s.layers.push_back({LayerKind::Linear, width, 10});
  return s;
}

template <class T>
T& param_at(Model<T>& m, std::size_t p, Eigen::Index i, bool bias) {
  return bias ? m.biases[p].data()[i] : m.weights[p].data()[i];
}

void gradient_check(const ModelSpec& spec, int batch, std::uint64_t seed) {
  auto model = init_model<double>(spec, seed);
  std::mt19937_64 rng(seed);
  for (auto& b : model.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * (uniform01(rng) - 0.5);
  RowMatrix<double> x(batch, spec.channels * spec.height * spec.width);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng);
  std::vector<std::uint8_t> y;
  for (int i = 0; i < batch; ++i) y.push_back(static_cast<std::uint8_t>(rng() % 3));

  Gradients<double> g;
  loss_and_gradients<double>(model, x, y, &g);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t p = 0; p < model.weights.size(); ++p) {
    for (bool bias : {false, true}) {
      const Eigen::Index n = bias ? model.biases[p].size() : model.weights[p].size();
      for (Eigen::Index i = 0; i < n; ++i) {
        double& v = param_at(model, p, i, bias);
        const double keep = v;
        v = keep + h;
        const double up = loss_and_gradients<double>(model, x, y, nullptr);
        v = keep - h;
        const double down = loss_and_gradients<double>(model, x, y, nullptr);
        v = keep;
        const double fd = (up - down) / (2 * h);
        const double an = bias ? g.biases[p].data()[i] : g.weights[p].data()[i];
        const double rel = std::abs(fd - an) / std::max(1e-3, std::abs(fd) + std::abs(an));
        worst = std::max(worst, rel);
      }
    }
  }
  CHECK(worst < 1e-4);
}

void write_idx(const std::string& path, const std::vector<std::uint8_t>& header, const std::vector<std::uint8_t>& body,
               bool gz) {
  std::vector<std::uint8_t> all = header;
  all.insert(all.end(), body.begin(), body.end());
  if (gz) {
    gzFile f = gzopen(path.c_str(), "wb");
    gzwrite(f, all.data(), static_cast<unsigned>(all.size()));
    gzclose(f);
  } else {
    std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(all.data()), static_cast<long>(all.size()));
  }
}

}  // namespace

TEST_CASE("mac counts") {
  CHECK(count_macs(lenet5_spec()).multiplications == 416520);
  CHECK(count_macs(mlp_spec({4, 8, 2}, 1, 4)).multiplications == 48);
  std::mt19937_64 rng(11);
  for (int t = 0; t < 5; ++t) {
    const auto spec = random_spec(rng);
    const auto formula = count_macs(spec).multiplications;
    CHECK(formula == brute_force_macs(spec));
    // Tally of the multiplications the quantized forward actually executes.
    const auto model = init_model<float>(spec, 3);
    const auto data = noise_dataset(2, spec.height, spec.width, 4);
    CHECK(quantized_forward(quantize(model, data.images), data.images).macs == formula);
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(mlp_spec({10, 4}), LearnError);
  ModelSpec bad = small_cnn();
  bad.layers.back().in = 17;
  CHECK_THROWS_AS(layer_shapes(bad), LearnError);
  CHECK(spec_from_json(spec_to_json(lenet5_spec())) == lenet5_spec());
  const auto s = layer_shapes(lenet5_spec());
  CHECK(s[0].h == 28);
  CHECK(s[6].h == 1);
  CHECK(s[6].c == 120);
}

TEST_CASE("backprop matches finite differences") {
  gradient_check(mlp_spec({6, 5, 3}, 2, 3), 4, 1);
  gradient_check(small_cnn(), 3, 2);
}

TEST_CASE("im2col lowering equals direct convolution") {
  std::mt19937_64 rng(4);
  const TensorShape in{2, 5, 4};
  RowMatrix<double> x(2, in.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng);
  const int k = 3;
  const int pad = 1;
  RowMatrix<double> w(in.c * k * k, 3);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform01(rng) - 0.5;
  const RowMatrix<double> y = im2col<double>(x, in, k, pad) * w;
  for (int b = 0; b < 2; ++b)
    for (int co = 0; co < 3; ++co)
      for (int oy = 0; oy < in.h; ++oy)
        for (int ox = 0; ox < in.w; ++ox) {
          double s = 0;
          for (int ci = 0; ci < in.c; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy + ky - pad;
                const int ix = ox + kx - pad;
                if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
                s += x(b, ci * in.h * in.w + iy * in.w + ix) * w((ci * k + ky) * k + kx, co);
              }
          CHECK(y(b * in.h * in.w + oy * in.w + ox, co) == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("training separates a toy set and is deterministic") {
  const auto data = toy_dataset(2000, 1);
  TrainOptions o;
  o.epochs = 20;
  o.batch = 32;
  o.lr = 0.1F;
  o.lr_decay = 0.9F;
  const auto spec = mlp_spec({2, 16, 2}, 1, 2);
  const auto a = train_baseline(data, spec, o);
  CHECK(accuracy(a, data) >= 0.99);
  const auto b = train_baseline(data, spec, o);
  for (std::size_t p = 0; p < a.weights.size(); ++p) {
    CHECK(a.weights[p] == b.weights[p]);
    CHECK(a.biases[p] == b.biases[p]);
  }
  const auto c = model_from_json(nlohmann::json::parse(model_to_json(a).dump()));
  for (std::size_t p = 0; p < a.weights.size(); ++p) CHECK(a.weights[p] == c.weights[p]);
}

TEST_CASE("quantization") {
  for (double x : {0.0, 0.3, -0.77, 1.0, -1.0}) {
    const double s = 1.0 / 127;
    CHECK(std::abs(quantize_value(x, s) * s - x) <= s / 2 + 1e-12);
  }
  CHECK(quantize_value(5.0, 0.01) == 127);
  CHECK(quantize_value(-5.0, 0.01) == -127);

  const auto data = toy_dataset(2000, 2);
  TrainOptions o;
  o.epochs = 10;
  const auto model = train_baseline(data, mlp_spec({2, 16, 16, 2}, 1, 2), o);
  const auto q = quantize(model, data.images.topRows(500));
  CHECK(std::abs(quantized_accuracy(q, data) - accuracy(model, data)) < 0.02);
  const auto q2 = quantized_from_json(nlohmann::json::parse(quantized_to_json(q).dump()));
  CHECK(quantized_forward(q2, data.images).logits == quantized_forward(q, data.images).logits);
}

TEST_CASE("zero faults reproduce the reference forward bit for bit") {
  const auto data = noise_dataset(40, 6, 6, 5);
  const auto model = init_model<float>(small_cnn(), 9);
  const auto q = quantize(model, data.images);
  const auto ref = quantized_forward(q, data.images).logits;
  const FaultMap healthy(8, 4, 1);
  const auto clean = build_fault_map(8, 4, 0, 3);
  for (bool literal : {false, true})
    for (ExecMode mode : {ExecMode::Systolic, ExecMode::Simd}) {
      const Injection inj{&healthy, {}, mode, literal};
      CHECK(quantized_forward(q, data.images, &inj).logits == ref);
      const Injection inj0{&clean, {}, mode, literal};
      CHECK(quantized_forward(q, data.images, &inj0).logits == ref);
    }
}

TEST_CASE("offset fast path equals the PE-level simulators") {
  std::mt19937_64 rng(7);
  const auto data = noise_dataset(6, 6, 6, 8);
  for (const auto& spec : {small_cnn(), mlp_spec({36, 20, 7}, 6, 6)}) {
    const auto q = quantize(init_model<float>(spec, 2), data.images);
    for (int t = 0; t < 4; ++t) {
      const auto map = deactivate_to_threshold(build_fault_map(8, 4, 25, rng(), 12.5), 12.5);
      for (ExecMode mode : {ExecMode::Systolic, ExecMode::Simd}) {
        const ArrayErrorModel err{{ErrorFormat::Int8Mac, 2, ErrorMode::WorstCaseSigned}};
        const Injection fast{&map, err, mode, false};
        const Injection literal{&map, err, mode, true};
        CHECK(quantized_forward(q, data.images, &fast).logits == quantized_forward(q, data.images, &literal).logits);
      }
    }
  }
}

TEST_CASE("a single faulty PE only touches its column's outputs") {
  const auto data = noise_dataset(1, 4, 4, 2);
  const auto q = quantize(init_model<float>(mlp_spec({16, 10}, 4, 4), 5), data.images);
  const auto ref = quantized_forward(q, data.images).logits;
  for (int col = 0; col < 4; ++col) {
    FaultMap map(8, 4, 77);
    map.set(3, col, PeStatus::NonCriticalFaulty);
    const Injection inj{&map, {}, ExecMode::Systolic, true};
    const auto y = quantized_forward(q, data.images, &inj).logits;
    for (int j = 0; j < 10; ++j) {
      // Reductions 3 and 11 pass through row 3: two faulty MACs of +-7.
      CHECK(y(0, j) - ref(0, j) == (j % 4 == col ? 14 * map.polarity(3, col) : 0));
    }
  }
}

TEST_CASE("per-fault netlist injection") {
  const auto nl = gen_mac_int8();
  const auto part = partition(nl, 1);
  std::vector<FaultErrorTable> tables;
  for (std::size_t i = 0; i < part.f_noncrit.size(); i += 7) tables.emplace_back(nl, part.f_noncrit.sites[i]);
  const auto data = noise_dataset(3, 4, 4, 6);
  const auto q = quantize(init_model<float>(mlp_spec({16, 10}, 4, 4), 5), data.images);
  const auto ref = quantized_forward(q, data.images).logits;
  const auto map = build_fault_map(8, 4, 25, 4);
  const ArrayErrorModel err{{ErrorFormat::Int8Mac, 1, ErrorMode::PerFaultNetlist}, &tables};
  const Injection inj{&map, err, ExecMode::Systolic, true};
  const auto y = quantized_forward(q, data.images, &inj).logits;
  // Two faulty rows per column, each hit by two reductions.
  CHECK((y - ref).cwiseAbs().maxCoeff() <= 4 * 7);
  CHECK(forward_faulty(q, data.images, map, err) == argmax_rows(y));
}

TEST_CASE("pruning") {
  const auto data = toy_dataset(1000, 3);
  TrainOptions o;
  o.epochs = 5;
  auto model = train_baseline(data, mlp_spec({2, 32, 32, 2}, 1, 2), o);
  auto same = model;
  prune(same, 0.0);
  for (std::size_t p = 0; p < model.weights.size(); ++p) CHECK(same.weights[p] == model.weights[p]);
  const auto masks = prune(model, 0.3);
  const double want = 0.3 * static_cast<double>(count_weights(model));
  CHECK(std::abs(static_cast<double>(count_zero_weights(model)) - want) <= 1.0);
  o.masks = &masks;
  o.epochs = 2;
  train(model, data, o);
  CHECK(std::abs(static_cast<double>(count_zero_weights(model)) - want) <= 1.0);
  CHECK(accuracy(model, data) > 0.95);
  CHECK_THROWS_AS(prune(model, 1.0), LearnError);
}

TEST_CASE("sweep normalization and thread independence") {
  const auto data = toy_dataset(600, 4, 3);
  TrainOptions o;
  o.epochs = 5;
  const auto q = quantize(train_baseline(data, mlp_spec({2, 24, 3}, 1, 2), o), data.images);
  SweepConfig cfg;
  cfg.fault_rates = {0, 10, 50};
  cfg.trials = 3;
  cfg.rows = 4;
  cfg.cols = 4;
  cfg.err.k = 6;
  cfg.threads = 1;
  const auto a = accuracy_sweep(q, data, cfg);
  CHECK(a.points[0].normalized_drop_pct == 0.0);
  cfg.threads = 3;
  const auto b = accuracy_sweep(q, data, cfg);
  CHECK(sweep_to_csv(a) == sweep_to_csv(b));
  CHECK(sweep_to_json(a, cfg).dump() == sweep_to_json(b, cfg).dump());
  cfg.trials = 0;
  CHECK_THROWS_AS(accuracy_sweep(q, data, cfg), LearnError);
}

TEST_CASE("fault-aware training loop contract") {
  const auto data = toy_dataset(800, 5);
  TrainOptions o;
  o.epochs = 3;
  const auto start = train_baseline(data, mlp_spec({2, 16, 2}, 1, 2), o);
  const auto map = build_fault_map(8, 4, 25, 6);
  FaultAwareConfig cfg;
  cfg.train.epochs = 1;
  cfg.initial_fr = 25;
  cfg.delta_step = 25;

  cfg.acc_threshold = 0.0;
  const auto easy = fault_aware_train(start, data, data, map, cfg);
  CHECK(easy.iterations == 1);
  CHECK(easy.threshold_met);
  CHECK(easy.fr_max_non_crit == 25);

  cfg.acc_threshold = 1.01;
  const auto hard = fault_aware_train(start, data, data, map, cfg);
  CHECK(hard.iterations == 2);
  CHECK_FALSE(hard.threshold_met);
  CHECK(hard.fr_max_non_crit == 0);

  cfg.delta_step = 10;
  const auto steps = fault_aware_train(start, data, data, map, cfg);
  CHECK(steps.iterations == 4);  // 25, 15, 5, 0
  for (const auto& h : steps.history) CHECK(h.first <= cfg.initial_fr);
  cfg.delta_step = 0;
  CHECK_THROWS_AS(fault_aware_train(start, data, data, map, cfg), LearnError);
}

TEST_CASE("inference through an FSR") {
  const auto data = noise_dataset(30, 4, 4, 9);
  const auto q = quantize(init_model<float>(mlp_spec({16, 12, 10}, 4, 4), 8), data.images);
  const ArrayErrorModel err{{ErrorFormat::Int8Mac, 6, ErrorMode::WorstCaseSigned}};
  const auto map = build_fault_map(8, 4, 25, 10);
  const auto ref = argmax_rows(quantized_forward(q, data.images).logits);

  const auto off = infer_with_fsr(q, {map, "t", 0.0}, data.images, err);
  CHECK(off.predictions == ref);
  CHECK(off.throughput.n_remaining_pe == 32 - 8);
  const auto raw = infer_with_fsr(q, {map, "t", 50.0}, data.images, err);
  CHECK(raw.predictions == forward_faulty(q, data.images, map, err));
  CHECK(raw.applied == map);
}

TEST_CASE("idx reader") {
  const auto dir = std::filesystem::temp_directory_path() / "faultbin_idx_test";
  std::filesystem::create_directories(dir);
  const std::vector<std::uint8_t> img_hdr{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3};
  const std::vector<std::uint8_t> pixels{0, 255, 51, 0, 0, 0, 1, 2, 3, 4, 5, 6};
  const std::vector<std::uint8_t> lab_hdr{0, 0, 8, 1, 0, 0, 0, 2};
  for (bool gz : {false, true}) {
    const auto ip = (dir / (gz ? "i.gz" : "i")).string();
    const auto lp = (dir / (gz ? "l.gz" : "l")).string();
    write_idx(ip, img_hdr, pixels, gz);
    write_idx(lp, lab_hdr, {7, 2}, gz);
    const auto d = load_idx(ip, lp);
    CHECK(d.size() == 2);
    CHECK(d.height == 2);
    CHECK(d.width == 3);
    CHECK(d.images(0, 1) == 1.0F);
    CHECK(d.images(0, 2) == doctest::Approx(0.2));
    CHECK(d.labels == std::vector<std::uint8_t>{7, 2});
  }
  write_idx((dir / "bad").string(), img_hdr, {1, 2, 3}, false);
  CHECK_THROWS_AS(load_idx((dir / "bad").string(), (dir / "l").string()), DatasetError);
  CHECK_THROWS_AS(load_idx((dir / "missing").string(), (dir / "l").string()), DatasetError);
  CHECK_THROWS_AS(load_mnist((dir / "nowhere").string()), DatasetError);
  std::filesystem::remove_all(dir);
}
