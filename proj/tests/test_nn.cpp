#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "iconnet/nn.hpp"
#include "iconnet/optim.hpp"
#include "iconnet/train.hpp"

using namespace iconnet;

namespace {

ModelConfig tiny_config(int kernels, int taps, Variant variant, PoolKind pool = PoolKind::kMean, int hidden = 6,
                        int classes = 3) {
  ModelConfig config;
  config.sample_rate = 16000.0;
  FrontendBlockConfig block;
  block.num_kernels = kernels;
  block.kernel_taps = taps;
  block.downsample_factor = 2;
  block.variant = variant;
  block.low_extra_fraction = 0.0;
  block.lrn.alpha = 0.05;  // make the normalization term matter at unit scale
  config.blocks = {block};
  config.classifier.pool = pool;
  config.classifier.hidden_nodes = hidden;
  config.classifier.num_classes = classes;
  return config;
}

struct Batch {
  std::vector<std::vector<double>> waves;
  std::vector<Example<double>> examples;
};

Batch random_batch(int items, int length, int classes, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Batch b;
  b.waves.resize(static_cast<std::size_t>(items));
  for (int i = 0; i < items; ++i) {
    auto& w = b.waves[static_cast<std::size_t>(i)];
    w.resize(static_cast<std::size_t>(length));
    for (double& v : w) v = normal(gen);
  }
  for (int i = 0; i < items; ++i) {
    const auto& w = b.waves[static_cast<std::size_t>(i)];
    b.examples.push_back({std::span<const double>(w.data(), w.size()), i % classes});
  }
  return b;
}

// Naive head: pool, dense, layer norm, leaky ReLU, dense.
std::vector<long double> head_oracle(Classifier<double>& head, const Matrix<double>& features) {
  const auto refs = head.refs();
  const Matrix<double>& w1 = *refs[0].value;
  const Matrix<double>& b1 = *refs[1].value;
  const Matrix<double>& gamma = *refs[2].value;
  const Matrix<double>& beta = *refs[3].value;
  const Matrix<double>& w2 = *refs[4].value;
  const Matrix<double>& b2 = *refs[5].value;
  std::vector<long double> pooled(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index c = 0; c < features.rows(); ++c) {
    long double s = 0.0L;
    for (Eigen::Index m = 0; m < features.cols(); ++m) s += features(c, m);
    pooled[static_cast<std::size_t>(c)] = s / features.cols();
  }
  std::vector<long double> hidden(static_cast<std::size_t>(w1.rows()));
  for (Eigen::Index j = 0; j < w1.rows(); ++j) {
    long double s = b1(j, 0);
    for (Eigen::Index c = 0; c < w1.cols(); ++c) s += w1(j, c) * pooled[static_cast<std::size_t>(c)];
    hidden[static_cast<std::size_t>(j)] = s;
  }
  long double mean = 0.0L, var = 0.0L;
  for (auto v : hidden) mean += v;
  mean /= hidden.size();
  for (auto v : hidden) var += (v - mean) * (v - mean);
  var /= hidden.size();
  for (std::size_t j = 0; j < hidden.size(); ++j) {
    long double y = (hidden[j] - mean) / std::sqrt(var + 1e-5L) * gamma(static_cast<Eigen::Index>(j), 0) +
                    beta(static_cast<Eigen::Index>(j), 0);
    hidden[j] = y > 0 ? y : 0.01L * y;
  }
  std::vector<long double> logits(static_cast<std::size_t>(w2.rows()));
  for (Eigen::Index k = 0; k < w2.rows(); ++k) {
    long double s = b2(k, 0);
    for (Eigen::Index j = 0; j < w2.cols(); ++j) s += w2(k, j) * hidden[static_cast<std::size_t>(j)];
    logits[static_cast<std::size_t>(k)] = s;
  }
  return logits;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("cross entropy values") {
  Vector<double> equal = Vector<double>::Constant(4, 0.7);
  CHECK(cross_entropy(equal, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  Vector<double> extreme(2);
  extreme << 1000.0, 0.0;
  CHECK(cross_entropy(extreme, 0) == doctest::Approx(0.0));
  CHECK(std::isfinite(cross_entropy(extreme, 1)));
  CHECK(cross_entropy(extreme, 1) == doctest::Approx(1000.0));
  CHECK_THROWS_AS(cross_entropy(extreme, 2), InvalidArgument);
  CHECK_THROWS_AS(cross_entropy(extreme, -1), InvalidArgument);

  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal(0.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vector<double> logits(5);
    for (Eigen::Index i = 0; i < 5; ++i) logits(i) = normal(gen);
    long double denom = 0.0L;
    for (Eigen::Index i = 0; i < 5; ++i) denom += std::exp(static_cast<long double>(logits(i)));
    const int label = trial % 5;
    const long double ref = std::log(denom) - logits(label);
    const double loss = cross_entropy(logits, label);
    CHECK(loss >= 0.0);
    CHECK(std::abs(loss - static_cast<double>(ref)) <= 1e-12 * std::max(1.0, loss));
  }
}

TEST_CASE("classifier forward matches a naive loop") {
  Rng rng(4);
  ClassifierConfig config;
  config.hidden_nodes = 7;
  config.num_classes = 3;
  Classifier<double> head(config, 5, rng);
  for (auto& r : head.refs()) r.value->setRandom();
  Matrix<double> features = Matrix<double>::Random(5, 9);
  const Vector<double> logits = head.forward(features);
  const auto ref = head_oracle(head, features);
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(std::abs(logits(k) - static_cast<double>(ref[static_cast<std::size_t>(k)])) <= 1e-10);
}

TEST_CASE("classifier trivial cases") {
  Rng rng(2);
  ClassifierConfig config;
  config.hidden_nodes = 4;
  config.num_classes = 2;
  Classifier<double> head(config, 3, rng);
  auto refs = head.refs();
  refs[4].value->setZero();
  refs[5].value->setZero();
  CHECK(head.forward(Matrix<double>::Zero(3, 5)).isZero(0.0));

  config.pool = PoolKind::kMax;
  Classifier<double> max_head(config, 3, rng);
  Matrix<double> constant(3, 6);
  for (Eigen::Index j = 0; j < 6; ++j) constant.col(j) << 1.0, -2.0, 0.5;
  CHECK(max_head.pool(constant, nullptr) == constant.col(4));
  CHECK_THROWS_AS(head.forward(Matrix<double>::Zero(4, 5)), InvalidArgument);
  CHECK(parse_pool("max") == PoolKind::kMax);
  CHECK_THROWS_AS(parse_pool("sum"), InvalidArgument);
}

TEST_CASE("end-to-end gradients match finite differences on a tiny model") {
  for (Variant v : {Variant::kB, Variant::kW, Variant::kBW}) {
    for (PoolKind pool : {PoolKind::kMean, PoolKind::kMax}) {
      Model<double> model = Model<double>::create(tiny_config(2, 33, v, pool), 9);
      const Batch batch = random_batch(8, 120, 3, 17);
      const auto check = testing::gradient_check(model, batch.examples);
      INFO(check.worst);
      CHECK(check.max_rel_error <= 1e-4);
      CHECK(check.checked > 0);
    }
  }
}

TEST_CASE("gradients through stacked blocks") {
  ModelConfig config = tiny_config(3, 17, Variant::kBW);
  FrontendBlockConfig second = config.blocks[0];
  second.num_kernels = 2;
  second.kernel_taps = 17;
  config.blocks.push_back(second);
  Model<double> model = Model<double>::create(config, 5);
  const Batch batch = random_batch(4, 200, 3, 2);
  const auto check = testing::gradient_check(model, batch.examples);
  INFO(check.worst);
  CHECK(check.max_rel_error <= 1e-4);
}

TEST_CASE("gradient vanishes at the optimum of a symmetric toy problem") {
  // Identical inputs with balanced labels: uniform logits minimize the loss.
  Model<double> model = Model<double>::create(tiny_config(2, 33, Variant::kBW, PoolKind::kMean, 4, 2), 1);
  for (auto& r : model.head().refs()) {
    if (r.name.find("dense2") != std::string::npos) r.value->setZero();
  }
  Batch batch = random_batch(1, 100, 2, 3);
  batch.examples.push_back({batch.examples[0].waveform, 1});
  model.compute_gradients(batch.examples);
  double norm = 0.0;
  for (const auto& p : model.parameters()) norm += p.grad->squaredNorm();
  CHECK(std::sqrt(norm) <= 1e-6);
}

TEST_CASE("fixed front end receives no gradient") {
  Model<double> model = Model<double>::create(tiny_config(3, 33, Variant::kFixed), 1);
  const Batch batch = random_batch(4, 100, 3, 5);
  model.compute_gradients(batch.examples);
  for (const auto& p : model.parameters()) {
    if (p.name.rfind("frontend", 0) == 0) {
      CHECK_FALSE(p.learnable);
      CHECK(p.grad->isZero(0.0));
    }
  }
}

TEST_CASE("class weights produce a weighted mean loss") {
  Model<double> model = Model<double>::create(tiny_config(2, 17, Variant::kW), 3);
  const Batch batch = random_batch(6, 80, 3, 8);
  const std::vector<double> weights = {1.0, 2.0, 0.5};
  const double loss = model.compute_gradients(batch.examples, weights);
  double num = 0.0, den = 0.0;
  for (const auto& ex : batch.examples) {
    const double w = weights[static_cast<std::size_t>(ex.label)];
    num += w * cross_entropy(model.logits(ex.waveform), ex.label);
    den += w;
  }
  CHECK(loss == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("radam constants and branches") {
  CHECK(radam_rho_inf(0.999) == doctest::Approx(1999.0));
  CHECK(radam_rho(0.999, 1) <= 4.0);
  CHECK(radam_rho(0.999, 6) > 4.0);

  Matrix<double> value = Matrix<double>::Random(3, 2);
  Matrix<double> grad = Matrix<double>::Zero(3, 2);
  const Matrix<double> before = value;
  std::vector<ParamRef<double>> params = {{"p", &value, &grad, true}};
  Radam<double> opt;
  for (int i = 0; i < 10; ++i) opt.step(params, 0.1);
  CHECK(value == before);
}

TEST_CASE("radam matches a scalar reference implementation") {
  Matrix<double> value(1, 1);
  value(0, 0) = 0.5;
  Matrix<double> grad(1, 1);
  std::vector<ParamRef<double>> params = {{"p", &value, &grad, true}};
  RadamOptions options;
  options.weight_decay = 0.01;
  Radam<double> opt(options);
  long double p = 0.5L, m = 0.0L, v = 0.0L;
  const long double b1 = 0.9L, b2 = 0.999L, rho_inf = 2.0L / (1.0L - b2) - 1.0L;
  for (int t = 1; t <= 12; ++t) {
    const double g = std::sin(static_cast<double>(t)) + 0.3 * static_cast<double>(value(0, 0));
    grad(0, 0) = g;
    const double lr = 0.01 * t;
    opt.step(params, lr);
    p *= 1.0L - lr * 0.01L;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * static_cast<long double>(g) * g;
    const long double m_hat = m / (1 - std::pow(b1, t));
    const long double rho = rho_inf - 2.0L * t * std::pow(b2, t) / (1 - std::pow(b2, t));
    if (rho > 4.0L) {
      const long double r = std::sqrt((rho - 4) * (rho - 2) * rho_inf / ((rho_inf - 4) * (rho_inf - 2) * rho));
      const long double v_hat = std::sqrt(v / (1 - std::pow(b2, t)));
      p -= lr * r * m_hat / (v_hat + 1e-8L);
    } else {
      p -= lr * m_hat;
    }
    CHECK(value(0, 0) == doctest::Approx(static_cast<double>(p)).epsilon(1e-12));
  }
}

TEST_CASE("onecycle schedule") {
  ScheduleConfig s;
  s.max_lr = 0.01;
  s.total_steps = 1000;
  CHECK(onecycle_lr(s, 0) == doctest::Approx(0.01 / 25.0).epsilon(1e-15));
  CHECK(onecycle_lr(s, 300) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(std::abs(onecycle_lr(s, 999) - 0.01 / 1e4) <= 1e-9 * 0.01 / 1e4);
  CHECK(onecycle_lr(s, 299) == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(onecycle_lr(s, 301) == doctest::Approx(0.01).epsilon(1e-4));
  for (long t = 1; t < 1000; ++t) {
    const double lr = onecycle_lr(s, t);
    CHECK(lr > 0.0);
    CHECK(lr <= 0.01);
    if (t <= 300) CHECK(lr >= onecycle_lr(s, t - 1));
    else CHECK(lr <= onecycle_lr(s, t - 1));
  }
  // Continuity at the phase boundary: both formulas agree at the peak.
  ScheduleConfig odd = s;
  odd.total_steps = 7;
  odd.pct_start = 0.5;
  CHECK(onecycle_lr(odd, 4) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK_THROWS_AS(onecycle_lr(s, 1000), InvalidArgument);
  CHECK_THROWS_AS(onecycle_lr(s, -1), InvalidArgument);
}

TEST_CASE("training loop contracts") {
  const ModelConfig config = tiny_config(4, 33, Variant::kBW, PoolKind::kMean, 8, 2);
  TrainData<double> train_set, val_set;
  std::mt19937_64 gen(21);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (int i = 0; i < 40; ++i) {
    const int label = i % 2;
    const double freq = label == 0 ? 0.03 : 0.3;
    Vector<double> w(200);
    for (Eigen::Index k = 0; k < 200; ++k) w(k) = std::sin(2.0 * kPi<double> * freq * static_cast<double>(k)) + noise(gen);
    auto& target = i < 30 ? train_set : val_set;
    target.waveforms.push_back(w);
    target.labels.push_back(label);
  }
  TrainConfig tc;
  tc.batch_size = 6;
  tc.max_lr = 0.01;
  tc.seed = 3;

  SUBCASE("one epoch") {
    tc.max_epochs = 1;
    Model<double> model = Model<double>::create(config, 1);
    CHECK(train(model, train_set, val_set, tc).history.size() == 1);
  }
  SUBCASE("loss decreases on a separable set") {
    tc.max_epochs = 12;
    tc.early_stop_patience = 12;
    Model<double> model = Model<double>::create(config, 1);
    const auto result = train(model, train_set, val_set, tc);
    REQUIRE(result.history.size() >= 5);
    for (int e = 1; e < 5; ++e) CHECK(result.history[e].loss < result.history[e - 1].loss);
  }
  SUBCASE("deterministic and never worse than a recorded epoch") {
    tc.max_epochs = 6;
    tc.early_stop_patience = 2;
    Model<double> a = Model<double>::create(config, 1);
    Model<double> b = Model<double>::create(config, 1);
    const auto ra = train(a, train_set, val_set, tc);
    const auto rb = train(b, train_set, val_set, tc);
    auto pa = a.parameters();
    auto pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i].value == *pb[i].value);
    REQUIRE(ra.history.size() == rb.history.size());
    for (std::size_t i = 0; i < ra.history.size(); ++i) {
      CHECK(ra.history[i].loss == rb.history[i].loss);
      CHECK(ra.history[i].val_ua <= ra.best_val_ua);
    }
    const double restored = compute_metrics(predict_all(a, val_set.waveforms), val_set.labels, 2).ua;
    CHECK(restored == ra.best_val_ua);
  }
  SUBCASE("empty split") {
    Model<double> model = Model<double>::create(config, 1);
    CHECK_THROWS_AS(train(model, TrainData<double>{}, val_set, tc), InvalidArgument);
    CHECK_THROWS_AS(train(model, train_set, TrainData<double>{}, tc), InvalidArgument);
  }
}

TEST_CASE("one training step touches only the variant's parameters") {
  const Batch batch = random_batch(6, 120, 3, 4);
  TrainData<double> data;
  for (const auto& w : batch.waves) data.waveforms.push_back(Eigen::Map<const Vector<double>>(w.data(), static_cast<Eigen::Index>(w.size())));
  for (const auto& ex : batch.examples) data.labels.push_back(ex.label);
  TrainConfig tc;
  tc.max_epochs = 1;
  tc.batch_size = 6;
  tc.max_lr = 0.05;
  for (Variant v : {Variant::kB, Variant::kW, Variant::kBW, Variant::kFixed}) {
    Model<double> model = Model<double>::create(tiny_config(3, 33, v), 2);
    const Matrix<double> phi = model.blocks()[0].phi();
    const Matrix<double> bands = model.blocks()[0].bands();
    // A single unrectified RAdam step still moves every learnable tensor.
    train(model, data, data, tc);
    const bool phi_changed = model.blocks()[0].phi() != phi;
    const bool bands_changed = model.blocks()[0].bands() != bands;
    CHECK(phi_changed == window_learnable(v));
    CHECK(bands_changed == bands_learnable(v));
  }
}

}  // TEST_SUITE
