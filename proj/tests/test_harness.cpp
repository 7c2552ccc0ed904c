#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "iconnet/checkpoint.hpp"
#include "iconnet/config.hpp"
#include "iconnet/dataset.hpp"
#include "iconnet/experiment.hpp"
#include "iconnet/metrics.hpp"
#include "iconnet/resample.hpp"

using namespace iconnet;

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

// Hand-assembled RIFF file; data_size may disagree with the payload.
std::vector<std::uint8_t> wav_bytes(const std::vector<std::int16_t>& samples, int channels, int rate,
                                    int format = 1, int bits = 16, long data_size = -1) {
  const auto payload = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  put_tag(out, "RIFF");
  put_u32(out, 36 + payload);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, static_cast<std::uint16_t>(format));
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(rate));
  put_u32(out, static_cast<std::uint32_t>(rate * channels * bits / 8));
  put_u16(out, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(out, static_cast<std::uint16_t>(bits));
  put_tag(out, "data");
  put_u32(out, data_size < 0 ? payload : static_cast<std::uint32_t>(data_size));
  for (std::int16_t s : samples) put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

std::string error_message(const auto& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

std::vector<double> hann_taper(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] * (0.5 - 0.5 * std::cos(2.0 * kPi<double> * static_cast<double>(i) / static_cast<double>(x.size() - 1)));
  }
  return out;
}

// |DFT| at an arbitrary frequency (Hz). The complex exponential advances by
// rotation in long double.
double dft_magnitude(const std::vector<double>& x, double freq, double rate) {
  const long double pi = 3.141592653589793238462643383279502884L;
  const std::complex<long double> rotate = std::polar(1.0L, -2.0L * pi * freq / rate);
  std::complex<long double> phasor = 1.0L, acc = 0.0L;
  for (double v : x) {
    acc += static_cast<long double>(v) * phasor;
    phasor *= rotate;
  }
  return static_cast<double>(std::abs(acc));
}

std::vector<double> tone(double freq, double rate, std::size_t n, double amplitude = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amplitude * std::sin(2.0 * kPi<double> * freq * i / rate + phase);
  return x;
}

std::vector<double> middle(const std::vector<double>& x, std::size_t keep) {
  const std::size_t start = (x.size() - keep) / 2;
  return {x.begin() + static_cast<long>(start), x.begin() + static_cast<long>(start + keep)};
}

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

// Brute force: recompute every score from an explicit confusion matrix.
MetricsReport metrics_oracle(const std::vector<int>& preds, const std::vector<int>& labels, int classes) {
  MetricsReport r;
  std::vector<std::vector<int>> conf(static_cast<std::size_t>(classes), std::vector<int>(static_cast<std::size_t>(classes), 0));
  for (std::size_t i = 0; i < labels.size(); ++i) conf[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])]++;
  r.confusion = Eigen::MatrixXi::Zero(classes, classes);
  for (int a = 0; a < classes; ++a) {
    for (int b = 0; b < classes; ++b) r.confusion(a, b) = conf[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }
  double recall_sum = 0.0, f1_sum = 0.0, weighted = 0.0;
  int supported = 0;
  for (int c = 0; c < classes; ++c) {
    int support = 0, predicted = 0;
    for (int j = 0; j < classes; ++j) {
      support += conf[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
      predicted += conf[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
    }
    if (support == 0) continue;
    const int tp = conf[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    const double recall = static_cast<double>(tp) / support;
    const double precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / predicted;
    const double f1 = (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    recall_sum += recall;
    f1_sum += f1;
    weighted += f1 * support;
    ++supported;
  }
  if (supported > 0) {
    r.ua = 100.0 * recall_sum / supported;
    r.uf1 = 100.0 * f1_sum / supported;
    r.f1_weighted = 100.0 * weighted / static_cast<double>(labels.size());
  }
  return r;
}

LabeledDataset tiny_two_class(int per_class, double seconds = 0.1) {
  SynthSpec spec;
  spec.classes = {{"low", {{200.0, 400.0, 1.0}}}, {"high", {{2400.0, 3200.0, 1.0}}}};
  spec.n_per_class = per_class;
  spec.duration_s = seconds;
  return synth_dataset(spec, 5);
}

ExperimentConfig smoke_config() {
  ExperimentConfig config;
  config.seed = 11;
  ModelConfig model;
  FrontendBlockConfig block;
  block.num_kernels = 1;
  block.kernel_taps = 33;
  block.downsample_factor = 4;
  block.variant = Variant::kFixed;
  model.blocks = {block};
  model.classifier.hidden_nodes = 4;
  config.architecture = model;
  config.training.max_epochs = 2;
  config.training.batch_size = 2;
  config.cv.folds = 2;
  config.dataset.synth = default_synth_spec();
  return config;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("wav scaling and averaging") {
  const WavData mono = parse_wav(wav_bytes({0, 16384, -32768}, 1, 8000));
  CHECK(mono.sample_rate == 8000);
  REQUIRE(mono.samples.size() == 3);
  CHECK(mono.samples[0] == 0.0);
  CHECK(mono.samples[1] == 0.5);
  CHECK(mono.samples[2] == -1.0);

  const WavData stereo = parse_wav(wav_bytes({16384, -16384, 8192, 0}, 2, 16000));
  REQUIRE(stereo.samples.size() == 2);
  CHECK(stereo.samples[0] == 0.0);
  CHECK(stereo.samples[1] == 0.125);
}

TEST_CASE("wav errors name the chunk") {
  const auto truncated = wav_bytes({1, 2, 3, 4}, 1, 8000, 1, 16, 100);
  CHECK_THROWS_AS(parse_wav(truncated), FormatError);
  CHECK(error_message([&] { parse_wav(truncated); }).find("\"data\"") != std::string::npos);

  const auto float_codec = wav_bytes({1, 2}, 1, 8000, 3);
  CHECK_THROWS_AS(parse_wav(float_codec), FormatError);
  CHECK(error_message([&] { parse_wav(float_codec); }).find("\"fmt \"") != std::string::npos);

  auto bad_magic = wav_bytes({1}, 1, 8000);
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(parse_wav(bad_magic), FormatError);
  CHECK_THROWS_AS(parse_wav({}), FormatError);
}

TEST_CASE("wav round trip") {
  const std::vector<double> samples = {0.0, 0.25, -0.5, 0.999, -1.0, 1.5};
  const WavData back = parse_wav(encode_wav(samples, 22050));
  CHECK(back.sample_rate == 22050);
  REQUIRE(back.samples.size() == samples.size());
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(back.samples[i] - samples[i]) <= 0.5 / 32768.0);
  CHECK(back.samples[5] == 32767.0 / 32768.0);
}

TEST_CASE("resampling at equal rates is the identity") {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal;
  std::vector<double> x(1001);
  for (double& v : x) v = normal(gen);
  CHECK(resample(x, 16000, 16000) == x);
  CHECK(resample(x, 2000, 16000).size() == 8008);
  CHECK(resample(x, 16000, 2000).size() == 126);
  CHECK_THROWS_AS(resample(x, 0, 16000), InvalidArgument);
}

TEST_CASE("upsampled tone keeps its frequency") {
  const std::vector<double> x = tone(440.0, 2000.0, 4000, 0.8, 0.3);
  const std::vector<double> y = hann_taper(middle(resample(x, 2000, 16000), 16000));
  double best = 0.0, best_freq = 0.0;
  for (double f = 435.0; f <= 445.0; f += 0.01) {
    const double m = dft_magnitude(y, f, 16000.0);
    if (m > best) {
      best = m;
      best_freq = f;
    }
  }
  CHECK(std::abs(best_freq - 440.0) <= 0.5);
  double spurious = 0.0;
  for (double f = 0.0; f <= 8000.0; f += 1.0) {
    if (std::abs(f - 440.0) < 10.0) continue;
    spurious = std::max(spurious, dft_magnitude(y, f, 16000.0));
  }
  CHECK(20.0 * std::log10(spurious / best) <= -40.0);
}

TEST_CASE("upsampling leaves only residue above the old nyquist") {
  std::vector<double> x = tone(300.0, 2000.0, 4000, 0.5);
  const std::vector<double> second = tone(730.0, 2000.0, 4000, 0.3, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += second[i];
  const std::vector<double> y = hann_taper(middle(resample(x, 2000, 16000), 16000));
  double pass = 0.0, stop = 0.0;
  for (double f = 2.0; f < 8000.0; f += 2.0) {
    const double m = dft_magnitude(y, f, 16000.0);
    if (f < 1000.0) pass += m * m;
    else stop += m * m;
  }
  CHECK(10.0 * std::log10(stop / pass) <= -40.0);
}

TEST_CASE("resampling preserves in-band energy") {
  for (auto [from, to, freq] : {std::tuple{2000, 16000, 440.0}, std::tuple{16000, 8000, 1000.0},
                                std::tuple{8000, 16000, 2500.0}, std::tuple{16000, 22050, 3000.0}}) {
    const auto x = tone(freq, from, static_cast<std::size_t>(from), 0.7);
    const auto y = resample(x, from, to);
    const double ratio = rms(middle(y, y.size() / 2)) / rms(middle(x, x.size() / 2));
    CHECK(std::abs(ratio - 1.0) <= 0.05);
  }
}

TEST_CASE("synthetic data is deterministic") {
  SynthSpec spec = default_synth_spec();
  spec.n_per_class = 4;
  spec.duration_s = 0.05;
  const auto a = synth_dataset(spec, 9);
  const auto b = synth_dataset(spec, 9);
  const auto c = synth_dataset(spec, 10);
  REQUIRE(a.size() == 12);
  CHECK(a.class_names == std::vector<std::string>{"low", "mid", "high"});
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.items[i].waveform == b.items[i].waveform);
    CHECK(a.items[i].label == b.items[i].label);
  }
  CHECK(a.items[0].waveform != c.items[0].waveform);
  CHECK(a.labels() == b.labels());
}

TEST_CASE("noise-free single-tone items are pure tones") {
  SynthSpec spec;
  spec.classes = {{"a", {{500.0, 500.0, 1.0}}}, {"b", {{1500.0, 1500.0, 1.0}}}};
  spec.n_per_class = 2;
  spec.duration_s = 0.25;
  spec.noise_db.reset();
  spec.tones_per_item = 1;
  const auto data = synth_dataset(spec, 3);
  for (const auto& item : data.items) {
    const double f = item.label == 0 ? 500.0 : 1500.0;
    // Project onto sin/cos at f: a pure tone leaves no residual.
    double s = 0.0, c = 0.0;
    const auto& w = item.waveform;
    for (std::size_t i = 0; i < w.size(); ++i) {
      s += w[i] * std::sin(2.0 * kPi<double> * f * i / 16000.0);
      c += w[i] * std::cos(2.0 * kPi<double> * f * i / 16000.0);
    }
    s *= 2.0 / static_cast<double>(w.size());
    c *= 2.0 / static_cast<double>(w.size());
    double residual = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double fit = s * std::sin(2.0 * kPi<double> * f * i / 16000.0) + c * std::cos(2.0 * kPi<double> * f * i / 16000.0);
      residual = std::max(residual, std::abs(w[i] - fit));
    }
    CHECK(residual <= 1e-9 * std::max(1.0, std::hypot(s, c)));
  }
}

TEST_CASE("default classes are separable by band energy") {
  SynthSpec spec = default_synth_spec();
  spec.n_per_class = 8;
  spec.duration_s = 0.25;
  const auto data = synth_dataset(spec, 1);
  for (const auto& item : data.items) {
    const std::vector<double> tapered = hann_taper(item.waveform);
    std::vector<double> energy;
    for (const auto& recipe : spec.classes) {
      double e = 0.0;
      for (const auto& band : recipe.bands) {
        double width = band.hi_hz - band.lo_hz;
        for (double f = band.lo_hz; f <= band.hi_hz; f += 4.0) {
          const double m = dft_magnitude(tapered, f, spec.sample_rate);
          e += m * m;
        }
        e /= std::max(width, 1.0);
      }
      energy.push_back(e);
    }
    const auto argmax = std::max_element(energy.begin(), energy.end()) - energy.begin();
    CHECK(argmax == item.label);
  }
}

TEST_CASE("synthetic spec validation") {
  SynthSpec one_class = default_synth_spec();
  one_class.classes.resize(1);
  CHECK_THROWS_AS(synth_dataset(one_class, 1), InvalidArgument);
  SynthSpec bad_band = default_synth_spec();
  bad_band.classes[0].bands[0].hi_hz = 9000.0;
  CHECK_THROWS_AS(synth_dataset(bad_band, 1), InvalidArgument);
  SynthSpec no_bands = default_synth_spec();
  no_bands.classes[1].bands.clear();
  CHECK_THROWS_AS(synth_dataset(no_bands, 1), InvalidArgument);
}

TEST_CASE("kfold worked examples") {
  const FoldSplit one = stratified_kfold(std::vector<int>(10, 0), 5, 3);
  for (int f = 0; f < 5; ++f) CHECK(one.indices_in(f).size() == 2);

  std::vector<int> labels(8, 0);
  labels.insert(labels.end(), 12, 1);
  const FoldSplit two = stratified_kfold(labels, 4, 3);
  for (int f = 0; f < 4; ++f) {
    int a = 0, b = 0;
    for (std::size_t i : two.indices_in(f)) (labels[i] == 0 ? a : b)++;
    CHECK(a == 2);
    CHECK(b == 3);
    CHECK(two.indices_not_in(f).size() == 15);
  }

  std::vector<int> small = {0, 0, 0, 1, 1, 2, 2, 2};
  CHECK_THROWS_AS(stratified_kfold(small, 3, 1), InvalidArgument);
  CHECK(error_message([&] { stratified_kfold(small, 3, 1); }).find("class 1") != std::string::npos);
}

TEST_CASE("kfold stratification property") {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + static_cast<int>(gen() % 6);
    const int classes = 1 + static_cast<int>(gen() % 5);
    std::vector<int> labels;
    for (int c = 0; c < classes; ++c) {
      const int n = k + static_cast<int>(gen() % 20);
      labels.insert(labels.end(), static_cast<std::size_t>(n), c);
    }
    std::shuffle(labels.begin(), labels.end(), gen);
    const FoldSplit split = stratified_kfold(labels, k, gen());
    std::set<std::size_t> seen;
    for (int c = 0; c < classes; ++c) {
      int lo = 1 << 30, hi = 0;
      for (int f = 0; f < k; ++f) {
        int count = 0;
        for (std::size_t i : split.indices_in(f)) count += labels[i] == c;
        lo = std::min(lo, count);
        hi = std::max(hi, count);
      }
      CHECK(hi - lo <= 1);
    }
    for (int f = 0; f < k; ++f) {
      for (std::size_t i : split.indices_in(f)) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == labels.size());
  }
}

TEST_CASE("stratified holdout") {
  std::vector<int> labels = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2};
  std::vector<std::size_t> pool(labels.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  const auto [keep, held] = stratified_holdout(labels, pool, 0.2, 4);
  std::map<int, int> held_count;
  for (std::size_t i : held) held_count[labels[i]]++;
  CHECK(held_count[0] == 2);
  CHECK(held_count[1] == 1);
  CHECK(held_count[2] == 0);
  CHECK(keep.size() + held.size() == labels.size());
}

TEST_CASE("metrics worked examples") {
  const std::vector<int> labels = {0, 0, 1, 1};
  const std::vector<int> preds = {0, 1, 1, 1};
  const MetricsReport r = compute_metrics(preds, labels, 2);
  CHECK(r.ua == doctest::Approx(75.0).epsilon(1e-14));
  CHECK(r.uf1 == doctest::Approx(100.0 * (2.0 / 3.0 + 0.8) / 2.0).epsilon(1e-14));
  CHECK(r.uf1 == doctest::Approx(73.33).epsilon(1e-4));
  CHECK(r.f1_weighted == doctest::Approx(r.uf1).epsilon(1e-14));
  CHECK(r.confusion(0, 1) == 1);

  const MetricsReport perfect = compute_metrics(labels, labels, 2);
  CHECK(perfect.ua == 100.0);
  CHECK(perfect.uf1 == 100.0);
  CHECK(perfect.f1_weighted == 100.0);

  const std::vector<int> four = {0, 1, 2, 3, 0, 1, 2, 3};
  const std::vector<int> zeros(8, 0);
  CHECK(compute_metrics(zeros, four, 4).ua == 25.0);

  CHECK_THROWS_AS(compute_metrics(std::vector<int>{0, 1}, labels, 2), InvalidArgument);
  CHECK_THROWS_AS(compute_metrics(std::vector<int>{0, 1, 2, 0}, labels, 2), InvalidArgument);
}

TEST_CASE("metrics equal a brute-force oracle") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = 1 + static_cast<int>(gen() % 6);
    const std::size_t n = 1 + gen() % 60;
    std::vector<int> labels(n), preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(gen() % static_cast<unsigned>(classes));
      preds[i] = static_cast<int>(gen() % static_cast<unsigned>(classes));
    }
    const MetricsReport got = compute_metrics(preds, labels, classes);
    const MetricsReport want = metrics_oracle(preds, labels, classes);
    CHECK(got.ua == want.ua);
    CHECK(got.uf1 == want.uf1);
    CHECK(got.f1_weighted == want.f1_weighted);
    CHECK(got.confusion == want.confusion);
    for (int c = 0; c < classes; ++c) {
      CHECK(got.confusion.row(c).sum() == std::count(labels.begin(), labels.end(), c));
    }
    for (double v : {got.ua, got.uf1, got.f1_weighted}) {
      CHECK(v >= 0.0);
      CHECK(v <= 100.0);
    }
  }
}

TEST_CASE("fold aggregation") {
  const std::vector<double> folds = {60.0, 62.0, 64.0};
  const MeanStd s = mean_std(folds);
  CHECK(s.mean == doctest::Approx(62.0).epsilon(1e-15));
  CHECK(s.std == doctest::Approx(std::sqrt(8.0 / 3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(mean_std(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("heart preset stays under the parameter budget") {
  const ModelConfig heart = preset_model("heart", Variant::kW, 2);
  REQUIRE(heart.blocks.size() == 2);
  CHECK(heart.blocks[0].num_kernels == 128);
  CHECK(heart.blocks[1].num_kernels == 32);
  CHECK(heart.classifier.pool == PoolKind::kMax);
  CHECK(heart.classifier.hidden_nodes == 256);
  for (Variant v : {Variant::kB, Variant::kW, Variant::kBW, Variant::kFixed}) {
    const Model<double> model = Model<double>::create(preset_model("heart", v, 2), 0);
    CHECK(model.parameter_count() < 200000);
  }
  const Model<double> ser = Model<double>::create(preset_model("ser-256", Variant::kW, 4), 0);
  // 256 * 2 window terms, head 256*512 + 512 + 2*512 + 512*4 + 4.
  CHECK(ser.parameter_count() == 256 * 2 + 256 * 512 + 512 + 2 * 512 + 512 * 4 + 4);
  CHECK_THROWS_AS(preset_model("ser-999", Variant::kW, 2), InvalidArgument);
}

TEST_CASE("config errors carry json paths") {
  const Json good = Json::parse(R"({"seed": 1, "dataset": {"synth": {"classes": [
      {"name": "a", "bands": [{"lo_hz": 100, "hi_hz": 200}]},
      {"name": "b", "bands": [{"lo_hz": 900, "hi_hz": 1000}]}]}},
      "preset": "ser-256", "variant": "W", "training": {"max_epochs": 3}})");
  const ExperimentConfig config = experiment_config_from_json(good);
  CHECK(config.training.max_epochs == 3);
  CHECK(config.training.seed == 1);
  CHECK(config.model(2).blocks[0].num_kernels == 256);

  const auto path_of = [](Json j) {
    try {
      experiment_config_from_json(j);
    } catch (const ConfigError& e) {
      return e.path();
    }
    return std::string("no error");
  };
  Json bad = good;
  bad["training"]["batch_size"] = 0;
  CHECK(path_of(bad) == "$.training.batch_size");
  bad = good;
  bad["training"]["batch_size"] = "many";
  CHECK(path_of(bad) == "$.training.batch_size");
  bad = good;
  bad["training"]["learning_rate"] = 1.0;
  CHECK(path_of(bad) == "$.training.learning_rate");
  bad = good;
  bad["dataset"]["synth"].erase("classes");
  CHECK(path_of(bad) == "$.dataset.synth.classes");
  bad = good;
  bad["dataset"]["synth"]["classes"][1]["bands"][0]["hi_hz"] = -5;
  CHECK(path_of(bad).rfind("$.dataset.synth.classes[1]", 0) == 0);
  bad = good;
  bad["variant"] = "Q";
  CHECK(path_of(bad) == "$.variant");
  bad = good;
  bad.erase("preset");
  CHECK(path_of(bad) == "$");
  bad = good;
  bad["dataset"]["manifest"] = "x.csv";
  CHECK(path_of(bad) == "$.dataset");
}

TEST_CASE("config round trips through json") {
  ExperimentConfig config = smoke_config();
  config.variant = Variant::kBW;
  config.precision = Precision::kFloat32;
  const Json j = to_json(config);
  const ExperimentConfig back = experiment_config_from_json(j);
  CHECK(to_json(back) == j);
}

TEST_CASE("checkpoint round trip") {
  ModelConfig config = preset_model("heart", Variant::kBW, 3);
  config.blocks[0].num_kernels = 6;
  config.blocks[1].num_kernels = 3;
  config.classifier.hidden_nodes = 5;
  Model<double> model = Model<double>::create(config, 4);
  for (auto& p : model.parameters()) {
    if (p.learnable) *p.value += Matrix<double>::Constant(p.value->rows(), p.value->cols(), 0.01);
  }
  model.refresh();
  const Checkpoint ck = make_checkpoint(model, {"x", "y", "z"}, Precision::kFloat64);
  const auto bytes = encode_checkpoint(ck);
  const Checkpoint back = parse_checkpoint(bytes);
  CHECK(back.class_names == ck.class_names);
  CHECK(encode_checkpoint(back) == bytes);
  const Model<double> restored = model_from_checkpoint<double>(back);
  std::vector<double> x(800);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.01 * static_cast<double>(i * i));
  CHECK(restored.logits(x) == model.logits(x));

  auto corrupt = bytes;
  corrupt[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(corrupt), FormatError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(parse_checkpoint(version), FormatError);
  CHECK(error_message([&] { parse_checkpoint(version); }).find("version") != std::string::npos);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(parse_checkpoint(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(parse_checkpoint(trailing), FormatError);
}

TEST_CASE("manifest loading") {
  const auto dir = std::filesystem::path(ICONNET_TEST_TMP) / "manifest";
  std::filesystem::create_directories(dir / "clips");
  const auto write = [&](const std::string& name, const std::vector<double>& samples, int rate) {
    const auto bytes = encode_wav(samples, rate);
    std::ofstream(dir / "clips" / name, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                               static_cast<std::streamsize>(bytes.size()));
  };
  write("a.wav", {0.5, -0.5}, 8000);
  write("b, c.wav", {0.25}, 8000);
  std::ofstream(dir / "m.csv") << "path,label\nclips/a.wav,yes\n\"clips/b, c.wav\",no\nclips/a.wav,yes\n";
  const LabeledDataset data = load_manifest(dir / "m.csv");
  REQUIRE(data.size() == 3);
  CHECK(data.class_names == std::vector<std::string>{"yes", "no"});
  CHECK(data.labels() == std::vector<int>{0, 1, 0});
  CHECK(data.items[1].waveform == std::vector<double>{0.25});
  CHECK(data.items[0].sample_rate == 8000.0);

  std::ofstream(dir / "missing.csv") << "clips/none.wav,yes\n";
  CHECK_THROWS(load_manifest(dir / "missing.csv"));
}

TEST_CASE("experiment smoke run is deterministic") {
  const ExperimentConfig config = smoke_config();
  const LabeledDataset data = tiny_two_class(2);
  const ExperimentReport a = run_experiment(config, data, 1);
  const ExperimentReport b = run_experiment(config, data, 2);
  REQUIRE(a.folds.size() == 2);
  for (const auto& f : a.folds) CHECK(f.test_items == 2);
  CHECK(to_json(a, config).dump() == to_json(b, config).dump());
  CHECK(a.parameter_count > 0);

  ExperimentConfig too_many = config;
  too_many.cv.folds = 3;
  CHECK_THROWS_AS(run_experiment(too_many, data, 1), InvalidArgument);
}

TEST_CASE("prepared data is resampled to the model rate") {
  LabeledDataset data;
  data.class_names = {"a", "b"};
  data.items.push_back({tone(100.0, 8000.0, 800), 8000.0, 0});
  data.items.push_back({tone(100.0, 16000.0, 1600), 16000.0, 1});
  const TrainData<double> prepared = prepare_data<double>(data, {0, 1}, 16000.0);
  CHECK(prepared.waveforms[0].size() == 1600);
  CHECK(prepared.waveforms[1].size() == 1600);
  CHECK(prepared.labels == std::vector<int>{0, 1});
}

}  // TEST_SUITE
