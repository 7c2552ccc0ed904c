#include "iconnet/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace iconnet {

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const Json& json, std::string path) : json_(json), path_(std::move(path)) {
    if (!json_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }
  bool has(const std::string& key) {
    seen_.insert(key);
    return json_.contains(key) && !json_.at(key).is_null();
  }

  const Json& raw(const std::string& key) {
    if (!has(key)) throw ConfigError(at(key), "required field is missing");
    return json_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    const Json& value = raw(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!value.is_boolean()) throw ConfigError(at(key), "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!value.is_number_integer()) throw ConfigError(at(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (value.is_number_integer() && !value.is_number_unsigned() && value.get<long long>() < 0) {
            throw ConfigError(at(key), "expected a non-negative integer");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!value.is_number()) throw ConfigError(at(key), "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!value.is_string()) throw ConfigError(at(key), "expected a string");
      }
      return value.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(at(key), e.what());
    }
  }

  template <typename T>
  void maybe(const std::string& key, T& out) {
    if (has(key)) out = get<T>(key);
  }

  void finish() const {
    for (const auto& item : json_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(at(item.key()), "unknown field");
    }
  }

 private:
  const Json& json_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
auto at_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, e.what());
  }
}

void check(bool condition, const std::string& path, const std::string& message) {
  if (!condition) throw ConfigError(path, message);
}

Json to_json(const FrontendBlockConfig& b) {
  return Json{{"num_kernels", b.num_kernels},
              {"kernel_taps", b.kernel_taps},
              {"variant", std::string(to_string(b.variant))},
              {"window_preset", std::string(to_string(b.window_preset))},
              {"downsample_factor", b.downsample_factor},
              {"lrn", {{"size", b.lrn.size}, {"alpha", b.lrn.alpha}, {"beta", b.lrn.beta}, {"bias", b.lrn.bias}}},
              {"nlrelu_beta", b.nlrelu_beta},
              {"mel_f_min", b.mel_f_min},
              {"mel_f_max", b.mel_f_max},
              {"low_extra_fraction", b.low_extra_fraction}};
}

FrontendBlockConfig block_from_json(const Json& json, const std::string& path) {
  Fields f(json, path);
  FrontendBlockConfig b;
  f.maybe("num_kernels", b.num_kernels);
  check(b.num_kernels >= 1, f.at("num_kernels"), "must be >= 1");
  f.maybe("kernel_taps", b.kernel_taps);
  check(b.kernel_taps >= 3 && b.kernel_taps % 2 == 1, f.at("kernel_taps"), "must be odd and >= 3");
  if (f.has("variant")) {
    b.variant = at_path(f.at("variant"), [&] { return parse_variant(f.get<std::string>("variant")); });
  }
  if (f.has("window_preset")) {
    b.window_preset =
        at_path(f.at("window_preset"), [&] { return parse_window_preset(f.get<std::string>("window_preset")); });
  }
  f.maybe("downsample_factor", b.downsample_factor);
  check(b.downsample_factor >= 1, f.at("downsample_factor"), "must be >= 1");
  if (f.has("lrn")) {
    Fields l(f.raw("lrn"), f.at("lrn"));
    l.maybe("size", b.lrn.size);
    check(b.lrn.size >= 1, l.at("size"), "must be >= 1");
    l.maybe("alpha", b.lrn.alpha);
    check(b.lrn.alpha >= 0.0, l.at("alpha"), "must be >= 0");
    l.maybe("beta", b.lrn.beta);
    l.maybe("bias", b.lrn.bias);
    check(b.lrn.bias > 0.0, l.at("bias"), "must be positive");
    l.finish();
  }
  f.maybe("nlrelu_beta", b.nlrelu_beta);
  check(b.nlrelu_beta > 0.0, f.at("nlrelu_beta"), "must be positive");
  f.maybe("mel_f_min", b.mel_f_min);
  check(b.mel_f_min >= 0.0, f.at("mel_f_min"), "must be >= 0");
  f.maybe("mel_f_max", b.mel_f_max);
  f.maybe("low_extra_fraction", b.low_extra_fraction);
  check(b.low_extra_fraction >= 0.0 && b.low_extra_fraction < 1.0, f.at("low_extra_fraction"),
        "must lie in [0, 1)");
  f.finish();
  return b;
}

}  // namespace

Precision parse_precision(std::string_view name) {
  if (name == "float64") return Precision::kFloat64;
  if (name == "float32") return Precision::kFloat32;
  throw InvalidArgument("unknown precision '" + std::string(name) + "' (expected float64 or float32)");
}

std::string_view to_string(Precision precision) {
  return precision == Precision::kFloat32 ? "float32" : "float64";
}

ModelConfig preset_model(std::string_view name, Variant variant, int num_classes) {
  ModelConfig config;
  config.sample_rate = 16000.0;
  config.classifier.num_classes = num_classes;
  if (name == "ser-256" || name == "ser-456") {
    FrontendBlockConfig block;
    block.num_kernels = name == "ser-256" ? 256 : 456;
    block.kernel_taps = 511;
    block.downsample_factor = 8;
    block.variant = variant;
    config.blocks = {block};
    config.classifier.pool = PoolKind::kMean;
    config.classifier.hidden_nodes = 512;
  } else if (name == "heart") {
    FrontendBlockConfig first;
    first.num_kernels = 128;
    first.kernel_taps = 511;
    first.downsample_factor = 4;
    first.variant = variant;
    FrontendBlockConfig second = first;
    second.num_kernels = 32;
    second.kernel_taps = 127;
    second.downsample_factor = 2;
    config.blocks = {first, second};
    config.classifier.pool = PoolKind::kMax;
    config.classifier.hidden_nodes = 256;
  } else {
    throw InvalidArgument("unknown preset '" + std::string(name) + "' (expected ser-256, ser-456 or heart)");
  }
  return config;
}

Json to_json(const ModelConfig& config) {
  Json blocks = Json::array();
  for (const auto& b : config.blocks) blocks.push_back(to_json(b));
  return Json{{"sample_rate", config.sample_rate},
              {"blocks", blocks},
              {"classifier",
               {{"pool", std::string(to_string(config.classifier.pool))},
                {"hidden_nodes", config.classifier.hidden_nodes},
                {"num_classes", config.classifier.num_classes},
                {"leaky_slope", config.classifier.leaky_slope}}}};
}

ModelConfig model_config_from_json(const Json& json, const std::string& path) {
  Fields f(json, path);
  ModelConfig config;
  f.maybe("sample_rate", config.sample_rate);
  check(config.sample_rate > 0.0, f.at("sample_rate"), "must be positive");
  const Json& blocks = f.raw("blocks");
  check(blocks.is_array() && !blocks.empty(), f.at("blocks"), "expected a non-empty array");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    config.blocks.push_back(block_from_json(blocks[i], f.at("blocks") + "[" + std::to_string(i) + "]"));
  }
  if (f.has("classifier")) {
    Fields c(f.raw("classifier"), f.at("classifier"));
    if (c.has("pool")) {
      config.classifier.pool = at_path(c.at("pool"), [&] { return parse_pool(c.get<std::string>("pool")); });
    }
    c.maybe("hidden_nodes", config.classifier.hidden_nodes);
    check(config.classifier.hidden_nodes >= 1, c.at("hidden_nodes"), "must be >= 1");
    c.maybe("num_classes", config.classifier.num_classes);
    check(config.classifier.num_classes >= 2, c.at("num_classes"), "must be >= 2");
    c.maybe("leaky_slope", config.classifier.leaky_slope);
    c.finish();
  }
  f.finish();
  return config;
}

Json to_json(const SynthSpec& spec) {
  Json classes = Json::array();
  for (const auto& recipe : spec.classes) {
    Json bands = Json::array();
    for (const auto& band : recipe.bands) {
      bands.push_back({{"lo_hz", band.lo_hz}, {"hi_hz", band.hi_hz}, {"amplitude", band.amplitude}});
    }
    classes.push_back({{"name", recipe.name}, {"bands", bands}});
  }
  Json out{{"classes", classes},
           {"n_per_class", spec.n_per_class},
           {"duration_s", spec.duration_s},
           {"sample_rate", spec.sample_rate},
           {"tones_per_item", spec.tones_per_item}};
  out["noise_db"] = spec.noise_db ? Json(*spec.noise_db) : Json(nullptr);
  return out;
}

SynthSpec synth_spec_from_json(const Json& json, const std::string& path) {
  Fields f(json, path);
  SynthSpec spec;
  const Json& classes = f.raw("classes");
  check(classes.is_array() && classes.size() >= 2, f.at("classes"), "expected an array of at least two classes");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string cpath = f.at("classes") + "[" + std::to_string(i) + "]";
    Fields c(classes[i], cpath);
    ClassRecipe recipe;
    recipe.name = c.get<std::string>("name");
    check(!recipe.name.empty(), c.at("name"), "must not be empty");
    const Json& bands = c.raw("bands");
    check(bands.is_array() && !bands.empty(), c.at("bands"), "expected a non-empty array");
    for (std::size_t j = 0; j < bands.size(); ++j) {
      Fields b(bands[j], c.at("bands") + "[" + std::to_string(j) + "]");
      ToneBand band;
      band.lo_hz = b.get<double>("lo_hz");
      band.hi_hz = b.get<double>("hi_hz");
      b.maybe("amplitude", band.amplitude);
      check(band.lo_hz >= 0.0 && band.lo_hz <= band.hi_hz, b.at("hi_hz"), "need 0 <= lo_hz <= hi_hz");
      check(band.amplitude >= 0.0, b.at("amplitude"), "must be >= 0");
      b.finish();
      recipe.bands.push_back(band);
    }
    c.finish();
    spec.classes.push_back(std::move(recipe));
  }
  f.maybe("n_per_class", spec.n_per_class);
  check(spec.n_per_class >= 1, f.at("n_per_class"), "must be >= 1");
  f.maybe("duration_s", spec.duration_s);
  check(spec.duration_s > 0.0, f.at("duration_s"), "must be positive");
  f.maybe("sample_rate", spec.sample_rate);
  check(spec.sample_rate > 0, f.at("sample_rate"), "must be positive");
  f.maybe("tones_per_item", spec.tones_per_item);
  check(spec.tones_per_item >= 1, f.at("tones_per_item"), "must be >= 1");
  if (json.contains("noise_db")) {
    const Json& noise = json.at("noise_db");
    f.has("noise_db");
    if (noise.is_null() || (noise.is_string() && noise.get<std::string>() == "-inf")) {
      spec.noise_db.reset();
    } else {
      spec.noise_db = f.get<double>("noise_db");
    }
  }
  for (std::size_t i = 0; i < spec.classes.size(); ++i) {
    for (const auto& band : spec.classes[i].bands) {
      check(band.hi_hz <= 0.5 * spec.sample_rate, f.at("classes") + "[" + std::to_string(i) + "]",
            "band exceeds the Nyquist frequency");
    }
  }
  f.finish();
  return spec;
}

Json to_json(const TrainConfig& t) {
  return Json{{"max_epochs", t.max_epochs},   {"early_stop_patience", t.early_stop_patience},
              {"batch_size", t.batch_size},   {"max_lr", t.max_lr},
              {"pct_start", t.pct_start},     {"div_factor", t.div_factor},
              {"final_div_factor", t.final_div_factor}, {"weight_decay", t.weight_decay},
              {"class_weighted", t.class_weighted}};
}

ModelConfig ExperimentConfig::model(int num_classes) const {
  ModelConfig config;
  if (preset) {
    config = preset_model(*preset, variant.value_or(Variant::kW), num_classes);
  } else {
    config = architecture.value();
    config.classifier.num_classes = num_classes;
    if (variant) {
      for (auto& b : config.blocks) b.variant = *variant;
    }
  }
  return config;
}

Json to_json(const ExperimentConfig& config) {
  Json out;
  out["seed"] = config.seed;
  Json dataset = Json::object();
  if (config.dataset.manifest) dataset["manifest"] = config.dataset.manifest->generic_string();
  if (config.dataset.synth) {
    dataset["synth"] = to_json(*config.dataset.synth);
    dataset["synth_seed"] = config.dataset.synth_seed;
  }
  out["dataset"] = dataset;
  if (config.preset) out["preset"] = *config.preset;
  if (config.architecture) out["architecture"] = to_json(*config.architecture);
  if (config.variant) out["variant"] = std::string(to_string(*config.variant));
  out["precision"] = std::string(to_string(config.precision));
  out["training"] = to_json(config.training);
  out["cv"] = {{"folds", config.cv.folds}, {"validation_fraction", config.cv.validation_fraction}};
  return out;
}

ExperimentConfig experiment_config_from_json(const Json& json, const std::filesystem::path& base_dir) {
  Fields f(json, "$");
  ExperimentConfig config;
  f.maybe("seed", config.seed);

  {
    Fields d(f.raw("dataset"), f.at("dataset"));
    if (d.has("manifest")) {
      std::filesystem::path manifest = d.get<std::string>("manifest");
      if (manifest.is_relative() && !base_dir.empty()) manifest = base_dir / manifest;
      config.dataset.manifest = manifest;
    }
    if (d.has("synth")) config.dataset.synth = synth_spec_from_json(d.raw("synth"), d.at("synth"));
    d.maybe("synth_seed", config.dataset.synth_seed);
    check(config.dataset.manifest.has_value() != config.dataset.synth.has_value(), f.at("dataset"),
          "exactly one of 'manifest' or 'synth' is required");
    d.finish();
  }

  if (f.has("preset")) {
    const std::string name = f.get<std::string>("preset");
    at_path(f.at("preset"), [&] { return preset_model(name, Variant::kW, 2); });
    config.preset = name;
  }
  if (f.has("architecture")) config.architecture = model_config_from_json(f.raw("architecture"), f.at("architecture"));
  check(config.preset.has_value() != config.architecture.has_value(), "$",
        "exactly one of 'preset' or 'architecture' is required");
  if (f.has("variant")) {
    config.variant = at_path(f.at("variant"), [&] { return parse_variant(f.get<std::string>("variant")); });
  }
  if (f.has("precision")) {
    config.precision =
        at_path(f.at("precision"), [&] { return parse_precision(f.get<std::string>("precision")); });
  }

  if (f.has("training")) {
    Fields t(f.raw("training"), f.at("training"));
    TrainConfig& tc = config.training;
    t.maybe("max_epochs", tc.max_epochs);
    check(tc.max_epochs >= 1, t.at("max_epochs"), "must be >= 1");
    t.maybe("early_stop_patience", tc.early_stop_patience);
    check(tc.early_stop_patience >= 1, t.at("early_stop_patience"), "must be >= 1");
    t.maybe("batch_size", tc.batch_size);
    check(tc.batch_size >= 1, t.at("batch_size"), "must be >= 1");
    t.maybe("max_lr", tc.max_lr);
    check(tc.max_lr > 0.0, t.at("max_lr"), "must be positive");
    t.maybe("pct_start", tc.pct_start);
    check(tc.pct_start > 0.0 && tc.pct_start < 1.0, t.at("pct_start"), "must lie in (0, 1)");
    t.maybe("div_factor", tc.div_factor);
    check(tc.div_factor > 0.0, t.at("div_factor"), "must be positive");
    t.maybe("final_div_factor", tc.final_div_factor);
    check(tc.final_div_factor > 0.0, t.at("final_div_factor"), "must be positive");
    t.maybe("weight_decay", tc.weight_decay);
    check(tc.weight_decay >= 0.0, t.at("weight_decay"), "must be >= 0");
    t.maybe("class_weighted", tc.class_weighted);
    t.finish();
  }
  config.training.seed = config.seed;

  if (f.has("cv")) {
    Fields c(f.raw("cv"), f.at("cv"));
    c.maybe("folds", config.cv.folds);
    check(config.cv.folds >= 2, c.at("folds"), "must be >= 2");
    c.maybe("validation_fraction", config.cv.validation_fraction);
    check(config.cv.validation_fraction > 0.0 && config.cv.validation_fraction < 1.0, c.at("validation_fraction"),
          "must lie in (0, 1)");
    c.finish();
  }
  f.finish();
  return config;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("$", path.string() + ": " + e.what());
  }
}

}  // namespace iconnet
