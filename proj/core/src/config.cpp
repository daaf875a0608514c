#include "adl/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "adl/errors.hpp"
#include "adl/rng.hpp"

namespace adl {
namespace {

using Json = nlohmann::json;

template <typename T>
T get_as(const Json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

Json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      Json out = Json::array();
      for (const auto& item : node) out.push_back(yaml_to_json(item));
      return out;
    }
    case YAML::NodeType::Map: {
      Json out = Json::object();
      for (const auto& kv : node) out[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return out;
    }
    case YAML::NodeType::Scalar: {
      const auto& text = node.Scalar();
      if (node.Tag() == "!") return text;  // quoted
      if (text == "true" || text == "True") return true;
      if (text == "false" || text == "False") return false;
      if (text == "null" || text == "~") return nullptr;
      try {
        std::size_t used = 0;
        const long long i = std::stoll(text, &used);
        if (used == text.size()) return i;
      } catch (const std::exception&) {
      }
      try {
        std::size_t used = 0;
        const double d = std::stod(text, &used);
        if (used == text.size()) return d;
      } catch (const std::exception&) {
      }
      return text;
    }
  }
  return nullptr;
}

using Setter = std::function<void(RunConfig&, const Json&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset", [](RunConfig& c, const Json& v, const std::string& k) {
         c.data.dataset = data::parse_dataset_kind(get_as<std::string>(v, k));
       }},
      {"data_root", [](RunConfig& c, const Json& v, const std::string& k) { c.data.root = get_as<std::string>(v, k); }},
      {"category", [](RunConfig& c, const Json& v, const std::string& k) { c.data.category = get_as<std::string>(v, k); }},
      {"resize", [](RunConfig& c, const Json& v, const std::string& k) { c.data.geometry.resize = get_as<int>(v, k); }},
      {"crop", [](RunConfig& c, const Json& v, const std::string& k) { c.data.geometry.crop = get_as<int>(v, k); }},
      {"toy_image_size", [](RunConfig& c, const Json& v, const std::string& k) { c.data.toy.image_size = get_as<int>(v, k); }},
      {"toy_n_train", [](RunConfig& c, const Json& v, const std::string& k) { c.data.toy.n_train = get_as<int>(v, k); }},
      {"toy_n_test_normal", [](RunConfig& c, const Json& v, const std::string& k) { c.data.toy.n_test_normal = get_as<int>(v, k); }},
      {"toy_n_test_anomalous", [](RunConfig& c, const Json& v, const std::string& k) { c.data.toy.n_test_anomalous = get_as<int>(v, k); }},
      {"toy_seed", [](RunConfig& c, const Json& v, const std::string& k) { c.data.toy.seed = get_as<std::uint64_t>(v, k); }},
      {"epsilon", [](RunConfig& c, const Json& v, const std::string& k) { c.epsilon = get_as<double>(v, k); }},
      {"noise_sigma", [](RunConfig& c, const Json& v, const std::string& k) { c.noise_sigma = get_as<double>(v, k); }},
      {"contamination_seed", [](RunConfig& c, const Json& v, const std::string& k) {
         if (v.is_null()) c.contamination_seed.reset();
         else c.contamination_seed = get_as<std::uint64_t>(v, k);
       }},
      {"texture_dir", [](RunConfig& c, const Json& v, const std::string& k) { c.texture_dir = get_as<std::string>(v, k); }},
      {"procedural_textures", [](RunConfig& c, const Json& v, const std::string& k) { c.procedural_textures = get_as<int>(v, k); }},
      {"perlin_periods", [](RunConfig& c, const Json& v, const std::string& k) { c.blend.perlin_periods = get_as<std::vector<int>>(v, k); }},
      {"mask_threshold", [](RunConfig& c, const Json& v, const std::string& k) { c.blend.binarize_threshold = get_as<double>(v, k); }},
      {"beta_min", [](RunConfig& c, const Json& v, const std::string& k) { c.blend.beta_min = get_as<double>(v, k); }},
      {"beta_max", [](RunConfig& c, const Json& v, const std::string& k) { c.blend.beta_max = get_as<double>(v, k); }},
      {"augment_source", [](RunConfig& c, const Json& v, const std::string& k) { c.blend.augment_source = get_as<bool>(v, k); }},
      {"backbone", [](RunConfig& c, const Json& v, const std::string& k) { c.model.encoder.backbone = get_as<std::string>(v, k); }},
      {"stages", [](RunConfig& c, const Json& v, const std::string& k) { c.model.encoder.selected_stages = get_as<std::vector<int>>(v, k); }},
      {"finetune", [](RunConfig& c, const Json& v, const std::string& k) { c.model.encoder.finetune = get_as<bool>(v, k); }},
      {"weights", [](RunConfig& c, const Json& v, const std::string& k) { c.model.encoder.weights = get_as<std::string>(v, k); }},
      {"k_fraction", [](RunConfig& c, const Json& v, const std::string& k) { c.model.heads.k_fraction = get_as<double>(v, k); }},
      {"scorer_hidden", [](RunConfig& c, const Json& v, const std::string& k) { c.model.heads.scorer_hidden = get_as<int>(v, k); }},
      {"decoder_width", [](RunConfig& c, const Json& v, const std::string& k) { c.model.heads.decoder_width = get_as<int>(v, k); }},
      {"epochs", [](RunConfig& c, const Json& v, const std::string& k) { c.train.epochs = get_as<int>(v, k); }},
      {"batch_size", [](RunConfig& c, const Json& v, const std::string& k) { c.train.batch_size = get_as<int>(v, k); }},
      {"learning_rate", [](RunConfig& c, const Json& v, const std::string& k) { c.train.learning_rate = get_as<double>(v, k); }},
      {"burn_in", [](RunConfig& c, const Json& v, const std::string& k) { c.train.burn_in = get_as<int>(v, k); }},
      {"divergence", [](RunConfig& c, const Json& v, const std::string& k) {
         c.train.divergence.kind = parse_divergence(get_as<std::string>(v, k));
       }},
      {"alpha", [](RunConfig& c, const Json& v, const std::string& k) { c.train.divergence.alpha = get_as<double>(v, k); }},
      {"lambda", [](RunConfig& c, const Json& v, const std::string& k) { c.train.divergence.lambda = get_as<double>(v, k); }},
      {"gamma", [](RunConfig& c, const Json& v, const std::string& k) { c.train.gamma = get_as<double>(v, k); }},
      {"m_reference", [](RunConfig& c, const Json& v, const std::string& k) { c.train.m_reference = get_as<int64_t>(v, k); }},
      {"prior_mu", [](RunConfig& c, const Json& v, const std::string& k) { c.train.prior_mu = get_as<double>(v, k); }},
      {"prior_sigma", [](RunConfig& c, const Json& v, const std::string& k) { c.train.prior_sigma = get_as<double>(v, k); }},
      {"focal_gamma", [](RunConfig& c, const Json& v, const std::string& k) { c.train.focal_gamma = get_as<double>(v, k); }},
      {"alternation", [](RunConfig& c, const Json& v, const std::string& k) {
         c.train.alternation = parse_alternation(get_as<std::string>(v, k));
       }},
      {"pseudo_ratio", [](RunConfig& c, const Json& v, const std::string& k) { c.train.pseudo_ratio = get_as<double>(v, k); }},
      {"grad_clip", [](RunConfig& c, const Json& v, const std::string& k) { c.train.grad_clip = get_as<double>(v, k); }},
      {"seed", [](RunConfig& c, const Json& v, const std::string& k) { c.train.seed = get_as<std::uint64_t>(v, k); }},
      {"variant", [](RunConfig& c, const Json& v, const std::string& k) {
         c.train = apply_ablation_variant(c.train, get_as<std::string>(v, k));
       }},
  };
  return table;
}

}  // namespace

int RunConfig::image_size() const {
  if (data.dataset == data::DatasetKind::toy && data.root.empty()) return data.toy.image_size;
  return data.geometry.crop;
}

data::ContaminationSpec RunConfig::contamination() const {
  data::ContaminationSpec spec;
  spec.epsilon = epsilon;
  spec.noise_sigma = noise_sigma;
  spec.seed = contamination_seed.value_or(derive_seed(train.seed, 0xC047A));
  return spec;
}

void RunConfig::validate() const {
  try {
    contamination().validate();
    blend.validate();
    model.encoder.validate();
    train.validate();
    if (data.dataset != data::DatasetKind::toy && data.root.empty()) {
      throw ConfigError("data_root is required for dataset " + data::to_string(data.dataset));
    }
    if (data.category.empty()) throw ConfigError("category must not be empty");
    if (procedural_textures < 1) throw ConfigError("procedural_textures must be >= 1");
    if (model.heads.scorer_hidden < 1 || model.heads.decoder_width < 1) {
      throw ConfigError("head widths must be >= 1");
    }
    if (!(model.heads.k_fraction > 0.0 && model.heads.k_fraction <= 1.0)) {
      throw ConfigError("k_fraction must lie in (0, 1]");
    }
    const auto& toy = data.toy;
    if (toy.image_size < 16 || toy.n_train < 2 || toy.n_test_normal < 1 || toy.n_test_anomalous < 1) {
      throw ConfigError("toy set needs image_size >= 16, n_train >= 2 and nonempty test splits");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json RunConfig::to_json() const {
  Json j = {
      {"dataset", data::to_string(data.dataset)},
      {"data_root", data.root.string()},
      {"category", data.category},
      {"resize", data.geometry.resize},
      {"crop", data.geometry.crop},
      {"toy_image_size", data.toy.image_size},
      {"toy_n_train", data.toy.n_train},
      {"toy_n_test_normal", data.toy.n_test_normal},
      {"toy_n_test_anomalous", data.toy.n_test_anomalous},
      {"toy_seed", data.toy.seed},
      {"epsilon", epsilon},
      {"noise_sigma", noise_sigma},
      {"contamination_seed", contamination().seed},
      {"texture_dir", texture_dir.string()},
      {"procedural_textures", procedural_textures},
      {"perlin_periods", blend.perlin_periods},
      {"mask_threshold", blend.binarize_threshold},
      {"beta_min", blend.beta_min},
      {"beta_max", blend.beta_max},
      {"augment_source", blend.augment_source},
      {"backbone", model.encoder.backbone},
      {"stages", model.encoder.selected_stages},
      {"finetune", model.encoder.finetune},
      {"weights", model.encoder.weights},
      {"k_fraction", model.heads.k_fraction},
      {"scorer_hidden", model.heads.scorer_hidden},
      {"decoder_width", model.heads.decoder_width},
      {"epochs", train.epochs},
      {"batch_size", train.batch_size},
      {"learning_rate", train.learning_rate},
      {"burn_in", train.burn_in},
      {"divergence", to_string(train.divergence.kind)},
      {"alpha", train.divergence.alpha},
      {"lambda", train.divergence.lambda},
      {"gamma", train.gamma},
      {"m_reference", train.m_reference},
      {"prior_mu", train.prior_mu},
      {"prior_sigma", train.prior_sigma},
      {"focal_gamma", train.focal_gamma},
      {"alternation", to_string(train.alternation)},
      {"pseudo_ratio", train.pseudo_ratio},
      {"grad_clip", train.grad_clip},
      {"seed", train.seed},
      {"variant", train.variant},
  };
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j, RunConfig base) {
  if (!j.is_object()) throw ConfigError("run config must be a key/value map");
  const auto& table = setters();
  // The variant resets loss modules, so it is applied first and other keys win.
  if (auto it = j.find("variant"); it != j.end()) {
    try {
      table.at("variant")(base, *it, "variant");
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config key 'variant': ") + e.what());
    }
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "variant") continue;
    auto setter = table.find(key);
    if (setter == table.end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      setter->second(base, value, key);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  base.model.encoder.input_resolution = base.image_size();
  return base;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) { return from_json(j, RunConfig{}); }

nlohmann::json load_structured_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  const auto ext = path.extension().string();
  try {
    if (ext == ".json") return Json::parse(in);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return yaml_to_json(YAML::Load(buffer.str()));
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const YAML::Exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunConfig toy_run_config() {
  RunConfig c;
  c.data.dataset = data::DatasetKind::toy;
  c.data.category = "toy";
  c.data.toy = data::ToySpec{};
  c.model.encoder.backbone = "resnet18_w8";
  c.model.heads.scorer_hidden = 32;
  c.model.heads.decoder_width = 16;
  c.train.epochs = 5;
  c.train.burn_in = 1;
  c.train.batch_size = 16;
  c.train.learning_rate = 1e-3;
  c.train.m_reference = 5000;
  c.model.encoder.input_resolution = c.image_size();
  return c;
}

}  // namespace adl
