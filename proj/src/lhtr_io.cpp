#include <string>

#include "tailrep/error.hpp"
#include "tailrep/json_io.hpp"

namespace tailrep::lhtr {
namespace {

constexpr int kBundleVersion = 1;

std::string mode_name(HeadMode m) { return m == HeadMode::kSingleHead ? "single-head" : "two-head"; }

HeadMode mode_from_name(const std::string& s) {
  if (s == "two-head") return HeadMode::kTwoHead;
  if (s == "single-head") return HeadMode::kSingleHead;
  throw ParseError("unknown head mode '" + s + "'", 0);
}

}  // namespace

OrderedJson config_to_json(const LhtrConfig& c) {
  OrderedJson j;
  j["kappa"] = c.kappa;
  j["rho_ext"] = c.rho_ext ? OrderedJson(*c.rho_ext) : OrderedJson(nullptr);
  j["rho_bulk"] = c.rho_bulk ? OrderedJson(*c.rho_bulk) : OrderedJson(nullptr);
  j["rho_adv"] = c.rho_adv;
  j["target"] = {{"dimension", c.target.dimension}, {"dependence", c.target.dependence}};
  j["encoder_sizes"] = c.encoder_sizes;
  j["classifier_sizes"] = c.classifier_sizes;
  j["discriminator_sizes"] = c.discriminator_sizes;
  j["dropout"] = c.dropout;
  j["optim"] = nn::optim_to_json(c.optim);
  j["mode"] = mode_name(c.mode);
  return j;
}

LhtrConfig config_from_json(const Json& j, std::size_t input_dim) {
  try {
    const HeadMode mode = j.contains("mode") ? mode_from_name(j["mode"].get<std::string>()) : HeadMode::kTwoHead;
    const std::string preset = j.value("preset", std::string("toy"));
    LhtrConfig c;
    if (preset == "toy") {
      c = LhtrConfig::toy();
      c.mode = mode;
    } else if (preset == "small") {
      c = LhtrConfig::small(input_dim, mode);
    } else if (preset == "large") {
      c = LhtrConfig::large(input_dim, mode);
    } else {
      throw ParseError("unknown preset '" + preset + "'", 0);
    }
    c.kappa = j.value("kappa", c.kappa);
    if (j.contains("rho_ext")) {
      c.rho_ext = j["rho_ext"].is_null() ? std::nullopt : std::optional<double>(j["rho_ext"].get<double>());
    }
    if (j.contains("rho_bulk")) {
      c.rho_bulk = j["rho_bulk"].is_null() ? std::nullopt : std::optional<double>(j["rho_bulk"].get<double>());
    }
    c.rho_adv = j.value("rho_adv", c.rho_adv);
    if (j.contains("target")) {
      c.target.dimension = j["target"].value("dimension", c.target.dimension);
      c.target.dependence = j["target"].value("dependence", c.target.dependence);
    }
    if (j.contains("encoder_sizes")) c.encoder_sizes = j["encoder_sizes"].get<std::vector<std::size_t>>();
    if (j.contains("classifier_sizes")) c.classifier_sizes = j["classifier_sizes"].get<std::vector<std::size_t>>();
    if (j.contains("discriminator_sizes")) {
      c.discriminator_sizes = j["discriminator_sizes"].get<std::vector<std::size_t>>();
    }
    c.dropout = j.value("dropout", c.dropout);
    if (j.contains("optim")) c.optim = nn::optim_from_json(j["optim"], c.optim);
    if (input_dim > 0) c.encoder_sizes.front() = input_dim;
    return c;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed LHTR config: ") + e.what(), 0);
  }
}

std::string model_to_json_string(const LhtrModel& model) {
  OrderedJson j;
  j["format"] = "tailrep.lhtr";
  j["version"] = kBundleVersion;
  j["config"] = config_to_json(model.config);
  j["threshold"] = {{"t", model.threshold.t}, {"k", model.threshold.k}, {"kappa", model.threshold.kappa}};
  j["weights"] = {{"rho_ext", model.weights.ext}, {"rho_bulk", model.weights.bulk}};
  j["encoder"] = nn::mlp_to_json(model.encoder);
  j["ext"] = nn::mlp_to_json(model.ext);
  j["bulk"] = nn::mlp_to_json(model.bulk);
  j["discriminator"] = nn::mlp_to_json(model.discriminator);
  return j.dump(1) + "\n";
}

LhtrModel model_from_json_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
  }
  try {
    if (j.at("format").get<std::string>() != "tailrep.lhtr") throw ParseError("not an LHTR model bundle", 0);
    if (j.at("version").get<int>() != kBundleVersion) throw ParseError("unsupported bundle version", 0);
    LhtrModel m;
    m.encoder = nn::mlp_from_json(j.at("encoder"));
    m.ext = nn::mlp_from_json(j.at("ext"));
    m.bulk = nn::mlp_from_json(j.at("bulk"));
    m.discriminator = nn::mlp_from_json(j.at("discriminator"));
    m.config = config_from_json(j.at("config"), m.encoder.input_dim());
    const auto& th = j.at("threshold");
    m.threshold = {th.at("t").get<double>(), th.at("k").get<std::size_t>(), th.at("kappa").get<double>()};
    m.weights = {j.at("weights").at("rho_ext").get<double>(), j.at("weights").at("rho_bulk").get<double>()};
    m.config.validate();
    return m;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed LHTR model bundle: ") + e.what(), 0);
  }
}

void save_model(const LhtrModel& model, const std::string& path) {
  write_text_file(path, model_to_json_string(model));
}

LhtrModel load_model(const std::string& path) { return model_from_json_string(read_text_file(path)); }

}  // namespace tailrep::lhtr
