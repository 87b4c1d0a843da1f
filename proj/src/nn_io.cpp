#include <fstream>
#include <sstream>

#include "tailrep/error.hpp"
#include "tailrep/json_io.hpp"

namespace tailrep {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace nn {
namespace {

constexpr int kMlpVersion = 1;

std::string head_name(Head h) { return h == Head::kSigmoid ? "sigmoid" : "identity"; }

Head head_from_name(const std::string& s) {
  if (s == "sigmoid") return Head::kSigmoid;
  if (s == "identity") return Head::kIdentity;
  throw ParseError("unknown head '" + s + "'", 0);
}

}  // namespace

OrderedJson mlp_to_json(const Mlp& net) {
  OrderedJson j;
  j["format"] = "tailrep.mlp";
  j["version"] = kMlpVersion;
  j["sizes"] = net.sizes();
  j["head"] = head_name(net.head());
  j["dropout"] = net.dropout();
  OrderedJson layers = OrderedJson::array();
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto w = net.weight(l);
    const auto b = net.bias(l);
    layers.push_back({{"weight", std::vector<double>(w.begin(), w.end())},
                      {"bias", std::vector<double>(b.begin(), b.end())}});
  }
  j["layers"] = std::move(layers);
  return j;
}

Mlp mlp_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != "tailrep.mlp") throw ParseError("not an Mlp document", 0);
    if (j.at("version").get<int>() != kMlpVersion) throw ParseError("unsupported Mlp version", 0);
    auto sizes = j.at("sizes").get<std::vector<std::size_t>>();
    const auto& layers = j.at("layers");
    if (sizes.size() < 2 || layers.size() != sizes.size() - 1) throw ParseError("layer list does not match sizes", 0);
    std::vector<double> params;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto w = layers[l].at("weight").get<std::vector<double>>();
      const auto b = layers[l].at("bias").get<std::vector<double>>();
      if (w.size() != sizes[l] * sizes[l + 1] || b.size() != sizes[l + 1]) {
        throw ParseError("layer " + std::to_string(l) + " has the wrong shape", 0);
      }
      params.insert(params.end(), w.begin(), w.end());
      params.insert(params.end(), b.begin(), b.end());
    }
    return Mlp(std::move(sizes), head_from_name(j.at("head").get<std::string>()), j.at("dropout").get<double>(),
               std::move(params));
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed Mlp document: ") + e.what(), 0);
  }
}

OrderedJson optim_to_json(const OptimConfig& c) {
  return {{"optimizer", c.kind == OptimizerKind::kSgd ? "sgd" : "adamw"},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon}};
}

OptimConfig optim_from_json(const Json& j, OptimConfig c) {
  if (j.contains("optimizer")) {
    const auto name = j["optimizer"].get<std::string>();
    if (name == "sgd") {
      c.kind = OptimizerKind::kSgd;
    } else if (name == "adamw") {
      c.kind = OptimizerKind::kAdamW;
    } else {
      throw ParseError("unknown optimizer '" + name + "'", 0);
    }
  }
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.validate();
  return c;
}

std::string mlp_to_json_string(const Mlp& net) { return mlp_to_json(net).dump(1) + "\n"; }

Mlp mlp_from_json_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
  }
  return mlp_from_json(j);
}

void save_mlp(const Mlp& net, const std::string& path) { write_text_file(path, mlp_to_json_string(net)); }

Mlp load_mlp(const std::string& path) { return mlp_from_json_string(read_text_file(path)); }

}  // namespace nn
}  // namespace tailrep
