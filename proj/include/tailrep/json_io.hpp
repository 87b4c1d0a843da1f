#pragma once

#include <string>

#include "json.hpp"
#include "tailrep/nn.hpp"

namespace tailrep {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

namespace nn {
OrderedJson mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const Json& j);
OrderedJson optim_to_json(const OptimConfig& config);
OptimConfig optim_from_json(const Json& j, OptimConfig defaults = {});
}  // namespace nn

std::string read_text_file(const std::string& path);
/// Writes atomically enough for our purposes: truncate then write.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace tailrep

#include "tailrep/lhtr.hpp"

namespace tailrep::lhtr {
OrderedJson config_to_json(const LhtrConfig& config);
/// Overrides fields of base with the keys present in j. "preset" selects
/// the base ("toy", "small", "large") when input_dim is known.
LhtrConfig config_from_json(const Json& j, std::size_t input_dim);
}  // namespace tailrep::lhtr
