//
//   Copyright 2026 The leyolo-cpp Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
#pragma once

// JSON dump/load of ArchitectureSpec.
//
// {
//   "schema": "leyolo.architecture/1",
//   "variant": "nano", "input_channels": 3, "num_classes": 80,
//   "outputs": ["head.p3", "head.p4", "head.p5"],
//   "layers": [
//     {"id": "backbone.stem.0", "kind": "conv_bn_silu", "inputs": ["input"],
//      "level": 1, "section": "backbone", "stage": "backbone.stem",
//      "config": {"in_ch": 3, "out_ch": 16, "kernel": 3, "stride": 2, "groups": 1}},
//     ...
//   ]
// }
//
// Per-kind "config" keys:
//   conv_bn_silu         in_ch, out_ch, kernel, stride, groups
//   inverted_bottleneck  in_ch, expand_ch, out_ch, kernel, stride, use_first_pw, residual, expansion_ratio
//   upsample2x, concat   (empty object)
//   head_branch          in_ch, hidden_ch, num_classes, kernel

#include "leyolo/archspec.hpp"
#include "leyolo/error.hpp"

#include "json.hpp"

#include <string>

namespace leyolo {

inline constexpr std::string_view kArchitectureSchema = "leyolo.architecture/1";

inline nlohmann::ordered_json to_json(LayerSpec const &layer)
{
  nlohmann::ordered_json j;
  j["id"]      = layer.id;
  j["kind"]    = std::string(to_string(layer.kind()));
  j["inputs"]  = layer.inputs;
  j["level"]   = layer.level;
  j["section"] = std::string(to_string(layer.section));
  j["stage"]   = layer.stage;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  std::visit(
      [&](auto const &c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ConvLayerConfig>)
        {
          cfg["in_ch"]  = c.in_ch;
          cfg["out_ch"] = c.out_ch;
          cfg["kernel"] = c.kernel;
          cfg["stride"] = c.stride;
          cfg["groups"] = c.groups;
        }
        else if constexpr (std::is_same_v<T, BottleneckConfig>)
        {
          cfg["in_ch"]           = c.in_ch;
          cfg["expand_ch"]       = c.expand_ch;
          cfg["out_ch"]          = c.out_ch;
          cfg["kernel"]          = c.kernel;
          cfg["stride"]          = c.stride;
          cfg["use_first_pw"]    = c.use_first_pw;
          cfg["residual"]        = c.residual;
          cfg["expansion_ratio"] = layer.expansion_ratio;
        }
        else if constexpr (std::is_same_v<T, HeadConfig>)
        {
          cfg["in_ch"]       = c.in_ch;
          cfg["hidden_ch"]   = c.hidden_ch;
          cfg["num_classes"] = c.num_classes;
          cfg["kernel"]      = c.kernel;
        }
      },
      layer.config);
  j["config"] = std::move(cfg);
  return j;
}

inline nlohmann::ordered_json to_json(ArchitectureSpec const &spec)
{
  nlohmann::ordered_json j;
  j["schema"]         = std::string(kArchitectureSchema);
  j["variant"]        = spec.variant;
  j["input_channels"] = spec.input_channels;
  j["num_classes"]    = spec.num_classes;
  j["outputs"]        = spec.outputs;
  j["layers"]         = nlohmann::ordered_json::array();
  for (auto const &layer : spec.layers)
  {
    j["layers"].push_back(to_json(layer));
  }
  return j;
}

namespace detail {

template <typename Json>
Section section_from(Json const &j)
{
  auto const s = j.template get<std::string>();
  for (auto sec : {Section::backbone, Section::neck, Section::head})
  {
    if (to_string(sec) == s)
    {
      return sec;
    }
  }
  throw FormatError(FormatError::Kind::bad_schema, "unknown section '" + s + "'");
}

}  // namespace detail

template <typename Json>
ArchitectureSpec architecture_from_json(Json const &j)
{
  try
  {
    if (j.at("schema").template get<std::string>() != kArchitectureSchema)
    {
      throw FormatError(FormatError::Kind::bad_schema, "unsupported architecture schema");
    }
    ArchitectureSpec spec;
    spec.variant        = j.at("variant").template get<std::string>();
    spec.input_channels = j.at("input_channels").template get<std::size_t>();
    spec.num_classes    = j.at("num_classes").template get<std::size_t>();
    spec.outputs        = j.at("outputs").template get<std::vector<std::string>>();
    for (auto const &lj : j.at("layers"))
    {
      LayerSpec layer;
      layer.id          = lj.at("id").template get<std::string>();
      layer.inputs      = lj.at("inputs").template get<std::vector<std::string>>();
      layer.level       = lj.at("level").template get<int>();
      layer.section     = detail::section_from(lj.at("section"));
      layer.stage       = lj.value("stage", std::string{});
      auto const &cfg   = lj.at("config");
      auto const  kind  = lj.at("kind").template get<std::string>();
      auto        count = [&](char const *key) { return cfg.at(key).template get<std::size_t>(); };
      if (kind == "conv_bn_silu")
      {
        layer.config = ConvLayerConfig{count("in_ch"), count("out_ch"), count("kernel"), count("stride"),
                                       count("groups")};
      }
      else if (kind == "inverted_bottleneck")
      {
        layer.config = BottleneckConfig{count("in_ch"),
                                        count("expand_ch"),
                                        count("out_ch"),
                                        count("kernel"),
                                        count("stride"),
                                        cfg.at("use_first_pw").template get<bool>(),
                                        cfg.at("residual").template get<bool>()};
        layer.expansion_ratio = cfg.value("expansion_ratio", std::size_t{0});
      }
      else if (kind == "upsample2x")
      {
        layer.config = UpsampleConfig{};
      }
      else if (kind == "concat")
      {
        layer.config = ConcatConfig{};
      }
      else if (kind == "head_branch")
      {
        layer.config = HeadConfig{count("in_ch"), count("hidden_ch"), count("num_classes"), count("kernel")};
      }
      else
      {
        throw FormatError(FormatError::Kind::bad_schema, "layer '" + layer.id + "': unknown kind '" + kind + "'");
      }
      spec.layers.push_back(std::move(layer));
    }
    return spec;
  }
  catch (nlohmann::json::exception const &e)
  {
    throw FormatError(FormatError::Kind::bad_schema, std::string("architecture JSON: ") + e.what());
  }
}

inline ArchitectureSpec architecture_from_json_text(std::string const &text)
{
  try
  {
    return architecture_from_json(nlohmann::ordered_json::parse(text));
  }
  catch (nlohmann::json::parse_error const &e)
  {
    throw FormatError(FormatError::Kind::bad_schema, std::string("architecture JSON: ") + e.what());
  }
}

}  // namespace leyolo
