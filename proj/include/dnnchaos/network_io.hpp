#pragma once

// JSON network files:
//   {"d": int, "layers": [{"W": [[row-major]], "b": [...], "activation": "tanh"|"relu"|"linear"}]}

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dnnchaos/core.hpp"

namespace dnnchaos {

inline nlohmann::json network_to_json(const LayeredNetwork& net) {
  nlohmann::json j;
  j["d"] = net.dim();
  j["layers"] = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index r = 0; r < layer.dim(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < layer.dim(); ++c) row.push_back(layer.weights()(r, c));
      w.push_back(std::move(row));
    }
    nlohmann::json b = nlohmann::json::array();
    for (Eigen::Index r = 0; r < layer.dim(); ++r) b.push_back(layer.bias()[r]);
    j["layers"].push_back({{"W", std::move(w)},
                           {"b", std::move(b)},
                           {"activation", std::string(to_string(layer.activation()))}});
  }
  return j;
}

namespace detail {

inline double json_number(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

}  // namespace detail

inline LayeredNetwork network_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("network: expected a JSON object");
  if (!j.contains("d") || !j["d"].is_number_integer()) {
    throw ParseError("network.d: expected an integer");
  }
  const auto d = j["d"].get<long long>();
  if (d <= 0) throw ValidationError("network.d must be positive");
  if (!j.contains("layers") || !j["layers"].is_array()) {
    throw ParseError("network.layers: expected an array");
  }
  const auto& jl = j["layers"];
  if (jl.empty()) throw ValidationError("network.layers must not be empty");

  std::vector<AffineLayer> layers;
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const std::string at = "layers[" + std::to_string(i) + "]";
    const auto& L = jl[i];
    if (!L.is_object()) throw ParseError(at + ": expected an object");
    if (!L.contains("W") || !L["W"].is_array()) throw ParseError(at + ".W: expected an array");
    if (!L.contains("b") || !L["b"].is_array()) throw ParseError(at + ".b: expected an array");
    if (!L.contains("activation") || !L["activation"].is_string()) {
      throw ParseError(at + ".activation: expected a string");
    }
    const auto& jw = L["W"];
    const auto& jb = L["b"];
    if (static_cast<long long>(jw.size()) != d) {
      throw ValidationError(at + ".W has " + std::to_string(jw.size()) + " rows, expected " +
                            std::to_string(d));
    }
    Matrix w(d, d);
    for (std::size_t r = 0; r < jw.size(); ++r) {
      const std::string rat = at + ".W[" + std::to_string(r) + "]";
      if (!jw[r].is_array()) throw ParseError(rat + ": expected an array");
      if (static_cast<long long>(jw[r].size()) != d) {
        throw ValidationError(rat + " has " + std::to_string(jw[r].size()) +
                              " entries, expected " + std::to_string(d));
      }
      for (std::size_t c = 0; c < jw[r].size(); ++c) {
        w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            detail::json_number(jw[r][c], rat + "[" + std::to_string(c) + "]");
      }
    }
    if (static_cast<long long>(jb.size()) != d) {
      throw ValidationError(at + ".b has " + std::to_string(jb.size()) + " entries, expected " +
                            std::to_string(d));
    }
    Vector b(d);
    for (std::size_t r = 0; r < jb.size(); ++r) {
      b[static_cast<Eigen::Index>(r)] =
          detail::json_number(jb[r], at + ".b[" + std::to_string(r) + "]");
    }
    ActivationKind act;
    try {
      act = activation_from_string(L["activation"].get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError(at + ".activation: " + e.what());
    }
    try {
      layers.emplace_back(std::move(w), std::move(b), act);
    } catch (const Error& e) {
      throw ValidationError(at + ": " + e.what());
    }
  }
  return LayeredNetwork(std::move(layers));
}

inline std::string network_to_string(const LayeredNetwork& net) {
  return network_to_json(net).dump(1) + "\n";
}

inline LayeredNetwork network_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("network file: malformed JSON at byte " + std::to_string(e.byte) + ": " +
                     e.what());
  }
  return network_from_json(j);
}

inline void save_network(const LayeredNetwork& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << network_to_string(net);
  if (!out) throw Error("failed writing '" + path + "'");
}

inline LayeredNetwork load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open network file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return network_from_string(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace dnnchaos
