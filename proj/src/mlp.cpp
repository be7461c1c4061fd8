#include "hyper/mlp.hpp"

#include <cmath>

#include <json.hpp>

#include "hyper/errors.hpp"

namespace hyper {

Mlp::Mlp(std::vector<int> sizes, ParamId first_id, std::mt19937_64& rng)
    : sizes_(std::move(sizes)), first_id_(first_id) {
  if (sizes_.size() < 2) throw ConfigError("network needs an input and an output size");
  for (int s : sizes_)
    if (s < 1) throw ConfigError("layer sizes must be positive");
  for (int l = 0; l < layers(); ++l) {
    const auto in = static_cast<std::size_t>(sizes_[static_cast<std::size_t>(l)]);
    const auto out = static_cast<std::size_t>(sizes_[static_cast<std::size_t>(l) + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Tensor w({out, in});
    for (double& v : w.values()) v = u(rng);
    params_[first_id_ + 2 * static_cast<std::size_t>(l)] = std::move(w);
    params_[first_id_ + 2 * static_cast<std::size_t>(l) + 1] = Tensor({out});
  }
}

Var Mlp::forward(Tape& tape, Var x, int upto, bool relu_last) const {
  if (upto < 0) upto = layers();
  if (upto < 1 || upto > layers()) throw ContractError("layer index outside the network");
  Var h = x;
  for (int l = 0; l < upto; ++l) {
    const ParamId w = first_id_ + 2 * static_cast<std::size_t>(l);
    h = add_bias(matmul_nt(h, tape.parameter(w, params_.at(w))), tape.parameter(w + 1, params_.at(w + 1)));
    if (l + 1 < layers() || relu_last) h = relu(h);
  }
  return h;
}

Tensor Mlp::forward(const Tensor& x, int upto, bool relu_last) const {
  Tape tape;
  return forward(tape, tape.constant(x), upto, relu_last).value();
}

std::string Mlp::serialize() const {
  nlohmann::json j;
  j["sizes"] = sizes_;
  j["first_id"] = first_id_;
  auto& p = j["params"] = nlohmann::json::array();
  for (const auto& [id, t] : params_)
    p.push_back({{"id", id}, {"shape", t.shape()}, {"data", std::vector<double>(t.values().begin(), t.values().end())}});
  return j.dump();
}

Mlp Mlp::deserialize(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Mlp m;
    m.sizes_ = j.at("sizes").get<std::vector<int>>();
    m.first_id_ = j.at("first_id").get<ParamId>();
    for (const auto& p : j.at("params"))
      m.params_[p.at("id").get<ParamId>()] =
          Tensor(p.at("shape").get<std::vector<std::size_t>>(), p.at("data").get<std::vector<double>>());
    if (m.params_.size() != 2 * static_cast<std::size_t>(m.layers())) throw ParseError("network parameter count mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network record: ") + e.what());
  }
}

}  // namespace hyper
