#include "hyper/hypernet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "hyper/errors.hpp"

namespace hyper {

namespace {

enum : ParamId { kW1 = 0, kB1, kW2, kB2, kW3, kB3 };

Tensor uniform_tensor(std::vector<std::size_t> shape, double limit, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

Tensor positional_encode(std::span<const int> lambda_arch, int d_pe) {
  if (d_pe < 2 || d_pe % 2 != 0) throw ConfigError("positional encoding size must be even and >= 2");
  const auto D = lambda_arch.size();
  const auto P = static_cast<std::size_t>(d_pe);
  Tensor out({D, P});
  for (std::size_t r = 0; r < D; ++r) {
    const double v = lambda_arch[r];
    for (std::size_t i = 0; i < P / 2; ++i) {
      const double freq = std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(d_pe));
      out[r * P + 2 * i] = std::sin(v / freq);
      out[r * P + 2 * i + 1] = std::cos(v / freq);
    }
  }
  return out;
}

void HyperNetConfig::validate() const {
  if (max_depth < 1 || max_width < 1) throw ConfigError("hypernetwork needs a positive depth and width");
  if (hidden < 1) throw ConfigError("hypernetwork hidden size must be positive");
  if (d_pe < 2 || d_pe % 2 != 0) throw ConfigError("positional encoding size must be even and >= 2");
  if (!(log_wd_max > log_wd_min)) throw ConfigError("weight-decay scaling range is empty");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("hypernetwork dropout outside [0, 1)");
}

HyperNet::HyperNet(HyperNetConfig config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  const auto in = static_cast<std::size_t>(config_.input_dim());
  const auto H = static_cast<std::size_t>(config_.hidden);
  const auto out = config_.output_dim();
  const auto D = static_cast<std::size_t>(config_.max_depth);
  const auto W = static_cast<std::size_t>(config_.max_width);

  params_[kW1] = uniform_tensor({H, in}, std::sqrt(6.0 / static_cast<double>(in)), rng);
  params_[kB1] = Tensor({H});
  params_[kW2] = uniform_tensor({H, H}, std::sqrt(6.0 / static_cast<double>(H)), rng);
  params_[kB2] = Tensor({H});

  // The output bias carries Glorot-sized detector weights for the full W x W
  // blocks; the output matrix starts small so every configuration begins near
  // that draw and the dependence on the configuration is learned.
  const double glorot = std::sqrt(3.0 / static_cast<double>(W));
  params_[kW3] = uniform_tensor({out, H}, 0.5 * glorot / std::sqrt(static_cast<double>(H)), rng);
  Tensor b3({out});
  std::uniform_real_distribution<double> u(-glorot, glorot);
  for (std::size_t i = 0; i < D * W * W; ++i) b3[i] = u(rng);
  params_[kB3] = std::move(b3);
}

Tensor HyperNet::encode(const HpConfig& hp) const {
  if (hp.widths.empty() || hp.widths.back() != config_.max_width) {
    throw DimensionError("configuration widths do not end at the detector width " +
                         std::to_string(config_.max_width));
  }
  const auto arch = hp.lambda_arch(config_.max_depth);
  const Tensor pe = positional_encode(arch, config_.d_pe);
  Tensor row({1, static_cast<std::size_t>(config_.input_dim())});
  row[0] = hp.dropout;
  row[1] = (hp.log_weight_decay() - config_.log_wd_min) / (config_.log_wd_max - config_.log_wd_min);
  std::copy(pe.values().begin(), pe.values().end(), row.data() + 2);
  return row;
}

Var HyperNet::forward(Tape& tape, std::span<const HpConfig> batch, Mode mode,
                      std::mt19937_64* hn_rng) const {
  if (batch.empty()) throw ContractError("hypernetwork batch is empty");
  const auto in = static_cast<std::size_t>(config_.input_dim());
  Tensor inputs({batch.size(), in});
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Tensor row = encode(batch[j]);
    std::copy(row.values().begin(), row.values().end(), inputs.data() + j * in);
  }
  const bool drop = mode == Mode::train && config_.dropout > 0.0;
  if (drop && hn_rng == nullptr) throw ContractError("train-mode dropout needs a random stream");

  Var h = tape.constant(std::move(inputs));
  h = relu(add_bias(matmul_nt(h, tape.parameter(kW1, params_.at(kW1))), tape.parameter(kB1, params_.at(kB1))));
  if (drop) h = dropout(h, config_.dropout, *hn_rng);
  h = relu(add_bias(matmul_nt(h, tape.parameter(kW2, params_.at(kW2))), tape.parameter(kB2, params_.at(kB2))));
  if (drop) h = dropout(h, config_.dropout, *hn_rng);
  return add_bias(matmul_nt(h, tape.parameter(kW3, params_.at(kW3))), tape.parameter(kB3, params_.at(kB3)));
}

ArchMask HyperNet::mask_for(const HpConfig& hp) const {
  return build_arch_mask(hp.lambda_arch(config_.max_depth), config_.max_depth, config_.max_width);
}

std::pair<Tensor, Tensor> HyperNet::generate(const HpConfig& hp) const {
  Tape tape;
  const HpConfig one[] = {hp};
  const Tensor out = forward(tape, one, Mode::eval, nullptr).value();
  const auto D = static_cast<std::size_t>(config_.max_depth);
  const auto W = static_cast<std::size_t>(config_.max_width);
  const auto split = out.values().begin() + static_cast<std::ptrdiff_t>(D * W * W);
  return {Tensor({D, W, W}, std::vector<double>(out.values().begin(), split)),
          Tensor({D, W}, std::vector<double>(split, out.values().end()))};
}

MaskedWeights HyperNet::masked(const HpConfig& hp) const {
  auto [w, b] = generate(hp);
  return MaskedWeights(std::move(w), std::move(b), mask_for(hp));
}

std::string HyperNet::checkpoint() const {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["max_depth"] = config_.max_depth;
  j["max_width"] = config_.max_width;
  j["hidden"] = config_.hidden;
  j["d_pe"] = config_.d_pe;
  j["log_wd_min"] = config_.log_wd_min;
  j["log_wd_max"] = config_.log_wd_max;
  j["dropout"] = config_.dropout;
  j["grid_digest"] = config_.grid_digest;
  auto& params = j["params"] = nlohmann::json::array();
  for (const auto& [id, t] : params_) {
    params.push_back({{"id", id}, {"shape", t.shape()}, {"data", std::vector<double>(t.values().begin(), t.values().end())}});
  }
  return j.dump();
}

HyperNet HyperNet::from_checkpoint(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("hypernetwork checkpoint: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw VersionError("hypernetwork checkpoint version " + j.at("version").dump() +
                         ", expected " + std::to_string(kCheckpointVersion));
    }
    HyperNet net;
    net.config_.max_depth = j.at("max_depth").get<int>();
    net.config_.max_width = j.at("max_width").get<int>();
    net.config_.hidden = j.at("hidden").get<int>();
    net.config_.d_pe = j.at("d_pe").get<int>();
    net.config_.log_wd_min = j.at("log_wd_min").get<double>();
    net.config_.log_wd_max = j.at("log_wd_max").get<double>();
    net.config_.dropout = j.at("dropout").get<double>();
    net.config_.grid_digest = j.at("grid_digest").get<std::uint64_t>();
    net.config_.validate();
    for (const auto& p : j.at("params")) {
      Tensor t(p.at("shape").get<std::vector<std::size_t>>(), p.at("data").get<std::vector<double>>());
      net.params_[p.at("id").get<ParamId>()] = std::move(t);
    }
    // Shapes must agree with a freshly built network of the same configuration.
    const auto in = static_cast<std::size_t>(net.config_.input_dim());
    const auto H = static_cast<std::size_t>(net.config_.hidden);
    const std::map<ParamId, std::vector<std::size_t>> expected{
        {kW1, {H, in}}, {kB1, {H}}, {kW2, {H, H}}, {kB2, {H}},
        {kW3, {net.config_.output_dim(), H}}, {kB3, {net.config_.output_dim()}}};
    if (net.params_.size() != expected.size()) throw DimensionError("checkpoint parameter count mismatch");
    for (const auto& [id, shape] : expected) {
      if (!net.params_.count(id) || net.params_.at(id).shape() != shape) {
        throw DimensionError("checkpoint parameter " + std::to_string(id) + " has the wrong shape");
      }
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("hypernetwork checkpoint: ") + e.what());
  }
}

Var hn_loss_batch(Tape& tape, const HyperNet& net, std::span<const HpConfig> batch, const Tensor& x,
                  Mode mode, std::mt19937_64& rng) {
  Var out = net.forward(tape, batch, mode, &rng);
  Var xv = tape.constant(x);
  Var total;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    std::mt19937_64 drop_rng(rng());
    const ArchMask mask = net.mask_for(batch[j]);
    const auto layers = masked_layers(out, j, mask);
    Var recon = forward_masked(xv, layers, mask, batch[j].dropout, mode, &drop_rng);
    Var loss = train_loss(xv, recon, layers, mask, batch[j].weight_decay);
    total = total.valid() ? add(total, loss) : loss;
  }
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

double hn_eval_loss(const HyperNet& net, std::span<const HpConfig> configs, const Tensor& x) {
  Tape tape;
  std::mt19937_64 unused(0);
  return hn_loss_batch(tape, net, configs, x, Mode::eval, unused).value()[0];
}

double HnTrainer::step(std::span<const HpConfig> configs, const Tensor& x_batch, std::mt19937_64& rng) {
  Tape tape;
  Var loss = hn_loss_batch(tape, *net_, configs, x_batch, Mode::train, rng);
  const Gradients grads = tape.backward(loss);
  if (adam_) {
    adam_opt_.step(net_->params(), grads);
  } else {
    sgd_.step(net_->params(), grads);
  }
  return loss.value()[0];
}

Schedule::Schedule(std::vector<SchedulePhase> phases) : phases_(std::move(phases)) {
  if (phases_.empty()) throw ConfigError("schedule has no phases");
  if (phases_.front().epoch_start != 0) throw ConfigError("first schedule phase must start at epoch 0");
  for (std::size_t i = 0; i < phases_.size(); ++i) {
    auto& depths = phases_[i].depths;
    if (depths.empty()) throw ConfigError("schedule phase admits no depth");
    std::sort(depths.begin(), depths.end());
    depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
    if (i == 0) continue;
    const auto& prev = phases_[i - 1];
    if (phases_[i].epoch_start <= prev.epoch_start) throw ConfigError("schedule phases must start in increasing order");
    if (!std::includes(depths.begin(), depths.end(), prev.depths.begin(), prev.depths.end())) {
      throw ConfigError("a schedule phase dropped a depth admitted earlier");
    }
  }
}

Schedule Schedule::deep_first(std::vector<int> depths, int epochs) {
  if (depths.empty()) throw ConfigError("schedule needs at least one depth");
  std::sort(depths.begin(), depths.end(), std::greater<>());
  const int k = static_cast<int>(depths.size());
  std::vector<SchedulePhase> phases;
  for (int i = 0; i < k; ++i) {
    SchedulePhase phase{i * std::max(epochs, 0) / k,
                        std::vector<int>(depths.begin(), depths.begin() + i + 1)};
    if (!phases.empty() && phases.back().epoch_start == phase.epoch_start) {
      phases.back() = std::move(phase);
    } else {
      phases.push_back(std::move(phase));
    }
  }
  return Schedule(std::move(phases));
}

const std::vector<int>& Schedule::admitted(int epoch) const {
  if (phases_.empty()) throw ContractError("empty schedule");
  const SchedulePhase* current = &phases_.front();
  for (const auto& p : phases_)
    if (p.epoch_start <= epoch) current = &p;
  return current->depths;
}

int Schedule::admission_epoch(int depth) const {
  for (const auto& p : phases_)
    if (std::binary_search(p.depths.begin(), p.depths.end(), depth)) return p.epoch_start;
  return -1;
}

std::vector<HnEpochRecord> hn_train_scheduled(const HpGrid& grid, const Tensor& x, int epochs,
                                              const Schedule& schedule, HyperNet& net,
                                              const HnTrainOptions& options, std::mt19937_64& rng,
                                              const HnEpochCallback& on_epoch) {
  const std::size_t n = x.rows(), f = x.cols();
  if (n == 0) throw ContractError("no training samples");
  if (static_cast<int>(f) != net.config().max_width) {
    throw DimensionError("data has " + std::to_string(f) + " features, hypernetwork expects " +
                         std::to_string(net.config().max_width));
  }
  HnTrainer trainer(net, options);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, std::min(options.batch_samples, n));
  const std::size_t per_step = std::max<std::size_t>(1, options.configs_per_step);

  std::vector<HnEpochRecord> trace;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (on_epoch) on_epoch(epoch, net);
    const auto& depths = schedule.admitted(epoch);
    std::vector<const HpConfig*> pool;
    for (const auto& c : grid.configs())
      if (std::binary_search(depths.begin(), depths.end(), c.n_layers)) pool.push_back(&c);
    if (pool.empty()) throw ConfigError("no grid configuration has an admitted depth");

    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    double sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      Tensor xb({end - start, f});
      for (std::size_t i = start; i < end; ++i) std::copy_n(x.data() + order[i] * f, f, xb.data() + (i - start) * f);
      std::vector<HpConfig> configs;
      configs.reserve(per_step);
      for (std::size_t k = 0; k < per_step; ++k) configs.push_back(*pool[pick(rng)]);
      sum += trainer.step(configs, xb, rng);
      ++steps;
    }
    trace.push_back({epoch, depths, sum / steps});
  }
  if (on_epoch) on_epoch(epochs, net);
  return trace;
}

}  // namespace hyper
