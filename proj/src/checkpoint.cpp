#include "spikecode/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "spikecode/errors.hpp"

namespace spikecode {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "spikecode-checkpoint";
constexpr int kVersion = 1;

json config_to_json(const NetworkConfig& c) {
  return {{"depth", c.depth},
          {"channels", c.channels},
          {"kernel", c.kernel},
          {"T", c.t_count},
          {"v_th", c.lif.v_th},
          {"tau", c.lif.tau},
          {"v_reset", c.lif.v_reset},
          {"readout", std::string(to_string(c.readout))},
          {"coding", std::string(to_string(c.coding))}};
}

NetworkConfig config_from_json(const json& j) {
  NetworkConfig c;
  c.depth = j.at("depth").get<int>();
  c.channels = j.at("channels").get<int>();
  c.kernel = j.at("kernel").get<int>();
  c.t_count = j.at("T").get<std::size_t>();
  c.lif = {j.at("v_th").get<double>(), j.at("tau").get<double>(), j.at("v_reset").get<double>()};
  c.readout = parse_readout(j.at("readout").get<std::string>());
  c.coding = parse_input_coding(j.at("coding").get<std::string>());
  c.validate();
  return c;
}

}  // namespace

template <typename Scalar>
void save_checkpoint(const SpikingNetwork<Scalar>& net, const std::filesystem::path& path, const CheckpointMeta& meta) {
  json layers = json::array();
  for (const auto& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (int o = 0; o < l.out; ++o)
      for (int i = 0; i < l.in; ++i)
        for (int dy = 0; dy < l.k; ++dy)
          for (int dx = 0; dx < l.k; ++dx) w.push_back(static_cast<double>(l.at(o, i, dy, dx)));
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back({{"shape", {l.out, l.in, l.k, l.k}}, {"weights", w}, {"bias", b}});
  }
  json doc = {{"format", kFormat},
              {"version", kVersion},
              {"config", config_to_json(net.config())},
              {"meta", meta},
              {"layers", layers}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

template <typename Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != kFormat) throw IoError("not a spikecode checkpoint: " + path.string());
    if (doc.at("version").get<int>() != kVersion) throw IoError("unsupported checkpoint version");
    LoadedCheckpoint<Scalar> out{SpikingNetwork<Scalar>(config_from_json(doc.at("config"))), {}};
    if (doc.contains("meta")) out.meta = doc.at("meta").get<CheckpointMeta>();
    const auto& layers = doc.at("layers");
    if (layers.size() != out.net.layers().size()) throw IoError("checkpoint layer count does not match config");
    for (std::size_t n = 0; n < layers.size(); ++n) {
      auto& l = out.net.layers()[n];
      const auto shape = layers[n].at("shape").get<std::vector<int>>();
      if (shape != std::vector<int>{l.out, l.in, l.k, l.k}) throw IoError("checkpoint tensor shape mismatch");
      const auto w = layers[n].at("weights").get<std::vector<double>>();
      const auto b = layers[n].at("bias").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(l.weights.size()) || b.size() != static_cast<std::size_t>(l.out))
        throw IoError("checkpoint tensor size mismatch");
      std::size_t idx = 0;
      for (int o = 0; o < l.out; ++o)
        for (int i = 0; i < l.in; ++i)
          for (int dy = 0; dy < l.k; ++dy)
            for (int dx = 0; dx < l.k; ++dx) l.at(o, i, dy, dx) = static_cast<Scalar>(w[idx++]);
      for (int o = 0; o < l.out; ++o) l.bias[o] = static_cast<Scalar>(b[static_cast<std::size_t>(o)]);
    }
    if (!out.net.all_finite()) throw IoError("checkpoint holds non-finite weights");
    return out;
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError("invalid checkpoint config in " + path.string() + ": " + e.what());
  }
}

template void save_checkpoint(const SpikingNetwork<float>&, const std::filesystem::path&, const CheckpointMeta&);
template void save_checkpoint(const SpikingNetwork<double>&, const std::filesystem::path&, const CheckpointMeta&);
template LoadedCheckpoint<float> load_checkpoint(const std::filesystem::path&);
template LoadedCheckpoint<double> load_checkpoint(const std::filesystem::path&);

}  // namespace spikecode
