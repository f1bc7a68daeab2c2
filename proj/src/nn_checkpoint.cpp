#include "qst/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace qst::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[6] = {'Q', 'S', 'T', 'N', 'N', '1'};

nlohmann::json manifest_for(const NetworkGraph& graph) {
  nlohmann::json layers = nlohmann::json::array();
  for (int i = 0; i < graph.layer_count(); ++i) {
    auto& layer = const_cast<NetworkGraph&>(graph).layer(i);
    layers.push_back({{"name", layer.name()},
                      {"params", layer.params().size()}});
  }
  nlohmann::json j;
  j["layers"] = layers;
  j["input_shape"] = graph.input_shape();
  return j;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkGraph& graph) {
  require(graph.built(), ErrorCode::InvalidArgument,
          "cannot checkpoint an unbuilt graph");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot open " + path);
  out.write(kMagic, sizeof kMagic);
  const std::string manifest = manifest_for(graph).dump();
  const std::uint32_t len = static_cast<std::uint32_t>(manifest.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(manifest.data(), manifest.size());
  for (int i = 0; i < graph.layer_count(); ++i) {
    auto p = const_cast<NetworkGraph&>(graph).layer(i).params();
    out.write(reinterpret_cast<const char*>(p.data()),
              static_cast<std::streamsize>(p.size() * sizeof(double)));
  }
  require(out.good(), ErrorCode::IoError, "write failed for " + path);
}

void load_checkpoint(const std::string& path, NetworkGraph& graph) {
  require(graph.built(), ErrorCode::InvalidArgument,
          "load_checkpoint needs a built graph");
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  char magic[6];
  in.read(magic, sizeof magic);
  require(in.good() && std::memcmp(magic, kMagic, sizeof kMagic) == 0,
          ErrorCode::IoError, path + " is not a QSTNN1 checkpoint");
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string manifest(len, '\0');
  in.read(manifest.data(), len);
  require(in.good(), ErrorCode::IoError, "truncated checkpoint manifest");
  const auto expected = manifest_for(graph).dump();
  require(manifest == expected, ErrorCode::ConfigError,
          "checkpoint manifest does not match the graph architecture");
  for (int i = 0; i < graph.layer_count(); ++i) {
    auto p = graph.layer(i).params();
    in.read(reinterpret_cast<char*>(p.data()),
            static_cast<std::streamsize>(p.size() * sizeof(double)));
  }
  require(in.good(), ErrorCode::IoError, "truncated checkpoint parameters");
}

}  // namespace qst::nn
