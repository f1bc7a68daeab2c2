#pragma once

#include <string>

#include "qst/nn/graph.hpp"

namespace qst::nn {

// Checkpoint layout: magic "QSTNN1", a 4-byte little-endian manifest length,
// the JSON manifest (layer names and parameter counts), then the parameter
// blocks as little-endian 64-bit floats in layer order.
void save_checkpoint(const std::string& path, const NetworkGraph& graph);

// Loads parameters into an already-built graph; the manifest must match.
void load_checkpoint(const std::string& path, NetworkGraph& graph);

}  // namespace qst::nn
