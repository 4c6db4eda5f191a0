#pragma once

#include <filesystem>

#include "dublid/network.hpp"
#include "dublid/tensor_io.hpp"

namespace dublid {

/// Named tensors "w.<l>" (C x in x 3 x 3), "b.<l>", "zeta.<l>" (1-based l),
/// "beta", "eta" and "meta" = [L, C, planes, k_h, k_w, epsilon].
NamedTensors to_named(const NetworkParams& p);
NetworkParams from_named(const NamedTensors& entries);

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& p);
NetworkParams load_checkpoint(const std::filesystem::path& path);

/// Tensors of a Learnables-shaped value under `prefix` (used for optimizer
/// moments), and the inverse given a template with the right shapes.
void append_learnables(NamedTensors& out, const std::string& prefix, const Learnables& v);
Learnables read_learnables(const NamedTensors& in, const std::string& prefix,
                           const Learnables& shape);

}  // namespace dublid
