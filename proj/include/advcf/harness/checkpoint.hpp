#pragma once

#include <filesystem>

#include <json.hpp>

#include "advcf/models/mlp.hpp"

namespace advcf::harness {

/// Network weights as `stem.bin` (little-endian float64, parameters in
/// order, row-major) plus `stem.json` with the layer widths and `meta`.
void save_weights(const std::filesystem::path& stem, const models::Mlp& net, const nlohmann::json& meta);

/// Loads weights saved by save_weights. Throws if the files are missing,
/// truncated or describe different layer widths than `expected_widths`
/// (when non-empty).
models::Mlp load_weights(const std::filesystem::path& stem, nlohmann::json* meta_out = nullptr,
                         const std::vector<std::size_t>& expected_widths = {});

}  // namespace advcf::harness
