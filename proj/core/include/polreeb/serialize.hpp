#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "polreeb/reeb_graph.hpp"

namespace polreeb {

// Binary layout: "PRBG" | u32 version | u64 payload length | payload | u32 crc32.
// All integers little-endian, doubles as IEEE-754 bit patterns.
inline constexpr std::uint32_t kGraphFormatVersion = 1;

enum class GraphFormat : std::uint8_t { kBinary, kJson };

// Throws "empty graph not serializable" for graphs without nodes.
std::vector<std::uint8_t> serialize(const ReebGraph& g);

// Throws FormatError: "corrupt payload" or "version mismatch".
ReebGraph deserialize(std::span<const std::uint8_t> bytes);

nlohmann::json to_json(const ReebGraph& g);
ReebGraph graph_from_json(const nlohmann::json& j);

void save_graph(const std::filesystem::path& path, const ReebGraph& g,
                GraphFormat format = GraphFormat::kBinary);

// Accepts either format (sniffs the magic).
ReebGraph load_graph(const std::filesystem::path& path);

}  // namespace polreeb
