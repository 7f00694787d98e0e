#pragma once

#include "engram/memory_graph.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace engram {

// Binary snapshot layout (all integers and floats little-endian):
//
//   magic        8 bytes  "ENGRAMGR"
//   version      u32      snapshot_version
//   text_dim     u32
//   face_dim     u32
//   voice_dim    u32
//   snapshot_cap u32
//   next_text    u64, next_face u64, next_voice u64
//   node_count   u64, then per node:
//       kind u8 | ordinal u64 | weight i64 | text str | vec_count u32 | vec_count * dim f32
//       | extra_count u32 | extra_count * (key str, value str)
//   edge_count   u64, then per edge:
//       kind u8 | lo (kind u8, ordinal u64) | hi (kind u8, ordinal u64) | weight i64
//   clip_count   u64, then per clip:
//       clip_index i64 | n_episodic u32 | n * ordinal u64 | n_semantic u32 | n * ordinal u64
//   checksum     u64      FNV-1a over every preceding byte
//
// str = u32 byte length followed by the bytes. dim is chosen by node kind from the header.
inline constexpr std::uint32_t snapshot_version = 1;

std::string save_snapshot(const MemoryGraph& graph);

// Either returns a complete graph or throws Error{parse} naming the offset and field.
MemoryGraph load_snapshot(std::string_view bytes);

void save_snapshot_file(const MemoryGraph& graph, const std::filesystem::path& path);
MemoryGraph load_snapshot_file(const std::filesystem::path& path);

// Line-delimited JSON records for inspection.
std::string dump_nodes(const MemoryGraph& graph);
std::string dump_edges(const MemoryGraph& graph);
std::string dump_clips(const MemoryGraph& graph);
std::string dump_characters(const MemoryGraph& graph);

} // namespace engram
