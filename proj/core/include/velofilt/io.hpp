#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "velofilt/grid.hpp"

namespace velofilt::io {

// FrameStack file pair: <stem>.json header + <stem>.f32 raw little-endian floats.
void write_frame_stack(const FrameStack& frames, const std::filesystem::path& stem);
FrameStack read_frame_stack(const std::filesystem::path& stem);

void write_image(const Image& img, const std::filesystem::path& stem);
Image read_image(const std::filesystem::path& stem);

// 8-bit binary PGM, linear scaling with max -> 255 (negatives clamp to 0).
void write_pgm(const Image& img, const std::filesystem::path& path);

// Writes via a temporary sibling then renames over the target.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t file_checksum(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

}  // namespace velofilt::io
