// SPDX-License-Identifier: Apache-2.0
//
// On-disk datasets (PNG images, CSV curves, JSON manifest) and trained stacks.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ivmap/pipelines.hpp"

namespace ivmap {

inline constexpr int kDatasetVersion = 1;
inline constexpr int kStackVersion = 1;

enum class Split : std::uint8_t { train, test };

struct ManifestItem {
  int id = 0;
  Split split = Split::train;
  DeviceParams params;
  std::string image_file;  // relative to the dataset root
  std::string curve_file;
};

struct DatasetManifest {
  int version = kDatasetVersion;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  std::vector<ManifestItem> items;
};

/// Samples n_train + n_test devices, writes images/NNNNN.png,
/// curves/NNNNN.csv and manifest.json. The first n_train ids are the
/// training split. Throws IoError.
DatasetManifest generate_dataset(std::size_t n_train, std::size_t n_test, std::uint64_t seed,
                                 const std::filesystem::path& out_dir);

struct Dataset {
  DatasetManifest manifest;
  std::vector<DeviceImage> images;  // indexed like manifest.items
  std::vector<IVCurve> curves;

  std::vector<std::size_t> indices(Split s) const;
};

/// Throws CorruptDataset naming the first failing item.
Dataset load_dataset(const std::filesystem::path& dir);
DatasetManifest load_manifest(const std::filesystem::path& dir);

/// Stable 64-bit FNV-1a digest as 16 hex digits.
std::string config_digest(std::string_view canonical_text);

struct StackMeta {
  std::uint64_t seed = 0;
  std::string config_digest;
  double fwd_lambda = 0.0;
  double inv_lambda = 0.0;
};

/// Writes models/ under `dir`: four network checkpoints, two bridges and
/// stack.json. Without `opt` the checkpoints carry zeroed optimizer moments.
void save_stack(const std::filesystem::path& dir, const TrainedStack& s, const StackMeta& meta,
                const StackOptimizer* opt = nullptr);

struct LoadedStack {
  TrainedStack stack;
  StackMeta meta;
};

/// Throws VersionMismatch or CorruptCheckpoint.
LoadedStack load_stack(const std::filesystem::path& dir);

}  // namespace ivmap
