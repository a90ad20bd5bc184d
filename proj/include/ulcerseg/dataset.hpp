#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ulcerseg/mask_core.hpp"
#include "ulcerseg/predictor.hpp"

namespace ulcerseg {

struct DatasetRecord {
  std::string id;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> mask_path;
  int original_height = 0;
  int original_width = 0;
  ImageBuffer image;              // padded to the canvas
  std::optional<BinaryMask> gt;   // padded to the canvas
};

// Records sorted by id. canvas == 0 keeps native sizes.
struct DatasetIndex {
  int canvas = 0;
  std::vector<DatasetRecord> records;

  const DatasetRecord* find(std::string_view id) const;
  std::vector<std::string> ids() const;
  bool has_all_masks() const;
};

// Sorted stems of root/images/*.png.
std::vector<std::string> list_image_ids(const std::filesystem::path& root);

// Loads root/images/*.png and, where present, root/masks/<stem>.png, then
// zero-pads both to canvas x canvas. Throws DataError on unreadable files,
// duplicate ids, image/mask size mismatches or images larger than the canvas.
DatasetIndex ingest(const std::filesystem::path& root, int canvas, int workers = 0);

// Procedural wound-like blobs: reddish ellipses on a noisy skin-toned
// background, about 1 in 10 images without any lesion. Image i depends only
// on (seed, i).
struct SyntheticSample {
  std::string id;
  LabeledImage data;
};
std::vector<SyntheticSample> make_synthetic_blobs(std::size_t count, int size, std::uint64_t seed,
                                                  const std::string& id_prefix = "img");

// In-memory index over already-decoded samples, padded to the canvas.
DatasetIndex make_index(const std::vector<SyntheticSample>& samples, int canvas);

// Writes samples in the ingest() layout (root/images, root/masks).
void write_dataset(const std::filesystem::path& root, const std::vector<SyntheticSample>& samples);

}  // namespace ulcerseg
