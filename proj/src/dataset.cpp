#include "ulcerseg/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "parallel.hpp"
#include "ulcerseg/png_io.hpp"

namespace ulcerseg {
namespace fs = std::filesystem;
namespace {

bool is_png(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png";
}

// stem -> path for every PNG in dir; throws on duplicate stems.
std::vector<std::pair<std::string, fs::path>> scan_pngs(const fs::path& dir) {
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_png(entry.path())) continue;
    out.emplace_back(entry.path().stem().string(), entry.path());
  }
  std::sort(out.begin(), out.end());
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].first == out[i - 1].first) {
      throw DataError("duplicate id '" + out[i].first + "' in " + dir.string());
    }
  }
  return out;
}

std::uint8_t noisy(Rng& rng, double base, double amplitude) {
  const double v = base + rng.uniform(-amplitude, amplitude);
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

const DatasetRecord* DatasetIndex::find(std::string_view id) const {
  const auto it = std::lower_bound(records.begin(), records.end(), id,
                                   [](const DatasetRecord& r, std::string_view v) { return r.id < v; });
  return it != records.end() && it->id == id ? &*it : nullptr;
}

std::vector<std::string> DatasetIndex::ids() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.id);
  return out;
}

bool DatasetIndex::has_all_masks() const {
  return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.gt.has_value(); });
}

std::vector<std::string> list_image_ids(const fs::path& root) {
  const fs::path images = root / "images";
  if (!fs::is_directory(images)) throw DataError("image directory not found: " + images.string());
  std::vector<std::string> ids;
  for (auto& [id, path] : scan_pngs(images)) ids.push_back(id);
  return ids;
}

DatasetIndex ingest(const fs::path& root, int canvas, int workers) {
  if (canvas < 0) throw ConfigError("canvas must be non-negative");
  const fs::path images = root / "images";
  const fs::path masks = root / "masks";
  if (!fs::is_directory(images)) throw DataError("image directory not found: " + images.string());
  const auto files = scan_pngs(images);
  std::vector<std::pair<std::string, fs::path>> mask_files;
  if (fs::is_directory(masks)) mask_files = scan_pngs(masks);

  DatasetIndex index;
  index.canvas = canvas;
  index.records.resize(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto& rec = index.records[i];
    rec.id = files[i].first;
    rec.image_path = files[i].second;
    const auto m = std::lower_bound(mask_files.begin(), mask_files.end(), rec.id,
                                    [](const auto& e, const std::string& v) { return e.first < v; });
    if (m != mask_files.end() && m->first == rec.id) rec.mask_path = m->second;
  }

  internal::parallel_for(index.records.size(), workers, [&](std::size_t i) {
    auto& rec = index.records[i];
    ImageBuffer image = read_image_png(rec.image_path);
    rec.original_height = image.height();
    rec.original_width = image.width();
    std::optional<BinaryMask> gt;
    if (rec.mask_path) {
      gt = read_mask_png(*rec.mask_path);
      if (!same_shape(*gt, image)) {
        throw DataError("id '" + rec.id + "': mask is " + std::to_string(gt->height()) + "x" +
                        std::to_string(gt->width()) + ", image is " +
                        std::to_string(image.height()) + "x" + std::to_string(image.width()));
      }
    }
    if (canvas > 0) {
      if (image.height() > canvas || image.width() > canvas) {
        throw DataError("id '" + rec.id + "': " + std::to_string(image.height()) + "x" +
                        std::to_string(image.width()) + " image exceeds the " +
                        std::to_string(canvas) + "x" + std::to_string(canvas) + " canvas");
      }
      image = zero_pad(image, canvas, canvas);
      if (gt) gt = zero_pad_mask(*gt, canvas, canvas);
    }
    rec.image = std::move(image);
    rec.gt = std::move(gt);
  });
  return index;
}

std::vector<SyntheticSample> make_synthetic_blobs(std::size_t count, int size, std::uint64_t seed,
                                                  const std::string& id_prefix) {
  if (size < 8) throw ValidationError("synthetic images must be at least 8x8");
  std::vector<SyntheticSample> out(count);
  const int digits = std::max<int>(3, static_cast<int>(std::to_string(count).size()));
  for (std::size_t n = 0; n < count; ++n) {
    Rng rng = Rng::stream(seed, n);
    std::string num = std::to_string(n);
    num.insert(0, static_cast<std::size_t>(std::max(0, digits - static_cast<int>(num.size()))), '0');

    // Skin-toned background, per-image base colour.
    const double bg_r = rng.uniform(140, 170);
    const double bg_g = rng.uniform(115, 140);
    const double bg_b = rng.uniform(95, 120);
    const double wd_r = rng.uniform(190, 230);
    const double wd_g = rng.uniform(30, 60);
    const double wd_b = rng.uniform(30, 60);

    struct Ellipse {
      double cy, cx, ry, rx, cos_a, sin_a;
    };
    std::vector<Ellipse> blobs;
    const bool empty = rng.bernoulli(0.1);
    const int n_blobs = empty ? 0 : 1 + static_cast<int>(rng.below(2));
    for (int b = 0; b < n_blobs; ++b) {
      const double ry = rng.uniform(size / 10.0, size / 4.0);
      const double rx = rng.uniform(size / 10.0, size / 4.0);
      const double cy = rng.uniform(ry, size - ry);
      const double cx = rng.uniform(rx, size - rx);
      const double angle = rng.uniform(0.0, std::numbers::pi);
      blobs.push_back({cy, cx, ry, rx, std::cos(angle), std::sin(angle)});
    }

    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(size) * size * 3);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(size) * size);
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        bool inside = false;
        for (const auto& e : blobs) {
          const double dy = r + 0.5 - e.cy;
          const double dx = c + 0.5 - e.cx;
          const double u = (dx * e.cos_a + dy * e.sin_a) / e.rx;
          const double v = (-dx * e.sin_a + dy * e.cos_a) / e.ry;
          inside = inside || (u * u + v * v <= 1.0);
        }
        const std::size_t i = static_cast<std::size_t>(r) * size + c;
        mask[i] = inside ? 1 : 0;
        pixels[3 * i] = noisy(rng, inside ? wd_r : bg_r, 12);
        pixels[3 * i + 1] = noisy(rng, inside ? wd_g : bg_g, 12);
        pixels[3 * i + 2] = noisy(rng, inside ? wd_b : bg_b, 12);
      }
    }
    out[n].id = id_prefix + num;
    out[n].data.image = ImageBuffer(size, size, std::move(pixels));
    out[n].data.mask = BinaryMask(size, size, std::move(mask));
  }
  return out;
}

DatasetIndex make_index(const std::vector<SyntheticSample>& samples, int canvas) {
  DatasetIndex index;
  index.canvas = canvas;
  for (const auto& s : samples) {
    DatasetRecord rec;
    rec.id = s.id;
    rec.original_height = s.data.image.height();
    rec.original_width = s.data.image.width();
    rec.image = canvas > 0 ? zero_pad(s.data.image, canvas, canvas) : s.data.image;
    rec.gt = canvas > 0 ? zero_pad_mask(s.data.mask, canvas, canvas) : s.data.mask;
    index.records.push_back(std::move(rec));
  }
  std::sort(index.records.begin(), index.records.end(),
            [](const DatasetRecord& a, const DatasetRecord& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < index.records.size(); ++i) {
    if (index.records[i].id == index.records[i - 1].id) {
      throw DataError("duplicate id '" + index.records[i].id + "'");
    }
  }
  return index;
}

void write_dataset(const fs::path& root, const std::vector<SyntheticSample>& samples) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  for (const auto& s : samples) {
    write_image_png(root / "images" / (s.id + ".png"), s.data.image);
    write_mask_png(root / "masks" / (s.id + ".png"), s.data.mask);
  }
}

}  // namespace ulcerseg
