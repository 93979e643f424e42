#include "faultbin/dataset.hpp"

#include <array>
#include <cstdlib>
#include <filesystem>

#include <zlib.h>

namespace faultbin {

namespace {

// gzread passes uncompressed files through unchanged.
std::vector<std::uint8_t> read_all(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw DatasetError("cannot open " + path);
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(f);
      throw DatasetError("read error in " + path);
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

std::string resolve(const std::string& dir, const std::string& name) {
  namespace fs = std::filesystem;
  for (const auto& candidate : {fs::path(dir) / name, fs::path(dir) / (name + ".gz")}) {
    if (fs::exists(candidate)) return candidate.string();
  }
  throw DatasetError("missing " + name + " in " + dir + " (set FAULTBIN_MNIST_DIR or pass the dataset path)");
}

}  // namespace

Dataset Dataset::slice(int begin, int end) const {
  if (begin < 0 || end > size() || begin > end) throw LearnError("dataset slice out of range");
  Dataset d;
  d.height = height;
  d.width = width;
  d.images = images.middleRows(begin, end - begin);
  d.labels.assign(labels.begin() + begin, labels.begin() + end);
  return d;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_all(images_path);
  const auto lab = read_all(labels_path);
  if (img.size() < 16 || be32(img, 0) != 0x00000803U) throw DatasetError(images_path + " is not an IDX image file");
  if (lab.size() < 8 || be32(lab, 0) != 0x00000801U) throw DatasetError(labels_path + " is not an IDX label file");
  const std::size_t n = be32(img, 4);
  const std::size_t h = be32(img, 8);
  const std::size_t w = be32(img, 12);
  if (be32(lab, 4) != n) throw DatasetError("image and label counts differ");
  if (h == 0 || w == 0 || h > 4096 || w > 4096 || img.size() != 16 + n * h * w || lab.size() != 8 + n) {
    throw DatasetError("truncated or oversized IDX payload");
  }
  Dataset d;
  d.height = static_cast<int>(h);
  d.width = static_cast<int>(w);
  d.images.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(h * w));
  const std::uint8_t* px = img.data() + 16;
  for (std::size_t i = 0; i < n * h * w; ++i) d.images.data()[i] = static_cast<float>(px[i]) / 255.0F;
  d.labels.assign(lab.begin() + 8, lab.end());
  for (auto l : d.labels) {
    if (l > 9) throw DatasetError("label out of range in " + labels_path);
  }
  return d;
}

Mnist load_mnist(const std::string& dir) {
  if (dir.empty()) throw DatasetError("no MNIST directory given (set FAULTBIN_MNIST_DIR)");
  return {load_idx(resolve(dir, "train-images-idx3-ubyte"), resolve(dir, "train-labels-idx1-ubyte")),
          load_idx(resolve(dir, "t10k-images-idx3-ubyte"), resolve(dir, "t10k-labels-idx1-ubyte"))};
}

std::string mnist_dir_from_env() {
  const char* v = std::getenv("FAULTBIN_MNIST_DIR");
  return v == nullptr ? std::string{} : std::string(v);
}

}  // namespace faultbin
