#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace faultbin {

class LearnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for missing or unreadable dataset files.
class DatasetError : public LearnError {
 public:
  using LearnError::LearnError;
};

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Images flattened row-major into [0, 1] floats, one sample per row.
struct Dataset {
  int height = 0;
  int width = 0;
  RowMatrixF images;
  std::vector<std::uint8_t> labels;

  int size() const { return static_cast<int>(labels.size()); }
  Dataset slice(int begin, int end) const;
};

/// Reads an IDX image/label file pair; gzip-compressed files are accepted.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

struct Mnist {
  Dataset train;
  Dataset test;
};

/// Loads the four standard MNIST files from a directory, with or without a
/// .gz suffix.
Mnist load_mnist(const std::string& dir);

/// Dataset root from FAULTBIN_MNIST_DIR, or empty.
std::string mnist_dir_from_env();

}  // namespace faultbin
