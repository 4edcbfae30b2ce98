#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "sigbench/signature.hpp"
#include "sigbench/tarnn.hpp"
#include "sigbench/util.hpp"

namespace sigbench::testing {

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Valid signature of n samples: random walk, 100 Hz, a few pen lifts.
Signature random_signature(Rng& rng, std::size_t n, WritingInput input = WritingInput::Stylus);

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0);

/// Small network with every coordinate (biases included) drawn uniformly
/// from [-scale, scale].
tarnn::TaRnnParams random_params(const tarnn::Architecture& arch, std::uint64_t seed,
                                 double scale = 0.5);

tarnn::Architecture tiny_architecture();

}  // namespace sigbench::testing
