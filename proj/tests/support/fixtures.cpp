#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <unistd.h>

namespace sigbench::testing {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("sigbench_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Signature random_signature(Rng& rng, std::size_t n, WritingInput input) {
  Signature s;
  s.meta.subject_id = "0001";
  s.meta.writing_input = input;
  s.meta.scenario = input == WritingInput::Stylus ? Scenario::Office : Scenario::Mobile;
  double x = 1000.0, y = 1000.0;
  for (std::size_t i = 0; i < n; ++i) {
    x += rng.normal(0.0, 20.0);
    y += rng.normal(0.0, 20.0);
    s.x.push_back(std::round(x));
    s.y.push_back(std::round(y));
    const int pen = (i % 37 == 36) ? 0 : 1;
    s.pen_status.push_back(pen);
    s.pressure.push_back(input == WritingInput::Finger || pen == 0
                             ? 0.0
                             : std::round(rng.uniform(50.0, 1000.0)));
    s.timestamp.push_back(10.0 * static_cast<double>(i));
  }
  s.pen_status.front() = 1;
  return s;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal(0.0, scale);
  return m;
}

tarnn::TaRnnParams random_params(const tarnn::Architecture& arch, std::uint64_t seed,
                                 double scale) {
  tarnn::TaRnnParams p(arch);
  Rng rng(seed);
  for (double& v : p.flat()) v = rng.uniform(-scale, scale);
  p.set_seed(seed);
  return p;
}

tarnn::Architecture tiny_architecture() {
  tarnn::Architecture a;
  a.hidden1 = 4;
  a.hidden2 = 2;
  return a;
}

}  // namespace sigbench::testing
