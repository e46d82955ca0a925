#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "edd/model_io.hpp"

using namespace edd;

namespace {

ModelRecord sample_record() {
  Mlp net(MlpSpec{2, {5, 3}, Activation::relu, 4, 123});
  // Values that need all 17 digits.
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1e-3);
  for (auto& [name, m] : net.params())
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += n(rng) / 3.0;
  return {net, "gaussian-over-z", {{"variance_floor", 1e-3 / 3.0}, {"base_classes", 0}}};
}

}  // namespace

TEST_CASE("model text round trip is exact") {
  const ModelRecord r = sample_record();
  std::stringstream ss;
  write_model(ss, r);
  const ModelRecord back = read_model(ss);
  CHECK(back == r);
  std::stringstream again;
  write_model(again, back);
  std::stringstream first;
  write_model(first, r);
  CHECK(again.str() == first.str());
}

TEST_CASE("model files round trip through disk") {
  const auto path = std::filesystem::temp_directory_path() / "edd_test_model_io.model";
  save_model(path, sample_record());
  CHECK(load_model(path) == sample_record());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(path), InputError);
}

TEST_CASE("malformed model files report the line") {
  auto err = [](const std::string& text) -> std::string {
    std::istringstream is(text);
    try {
      read_model(is);
    } catch (const InputError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(err("not-a-model 1\n").find("line 1") != std::string::npos);
  CHECK(err("edd-model 2\n").find("version") != std::string::npos);
  CHECK(err("edd-model 1\nhead g\nwidths 1 2\n").find("line 3") != std::string::npos);
  CHECK(err("edd-model 1\nhead g\nactivation tanh\nwidths 1 2 1\nseed 0\nparam W0 1 2\n0.5\n")
            .find("line 7") != std::string::npos);
  CHECK(err("edd-model 1\nhead g\nbogus\n").find("unknown key") != std::string::npos);
  CHECK_FALSE(err("edd-model 1\nhead g\nactivation tanh\nwidths 1 2 1\n").empty());
  // Parameter shapes must match the declared widths.
  CHECK_FALSE(err("edd-model 1\nhead g\nactivation tanh\nwidths 1 2 1\nseed 0\nparam W0 1 1\n0.5\nend\n").empty());
}
