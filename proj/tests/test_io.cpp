#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "jacest/io.hpp"
#include "jacest/testbed.hpp"

using namespace jacest;

namespace {

TrainedEstimator small_model() {
  const Eigen::MatrixXd X = sample_domain("F8", 120, 1);
  const Eigen::MatrixXd Y = find_function("F8").evaluate_all(X);
  EstimatorConfig cfg;
  cfg.d = 3;
  cfg.c = 2;
  cfg.layers = {7, 5};
  cfg.k_max = 6;
  cfg.r_max = kInfinity;
  cfg.epochs = 3;
  cfg.lr = 1e-3;
  cfg.max_w = 3.5;
  cfg.seed = 12345678901234ULL;
  return fit(X, Y, cfg);
}

}  // namespace

TEST(Numbers, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, -0.0}) {
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(parse_double(" +2.5 "), 2.5);
  EXPECT_THROW(parse_double("abc"), FormatError);
  EXPECT_THROW(parse_double("1.5x"), FormatError);
}

TEST(Model, SaveLoadSaveIsByteIdentical) {
  const TrainedEstimator est = small_model();
  const std::string first = model_to_string(est);
  const TrainedEstimator loaded = model_from_string(first);
  EXPECT_EQ(model_to_string(loaded), first);
  EXPECT_EQ(loaded.config, est.config);
  EXPECT_EQ(loaded.loss_trace, est.loss_trace);
  for (std::size_t l = 0; l < est.net.num_layers(); ++l) {
    EXPECT_EQ(loaded.net.params.weights[l], est.net.params.weights[l]);
    EXPECT_EQ(loaded.net.params.biases[l], est.net.params.biases[l]);
    EXPECT_EQ(loaded.net.activations[l], est.net.activations[l]);
  }
}

TEST(Model, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "jacest_test_io";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.json").string();
  const TrainedEstimator est = small_model();
  save_model(path, est);
  const TrainedEstimator loaded = load_model(path);
  save_model(path + ".2", loaded);
  EXPECT_EQ(read_file(path), read_file(path + ".2"));
  std::filesystem::remove_all(dir);
}

TEST(Model, InfiniteRadiusEncodedAsString) {
  const std::string text = model_to_string(small_model());
  EXPECT_NE(text.find("\"r_max\": \"inf\""), std::string::npos);
}

TEST(Model, RejectsMalformedDocuments) {
  EXPECT_THROW(model_from_string("{"), FormatError);
  EXPECT_THROW(model_from_string("{\"format\": \"other\", \"version\": 1}"), FormatError);
  auto j = nlohmann::ordered_json::parse(model_to_string(small_model()));
  j["layers"][0]["weights"][0].push_back(1.0);
  EXPECT_THROW(model_from_string(j.dump()), FormatError);
  auto k = nlohmann::ordered_json::parse(model_to_string(small_model()));
  k["activations"][2] = "swish";
  EXPECT_THROW(model_from_string(k.dump()), FormatError);
  EXPECT_THROW(load_model("/nonexistent/dir/model.json"), IoError);
}

TEST(Config, JsonRoundTrip) {
  EstimatorConfig c;
  c.layers = {3, 4};
  c.r_max = 0.25;
  c.seed = ~std::uint64_t{0};
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
  c.r_max = kInfinity;
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
}

TEST(Dataset, RoundTripIsExact) {
  SampleSet s;
  s.inputs = sample_domain("F9", 50, 2);
  s.outputs = find_function("F9").evaluate_all(s.inputs);
  std::stringstream ss;
  write_dataset(ss, s);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "x0,x1,x2,y0,y1,y2");
  const SampleSet back = read_dataset(ss);
  EXPECT_EQ(back.inputs, s.inputs);
  EXPECT_EQ(back.outputs, s.outputs);
  std::stringstream again;
  write_dataset(again, back);
  EXPECT_EQ(again.str(), text);
}

TEST(Dataset, MalformedRowReportsLineNumber) {
  std::stringstream ss("x0,x1,y0\n1,2,3\n4,oops,6\n");
  try {
    read_dataset(ss);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::stringstream short_row("x0,y0\n1,2\n3\n");
  try {
    read_dataset(short_row);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::stringstream bad_header("a,b\n1,2\n");
  EXPECT_THROW(read_dataset(bad_header), FormatError);
  std::stringstream nan_value("x0,y0\nnan,1\n");
  EXPECT_THROW(read_dataset(nan_value), FormatError);
}

TEST(Dataset, ToleratesCrlfAndBlankLines) {
  std::stringstream ss("x0,y0\r\n1,2\r\n\r\n3,4\r\n");
  const SampleSet s = read_dataset(ss);
  EXPECT_EQ(s.size(), 2);
  EXPECT_EQ(s.outputs(0, 1), 4.0);
}
