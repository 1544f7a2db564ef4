#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "rationalift/error.h"
#include "rationalift/run_config.h"

namespace rationalift {
namespace {

KeyValues parse(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in, "test");
}

TEST(KeyValues, ParsesCommentsAndWhitespace) {
  const auto kv = parse("# a comment\n mode = rnp \n\ntrain.lr_gen=0.002  # trailing\n");
  EXPECT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("mode"), "rnp");
  EXPECT_EQ(kv.at("train.lr_gen"), "0.002");
}

TEST(KeyValues, MalformedLineThrows) {
  EXPECT_THROW(parse("no equals sign here\n"), ConfigError);
}

TEST(KeyValues, MissingFileNamesPath) {
  try {
    read_key_values("/nonexistent/dir/run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/run.cfg"), std::string::npos);
  }
}

TEST(Resolve, ModeSetsShareDepth) {
  EXPECT_EQ(resolve_config({{"mode", "rnp"}}).model.share_depth, 0);
  EXPECT_EQ(resolve_config({{"mode", "fr"}, {"model.num_layers", "3"}}).model.share_depth, 3);
  EXPECT_EQ(resolve_config({{"mode", "fr"}, {"model.num_layers", "3"}, {"model.share_depth", "1"}})
                .model.share_depth,
            1);
}

TEST(Resolve, SeedPropagates) {
  const auto c = resolve_config({{"seed", "42"}, {"train.max_len", "77"}});
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_EQ(c.skew.seed, 42u);
  EXPECT_EQ(c.skew.max_len, 77);
}

TEST(Resolve, UnknownKeyAndBadValuesThrow) {
  EXPECT_THROW(resolve_config({{"train.learning_rate", "1"}}), ConfigError);
  EXPECT_THROW(resolve_config({{"train.lr_gen", "fast"}}), ConfigError);
  EXPECT_THROW(resolve_config({{"mode", "both"}}), ConfigError);
  EXPECT_THROW(resolve_config({{"model.share_depth", "2"}}), ConfigError);
  EXPECT_THROW(resolve_config({{"train.lr_pred", "-1"}}), ConfigError);
}

TEST(Resolve, ListsParse) {
  const auto c = resolve_config({{"grid.gen_rates", "1e-3, 2e-4"}, {"grid.seeds", "1,2,3"}});
  EXPECT_EQ(c.grid_gen_rates, (std::vector<double>{1e-3, 2e-4}));
  EXPECT_EQ(c.grid_seeds, (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(Echo, RoundTripsEveryKey) {
  KeyValues in = {{"mode", "rnp"},
                  {"seed", "9"},
                  {"train.lr_gen", "0.0013"},
                  {"objective.lambda2", "0.05"},
                  {"objective.coherence_scale", "per_transition"},
                  {"model.train_embeddings", "true"},
                  {"skew.kind", "generator"},
                  {"skew.k", "0.7"},
                  {"synth.marker_correlation", "0.25"},
                  {"grid.pred_rates", "0.1,0.3"}};
  const auto cfg = resolve_config(in);
  const auto echo = echo_config(cfg);
  for (const auto& key : known_config_keys()) EXPECT_TRUE(echo.contains(key)) << key;
  const auto again = echo_config(resolve_config(echo));
  EXPECT_EQ(echo, again);
  EXPECT_EQ(echo.at("train.lr_gen"), "0.0013");
}

TEST(Echo, WritesAndReadsFile) {
  const auto path = std::filesystem::temp_directory_path() / "rationalift_cfg_echo.cfg";
  const auto echo = echo_config(resolve_config({{"seed", "3"}}));
  write_key_values(echo, path);
  EXPECT_EQ(read_key_values(path), echo);
  std::filesystem::remove(path);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1e-3), "0.001");
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_double(x)), x);
}

}  // namespace
}  // namespace rationalift
