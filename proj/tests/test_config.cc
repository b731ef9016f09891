#include <string>

#include <doctest.h>

#include "rtidp/config.h"

namespace rtidp {
namespace {

std::string ErrorOf(const std::string& text) {
  try {
    ParseRunConfig(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST_CASE("defaults match the documented configuration") {
  const RunConfig c;
  CHECK(c.env == "reach2d_bimodal");
  CHECK(c.total_steps == 100);
  CHECK(c.schedule == ScheduleKind::kSquaredCosine);
  CHECK(c.sampler.rti_steps == std::vector<int>{3, 2, 1});
  CHECK(c.sampler.deterministic_final);
  CHECK(c.n_checkpoints == 3);
  CHECK(c.scale_variant_factor == 10.0);
  CHECK_NOTHROW(ValidateRunConfig(c));
}

TEST_CASE("parse sections, comments and lists") {
  const RunConfig c = ParseRunConfig(
      "# comment\n"
      "seed = 7\n"
      "[env]\n"
      "name = pushL   # trailing comment\n"
      "[model]\n"
      "hidden = 64, 32\n"
      "activation = tanh\n"
      "[sampler]\n"
      "rti_steps = 5,3,1\n"
      "deterministic_final = false\n"
      "[contract]\n"
      "delta_norms = 0.1\n");
  CHECK(c.seed == 7);
  CHECK(c.env == "pushL");
  CHECK(c.hidden == std::vector<int>{64, 32});
  CHECK(c.activation == Activation::kTanh);
  CHECK(c.sampler.rti_steps == std::vector<int>{5, 3, 1});
  CHECK_FALSE(c.sampler.deterministic_final);
  CHECK(c.delta_norms == std::vector<double>{0.1});
}

TEST_CASE("parse errors carry the line number and key") {
  CHECK(ErrorOf("[env]\nname = pushL\nbogus = 1\n").find("config line 3") !=
        std::string::npos);
  CHECK(ErrorOf("[env]\nbogus = 1\n").find("env.bogus") != std::string::npos);
  CHECK(ErrorOf("[nope]\n").find("config line 1") != std::string::npos);
  CHECK(ErrorOf("seed = 1\n[env\n").find("config line 2") != std::string::npos);
  CHECK(ErrorOf("[train]\nepochs\n").find("config line 2") != std::string::npos);
  const std::string bad_value = ErrorOf("[train]\n\nepochs = many\n");
  CHECK(bad_value.find("config line 3") != std::string::npos);
  CHECK(bad_value.find("train.epochs") != std::string::npos);
}

TEST_CASE("set and validate") {
  RunConfig c;
  SetConfigValue(c, "bench.n_episodes", "5");
  CHECK(c.n_episodes == 5);
  SetConfigValue(c, "bench.variants", "rti,dp-chunked");
  CHECK(c.variants == std::vector<Variant>{Variant::kRti, Variant::kDpChunked});
  CHECK_THROWS_AS(SetConfigValue(c, "bench.nope", "1"), ConfigError);
  CHECK_THROWS_AS(SetConfigValue(c, "train.momentum", "fast"), ConfigError);

  RunConfig bad;
  bad.sampler.rti_steps = {200};
  CHECK_THROWS_AS(ValidateRunConfig(bad), ConfigError);
  bad = RunConfig{};
  bad.env = "cartpole";
  CHECK_THROWS_AS(ValidateRunConfig(bad), ConfigError);
  bad = RunConfig{};
  bad.variants = {Variant::kRtiClip};
  CHECK_THROWS_AS(ValidateRunConfig(bad), ConfigError);
  bad.env = "pick_discrete";
  CHECK_NOTHROW(ValidateRunConfig(bad));
}

TEST_CASE("formatted config round-trips and covers every key") {
  RunConfig c;
  c.seed = 3;
  c.env = "pick_discrete";
  c.hidden = {8, 4};
  c.sampler.rti_steps = {10, 2};
  c.train.learning_rate = 0.123456789;
  c.variants = {Variant::kRtiScale};
  c.kprime_tolerance = 0.05;
  const std::string text = "\n" + FormatRunConfig(c);
  const RunConfig back = ParseRunConfig(text);
  CHECK("\n" + FormatRunConfig(back) == text);
  CHECK(back.train.learning_rate == c.train.learning_rate);
  CHECK(back.variants == c.variants);
  for (const std::string& key : ConfigKeys()) {
    const std::string leaf = key.substr(key.find('.') + 1);
    INFO(key);
    CHECK(text.find("\n" + leaf + " = ") != std::string::npos);
  }
}

TEST_CASE("precedence: defaults, then file, then overrides") {
  RunConfig c = ParseRunConfig("seed = 4\n[bench]\nn_episodes = 9\n");
  CHECK(c.n_episodes == 9);
  CHECK(c.dp_executed == 4);
  SetConfigValue(c, "bench.n_episodes", "2");
  CHECK(c.n_episodes == 2);
  CHECK(c.seed == 4);
  // A later file layered on an earlier one keeps untouched keys.
  const RunConfig layered = ParseRunConfig("[env]\nname = pushL\n", c);
  CHECK(layered.n_episodes == 2);
  CHECK(layered.env == "pushL");
}

TEST_CASE("module views") {
  RunConfig c;
  c.seed = 5;
  c.n_checkpoints = 2;
  c.env = "pick_discrete";
  c.scale_variant_factor = 4.0;
  const BenchConfig b = ToBenchConfig(c);
  CHECK(b.seeds == std::vector<uint64_t>{5, 6});
  CHECK(b.recipe.discrete_scale == 4.0);
  CHECK(b.env == "pick_discrete");
  CHECK(ToTrainConfig(c).seed == 5);
  CHECK(ToModelConfig(c).hidden == c.hidden);
  CHECK(ToContractOptions(c).contraction.kprimes == c.kprimes);
  CHECK(ToDemoOptions(c).horizon == 8);
}

TEST_CASE("integer lists") {
  CHECK(ParseIntList("3,2,1") == std::vector<int>{3, 2, 1});
  CHECK(ParseIntList(" 10 , 5 ") == std::vector<int>{10, 5});
  CHECK(ParseIntList("").empty());
  CHECK_THROWS_AS(ParseIntList("3,x"), std::invalid_argument);
}

}  // namespace
}  // namespace rtidp
