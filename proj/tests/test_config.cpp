// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "ivmap/config.hpp"
#include "ivmap/errors.hpp"

using namespace ivmap;

TEST_CASE("defaults") {
  const RunConfig c = parse_run_config("{}");
  CHECK(c.n_train == 2000);
  CHECK(c.n_test == 200);
  CHECK(c.image_vae.hidden == std::vector<int>{1024, 256});
  CHECK(c.image_vae.latent_dim == 30);
  CHECK(c.image_vae.epochs == 200);
  CHECK(c.curve_vae.hidden == std::vector<int>{64, 32});
  CHECK(c.curve_vae.latent_dim == 10);
  CHECK(c.curve_vae.epochs == 400);
  CHECK(c.image_vae.batch_size == 64);
  CHECK(c.image_vae.learning_rate == 1e-3);
  CHECK(c.image_vae.kl_warmup_fraction == 0.2);
  CHECK(c.passes == PassCounts{2, 3, 1});
  CHECK(c.noise_sigma == 0.08);
  CHECK(c.inverse_targets == 20);

  const StackConfig s = c.stack_config();
  CHECK(s.image_arch == VaeArch::image_default());
  CHECK(s.curve_arch == VaeArch::curve_default());
  CHECK(s.image_train.rng_seed != s.curve_train.rng_seed);
}

TEST_CASE("round trip and overrides") {
  RunConfig c;
  c.seed = 9;
  c.image_vae.epochs = 17;
  c.curve_vae.kl_weight = 0.5;
  c.passes = {0, 1, 2};
  c.fwd_lambda = 0.25;
  const std::string text = to_json(c);
  const RunConfig back = parse_run_config(text);
  CHECK(to_json(back) == text);
  CHECK(back.image_vae.epochs == 17);
  CHECK(back.passes == PassCounts{0, 1, 2});

  const RunConfig partial = parse_run_config(R"({"image_vae": {"epochs": 3}, "seed": 4})");
  CHECK(partial.image_vae.epochs == 3);
  CHECK(partial.image_vae.latent_dim == 30);
  CHECK(partial.seed == 4);
}

TEST_CASE("rejections") {
  CHECK_THROWS_AS(parse_run_config(R"({"sead": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"image_vae": {"epoch": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"passes": {"curve": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"seed": "one"})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"n_train": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"curve_vae": {"batch_size": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"passes": {"image_pre": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("{"), ConfigError);
}

TEST_CASE("pass count flag") {
  CHECK(parse_pass_counts("2,3,1") == PassCounts{2, 3, 1});
  CHECK(parse_pass_counts("0,0,0") == PassCounts{0, 0, 0});
  CHECK_THROWS_AS(parse_pass_counts("2,3"), ConfigError);
  CHECK_THROWS_AS(parse_pass_counts("2,3,1,4"), ConfigError);
  CHECK_THROWS_AS(parse_pass_counts("2,x,1"), ConfigError);
  CHECK_THROWS_AS(parse_pass_counts("2,-1,1"), ConfigError);
  CHECK_THROWS_AS(parse_pass_counts("2,,1"), ConfigError);
}
