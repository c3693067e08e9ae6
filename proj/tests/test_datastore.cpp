// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ivmap/datastore.hpp"
#include "ivmap/errors.hpp"
#include "tiny_stack.hpp"

using namespace ivmap;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spill(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ivmap_" + name);
  fs::remove_all(p);
  return p;
}

void replace_once(const fs::path& p, const std::string& from, const std::string& to) {
  std::string text = slurp(p);
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  spill(p, text);
}

}  // namespace

TEST_CASE("dataset generation and loading") {
  const fs::path a = fresh_dir("ds_a");
  const fs::path b = fresh_dir("ds_b");
  const DatasetManifest m = generate_dataset(6, 3, 11, a);
  generate_dataset(6, 3, 11, b);
  CHECK(m.items.size() == 9);
  CHECK(m.items[6].split == Split::test);
  CHECK(m.items[4].image_file == "images/00004.png");

  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    CHECK(slurp(e.path()) == slurp(b / fs::relative(e.path(), a)));
  }
  CHECK(files == 19);

  const Dataset d = load_dataset(a);
  CHECK(d.indices(Split::train).size() == 6);
  CHECK(d.indices(Split::test) == std::vector<std::size_t>{6, 7, 8});
  const auto params = sample_params(11, 9);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(d.manifest.items[i].params == params[i]);
    CHECK(d.images[i].pixels == render(params[i]).pixels);
    CHECK(d.curves[i] == simulate_iv(params[i]));
  }

  SUBCASE("missing file") {
    fs::remove(a / "curves/00005.csv");
    try {
      load_dataset(a);
      FAIL("expected CorruptDataset");
    } catch (const CorruptDataset& e) {
      CHECK(std::string(e.what()).find("curves/00005.csv") != std::string::npos);
      CHECK(std::string(e.what()).find("item 5") != std::string::npos);
    }
  }
  SUBCASE("count mismatch") {
    replace_once(a / "manifest.json", "\"n_test\": 3", "\"n_test\": 4");
    CHECK_THROWS_AS(load_dataset(a), CorruptDataset);
  }
  SUBCASE("unreadable image") {
    spill(a / "images/00002.png", "not a png");
    CHECK_THROWS_AS(load_dataset(a), CorruptDataset);
  }
  SUBCASE("garbled manifest") {
    spill(a / "manifest.json", "{\"format\": ");
    CHECK_THROWS_AS(load_dataset(a), CorruptDataset);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("config digest") {
  CHECK(config_digest("") == "cbf29ce484222325");
  CHECK(config_digest("a") == "af63dc4c8601ec8c");
  CHECK(config_digest("{\"seed\":1}") != config_digest("{\"seed\":2}"));
}

TEST_CASE("stack save and load") {
  const StackTraining t = testing::tiny_stack();
  const fs::path dir = fresh_dir("stack");
  const StackMeta meta{5, "0123456789abcdef", 1.0, 1.0};
  save_stack(dir, t.stack, meta, &t.optimizer);

  const LoadedStack back = load_stack(dir);
  CHECK(back.meta.seed == 5);
  CHECK(back.meta.config_digest == "0123456789abcdef");
  CHECK(back.stack.passes == t.stack.passes);
  const auto probe = sample_params(123, 10);
  for (const auto& p : probe) {
    CHECK(forward_predict(back.stack, render(p)) == forward_predict(t.stack, render(p)));
    CHECK(inverse_design(back.stack, simulate_iv(p)).pixels == inverse_design(t.stack, simulate_iv(p)).pixels);
  }
  const NetCheckpoint ck = load_checkpoint(dir / "models/image_encoder.ckpt");
  CHECK(ck.adam.step == t.optimizer.image_encoder.step);
  CHECK(ck.seed == 5);

  const fs::path again = fresh_dir("stack_again");
  save_stack(again, back.stack, back.meta, &t.optimizer);
  for (const char* f : {"image_encoder.ckpt", "curve_decoder.ckpt", "fwd_bridge.bin", "inv_bridge.bin", "stack.json"}) {
    CHECK(slurp(dir / "models" / f) == slurp(again / "models" / f));
  }

  SUBCASE("truncated checkpoint") {
    const std::string bytes = slurp(dir / "models/curve_encoder.ckpt");
    spill(dir / "models/curve_encoder.ckpt", bytes.substr(0, bytes.size() / 3));
    CHECK_THROWS_AS(load_stack(dir), CorruptCheckpoint);
  }
  SUBCASE("stack version bump") {
    replace_once(dir / "models/stack.json", "\"version\": 1", "\"version\": 2");
    CHECK_THROWS_AS(load_stack(dir), VersionMismatch);
  }
  SUBCASE("bridge version bump") {
    std::string bytes = slurp(dir / "models/fwd_bridge.bin");
    bytes[8] = 7;
    spill(dir / "models/fwd_bridge.bin", bytes);
    CHECK_THROWS_AS(load_stack(dir), VersionMismatch);
  }
  SUBCASE("missing bridge") {
    fs::remove(dir / "models/inv_bridge.bin");
    CHECK_THROWS_AS(load_stack(dir), CorruptCheckpoint);
  }
  fs::remove_all(dir);
  fs::remove_all(again);
}
