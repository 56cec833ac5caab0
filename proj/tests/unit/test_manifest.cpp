#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "sssbathy/cli.hpp"
#include "sssbathy/manifest.hpp"
#include "sssbathy/raster.hpp"

using namespace sssbathy;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sssbathy");
  return run_cli(args);
}

}  // namespace

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::string abc = "abc";
  EXPECT_EQ(sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, RoundTripAndVerification) {
  const auto d = fresh_dir("sssbathy_manifest");
  std::ofstream(d / "a.txt") << "alpha";
  fs::create_directories(d / "sub");
  std::ofstream(d / "sub" / "b.txt") << "beta";
  Manifest m;
  m.command = "scene";
  m.seed = 7;
  m.config = {{"seed", 7}};
  m.add_outputs(d);
  write_manifest(d, m);
  const auto back = read_manifest(d);
  EXPECT_EQ(back.command, "scene");
  EXPECT_EQ(back.seed, 7u);
  EXPECT_EQ(back.outputs.size(), 2u);
  EXPECT_EQ(back.outputs.at("sub/b.txt"), m.outputs.at("sub/b.txt"));

  EXPECT_NO_THROW(verify_declared(d, "a.txt"));
  EXPECT_EQ(verify_directory(d).size(), 2u);
  std::ofstream(d / "a.txt") << "tampered";
  EXPECT_THROW(verify_declared(d, "a.txt"), HashMismatchError);
  EXPECT_THROW(verify_directory(d), HashMismatchError);
  std::ofstream(d / "c.txt") << "new";
  EXPECT_THROW(verify_declared(d, "c.txt"), HashMismatchError);
  EXPECT_TRUE(verify_directory(fresh_dir("sssbathy_manifest_empty")).empty());
  fs::remove_all(d);
}

TEST(Cli, SceneTwiceIsByteIdentical) {
  const auto d = fresh_dir("sssbathy_cli_scene");
  const auto cfg = d / "c.json";
  std::ofstream(cfg) << R"({"scene": {"region": {"width": 40, "height": 40}, "n_boulders": 5}})";
  ASSERT_EQ(cli({"scene", "--config", cfg.string(), "--seed", "7", "--out", (d / "a").string()}), 0);
  ASSERT_EQ(cli({"scene", "--config", cfg.string(), "--seed", "7", "--out", (d / "b").string()}), 0);
  EXPECT_EQ(slurp(d / "a" / "heightfield.grid"), slurp(d / "b" / "heightfield.grid"));
  EXPECT_FALSE(slurp(d / "a" / "heightfield.grid").empty());
  const auto m = read_manifest(d / "a");
  EXPECT_EQ(m.seed, 7u);
  EXPECT_EQ(m.config["scene"]["n_boulders"], 5);
  EXPECT_EQ(m.inputs.size(), 1u);
  EXPECT_TRUE(m.outputs.contains("heightfield.grid"));

  ASSERT_EQ(cli({"scene", "--config", cfg.string(), "--seed", "8", "--out", (d / "c").string()}), 0);
  EXPECT_NE(slurp(d / "a" / "heightfield.grid"), slurp(d / "c" / "heightfield.grid"));
  fs::remove_all(d);
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  const auto d = fresh_dir("sssbathy_cli_env");
  ::setenv("SSSBATHY_OUT", d.c_str(), 1);
  ASSERT_EQ(cli({"scene", "--set", "scene.region.width=30", "--set", "scene.region.height=30"}), 0);
  ::unsetenv("SSSBATHY_OUT");
  EXPECT_TRUE(fs::exists(d / "scene" / "heightfield.grid"));
  EXPECT_EQ(read_raster(d / "scene" / "heightfield.grid").spec().n_cols, 60u);
  fs::remove_all(d);
}

TEST(Cli, FailuresExitNonZero) {
  const auto d = fresh_dir("sssbathy_cli_fail");
  EXPECT_EQ(cli({}), 2);
  EXPECT_EQ(cli({"bogus"}), 2);
  EXPECT_EQ(cli({"survey", "--out", d.string()}), 2);
  EXPECT_EQ(cli({"scene", "--config", (d / "missing.json").string(), "--out", d.string()}), 1);
  std::ofstream(d / "bad.json") << "{not json";
  EXPECT_EQ(cli({"scene", "--config", (d / "bad.json").string(), "--out", d.string()}), 1);
  EXPECT_EQ(cli({"scene", "--set", "schema_version=3", "--out", d.string()}), 1);
  EXPECT_EQ(cli({"scene", "--set", "novalue", "--out", d.string()}), 1);
  EXPECT_EQ(cli({"survey", "--scene", (d / "nowhere").string(), "--out", d.string()}), 1);
  fs::remove_all(d);
}

TEST(Cli, TamperedInputIsRejected) {
  const auto d = fresh_dir("sssbathy_cli_hash");
  const std::vector<std::string> small{"--set", "scene.region.width=40", "--set", "scene.region.height=40"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), small.begin(), small.end());
    return cli(a);
  };
  ASSERT_EQ(with({"scene", "--out", (d / "scene").string()}), 0);
  {
    std::fstream f(d / "scene" / "heightfield.grid", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-1, std::ios::end);
    f.put('\x7f');
  }
  EXPECT_EQ(with({"survey", "--scene", (d / "scene").string(), "--out", (d / "survey").string()}), 1);
  fs::remove_all(d);
}

TEST(Cli, PlotWritesImageAndSidecar) {
  const auto d = fresh_dir("sssbathy_cli_plot");
  Raster r(GridSpec{0.0, 0.0, 1.0, 2, 1}, 0.0);
  r.at(1, 0) = 1.0;
  write_raster(d / "depth.grid", r);
  ASSERT_EQ(cli({"plot", "--input", (d / "depth.grid").string(), "--out", (d / "depth.pgm").string()}), 0);
  const std::string img = slurp(d / "depth.pgm");
  EXPECT_EQ(img.substr(0, 2), "P5");
  EXPECT_EQ(static_cast<unsigned char>(img[img.size() - 2]), 0);
  EXPECT_EQ(static_cast<unsigned char>(img[img.size() - 1]), 255);
  EXPECT_TRUE(fs::exists(d / "depth.pgm.json"));
  EXPECT_TRUE(fs::exists(d / "depth.pgm.manifest.json"));
  EXPECT_EQ(cli({"plot", "--input", (d / "depth.grid").string(), "--out", (d / "x.pgm").string(), "--mode", "x"}), 2);
  fs::remove_all(d);
}
