#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "logonet/csv.hpp"
#include "logonet/dataset.hpp"
#include "logonet/error.hpp"
#include "logonet/image.hpp"
#include "test_helpers.hpp"

namespace logonet {
namespace {
namespace fs = std::filesystem;

using testing::TempDir;

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

void write_gray_png(const fs::path& p, std::size_t size, float value) {
  write_file_atomic(p, encode_png(Tensor<float>({1, size, size}, value)));
}

std::string header() { return std::string(kManifestHeader) + "\n"; }

TEST(Csv, QuotedFieldsAndLineEnds) {
  const auto rows = parse_csv("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\n1,,\"multi\nline\"\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (CsvRow{"a", "b,c", "say \"hi\""}));
  EXPECT_EQ(rows[1], (CsvRow{"1", "", "multi\nline"}));
  EXPECT_EQ(parse_csv(csv_line({"x,y", "q\"", "plain"}))[0], (CsvRow{"x,y", "q\"", "plain"}));
  EXPECT_THROW(parse_csv("\"open"), FormatError);
}

TEST(DecodeImage, WhiteAndBlack) {
  TempDir dir("decode");
  write_gray_png(dir.path() / "white.png", 5, 1.0f);
  write_gray_png(dir.path() / "black.png", 5, 0.0f);
  const auto white = decode_image(dir.path() / "white.png", 1, 8);
  const auto black = decode_image(dir.path() / "black.png", 3, 4);
  EXPECT_EQ(white.shape(), (Shape{1, 8, 8}));
  EXPECT_EQ(black.shape(), (Shape{3, 4, 4}));
  for (float v : white.data()) EXPECT_EQ(v, 1.0f);
  for (float v : black.data()) EXPECT_EQ(v, 0.0f);
}

TEST(DecodeImage, LuminanceOfKnownPixels) {
  // 2x2 RGB: red, green, blue, (200, 100, 50).
  const std::vector<std::array<int, 3>> px{{255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {200, 100, 50}};
  Tensor<float> rgb({3, 2, 2});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 3; ++c) rgb[c * 4 + i] = px[i][c] / 255.0f;
  const auto bytes = encode_png(rgb);
  const auto gray = decode_image_bytes(bytes, 1, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    const double lum = (0.299 * px[i][0] + 0.587 * px[i][1] + 0.114 * px[i][2]) / 255.0;
    EXPECT_NEAR(gray[i], lum, 1.0 / 255.0) << i;
  }
  const auto color = decode_image_bytes(bytes, 3, 2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(color[c * 4 + i], px[i][c] / 255.0, 1e-6);
}

TEST(DecodeImage, ResizedOutputStaysInUnitRange) {
  std::mt19937_64 rng(3);
  const auto img = testing::random_tensor<float>({1, 13, 13}, rng, 0.0, 1.0);
  const auto out = decode_image_bytes(encode_png(img), 1, 29);
  EXPECT_EQ(out.shape(), (Shape{1, 29, 29}));
  for (float v : out.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(DecodeImage, ErrorsNameThePath) {
  TempDir dir("decode_bad");
  write_text(dir.path() / "junk.png", "not an image");
  try {
    decode_image(dir.path() / "junk.png", 1, 8);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("junk.png"), std::string::npos);
  }
  EXPECT_THROW(decode_image(dir.path() / "absent.png", 1, 8), Error);
}

TEST(Manifest, MinimalRoot) {
  TempDir dir("minimal");
  write_gray_png(dir.path() / "images/a.png", 4, 1.0f);
  write_gray_png(dir.path() / "sketches/a_s0.png", 4, 1.0f);
  write_text(dir.path() / "manifest.csv",
             header() + "a_s0,a,sketches/a_s0.png,images/a.png,hard,,\"A, Inc.\"\n");
  const auto m = load_manifest(dir.path());
  ASSERT_EQ(m.logos.size(), 1u);
  ASSERT_EQ(m.sketches.size(), 1u);
  EXPECT_EQ(m.logos[0].text_label.value_or(""), "A, Inc.");
  EXPECT_EQ(m.sketches[0].subset, Subset::hard);
  EXPECT_EQ(m.sketches[0].split, Split::unassigned);
  EXPECT_EQ(m.subset_counts(), (std::array<std::size_t, 3>{0, 0, 1}));
}

TEST(Manifest, GalleryOnlyLogoRows) {
  TempDir dir("logo_only");
  write_gray_png(dir.path() / "images/a.png", 4, 1.0f);
  write_gray_png(dir.path() / "images/b.png", 4, 0.0f);
  write_gray_png(dir.path() / "sketches/a_s0.png", 4, 1.0f);
  write_text(dir.path() / "manifest.csv", header() +
                                              "a_s0,a,sketches/a_s0.png,images/a.png,easy,train,\n"
                                              ",b,,images/b.png,,,\n");
  const auto m = load_manifest(dir.path());
  EXPECT_EQ(m.logos.size(), 2u);
  EXPECT_EQ(m.sketches.size(), 1u);
  EXPECT_EQ(parse_manifest(manifest_csv(m), dir.path()).logos.size(), 2u);
}

TEST(Manifest, DanglingInstanceNamesTheSketch) {
  TempDir dir("dangling");
  write_gray_png(dir.path() / "images/a.png", 4, 1.0f);
  write_gray_png(dir.path() / "sketches/s.png", 4, 1.0f);
  write_text(dir.path() / "manifest.csv",
             header() + "a_s0,a,sketches/s.png,images/a.png,easy,,\n"
                        "ghost_s0,ghost,sketches/s.png,,easy,,\n");
  try {
    load_manifest(dir.path());
    FAIL() << "expected an integrity error";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost_s0"), std::string::npos) << e.what();
  }
}

TEST(Manifest, BadSubsetTagAndMissingFiles) {
  TempDir dir("bad_rows");
  write_gray_png(dir.path() / "images/a.png", 4, 1.0f);
  write_gray_png(dir.path() / "sketches/s.png", 4, 1.0f);
  write_text(dir.path() / "manifest.csv", header() + "s,a,sketches/s.png,images/a.png,tricky,,\n");
  EXPECT_THROW(load_manifest(dir.path()), IntegrityError);

  write_text(dir.path() / "manifest.csv", header() + "s,a,sketches/nope.png,images/a.png,easy,,\n");
  try {
    load_manifest(dir.path());
    FAIL() << "expected an integrity error";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.png"), std::string::npos);
  }

  fs::remove(dir.path() / "manifest.csv");
  try {
    load_manifest(dir.path());
    FAIL() << "expected an integrity error";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("manifest.csv"), std::string::npos);
  }
}

TEST(Manifest, WrongHeaderIsAFormatError) {
  EXPECT_THROW(parse_manifest("id,path\n", "/tmp", false), FormatError);
}

DatasetManifest synthetic_manifest(std::size_t instances, std::size_t per) {
  DatasetManifest m;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::string id = "i" + std::to_string(i);
    m.logos.push_back({id, "images/" + id + ".png", std::nullopt});
    for (std::size_t j = 0; j < per; ++j)
      m.sketches.push_back({id + "_" + std::to_string(j), id, "s.png", Subset::easy, Split::unassigned});
  }
  return m;
}

TEST(Split, BySketchHoldsOutOnePerInstance) {
  const auto m = make_split(synthetic_manifest(30, 4), SplitMode::by_sketch, 0.25, 9);
  std::map<std::string, int> test_per_instance, train_per_instance;
  for (const auto& s : m.sketches) {
    ASSERT_NE(s.split, Split::unassigned);
    (s.split == Split::test ? test_per_instance : train_per_instance)[s.instance_id]++;
  }
  EXPECT_EQ(test_per_instance.size(), 30u);
  for (const auto& [id, n] : test_per_instance) EXPECT_EQ(n, 1) << id;
  for (const auto& [id, n] : train_per_instance) EXPECT_EQ(n, 3) << id;
}

TEST(Split, SameSeedSameSplit) {
  const auto base = synthetic_manifest(20, 5);
  const auto a = make_split(base, SplitMode::by_sketch, 0.2, 4);
  const auto b = make_split(base, SplitMode::by_sketch, 0.2, 4);
  EXPECT_EQ(manifest_csv(a), manifest_csv(b));
}

TEST(Split, ByInstanceIsDisjoint) {
  const auto m = make_split(synthetic_manifest(100, 3), SplitMode::by_instance, 0.1, 5);
  std::set<std::string> train_ids, test_ids;
  for (const auto& s : m.sketches) (s.split == Split::test ? test_ids : train_ids).insert(s.instance_id);
  EXPECT_EQ(test_ids.size(), 10u);
  EXPECT_EQ(train_ids.size(), 90u);
  for (const auto& id : test_ids) EXPECT_EQ(train_ids.count(id), 0u) << id;
}

TEST(Split, EmptySideIsAnError) {
  EXPECT_THROW(make_split(synthetic_manifest(3, 4), SplitMode::by_sketch, 0.05, 1), ConfigError);
  EXPECT_THROW(make_split(synthetic_manifest(3, 4), SplitMode::by_instance, 0.1, 1), ConfigError);
  EXPECT_THROW(make_split(synthetic_manifest(3, 4), SplitMode::by_instance, 1.0, 1), ConfigError);
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto bytes = read_file_bytes(entry.path());
    files[fs::relative(entry.path(), root).string()] = std::string(bytes.begin(), bytes.end());
  }
  return files;
}

TEST(Synth, SameSeedGivesBitIdenticalTree) {
  TempDir a("synth_a"), b("synth_b");
  SynthOptions o;
  o.instances = 5;
  o.sketches_per_instance = 2;
  o.seed = 123;
  synth_generate(o, a.path());
  synth_generate(o, b.path());
  const auto ta = read_tree(a.path()), tb = read_tree(b.path());
  EXPECT_EQ(ta.size(), 5u + 10u + 1u);
  EXPECT_TRUE(ta == tb);
}

TEST(Synth, RoundRobinSubsetsAndManifestRoundTrip) {
  TempDir dir("synth_tags");
  SynthOptions o;
  o.instances = 4;
  o.sketches_per_instance = 3;
  o.size = 32;
  synth_generate(o, dir.path());
  const auto m = load_manifest(dir.path());
  EXPECT_EQ(m.logos.size(), 4u);
  EXPECT_EQ(m.sketches.size(), 12u);
  EXPECT_EQ(m.subset_counts(), (std::array<std::size_t, 3>{4, 4, 4}));
  for (const auto& logo : m.logos) {
    std::set<Subset> tags;
    for (const auto& s : m.sketches)
      if (s.instance_id == logo.instance_id) tags.insert(s.subset);
    EXPECT_EQ(tags.size(), 3u);
  }
  const auto img = decode_image(dir.path() / m.logos[0].image_path, 1, 32);
  float lo = 1.0f;
  for (float v : img.data()) lo = std::min(lo, v);
  EXPECT_LT(lo, 0.5f) << "strokes should be dark on white";
}

TEST(Synth, InstancesDifferMoreThanEasySketchesFromTheirLogo) {
  TempDir dir("synth_pixels");
  SynthOptions o;
  o.instances = 20;
  o.sketches_per_instance = 1;  // subset easy
  synth_generate(o, dir.path());
  const auto data = load_images(load_manifest(dir.path()), 1, 64);
  auto mse = [](const Tensor<float>& a, const Tensor<float>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += std::pow(double(a[i]) - b[i], 2);
    return s / a.numel();
  };
  std::size_t pairs = 0, ok = 0;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) {
      if (i == j) continue;
      ++pairs;
      if (mse(data.logos[i], data.logos[j]) > mse(data.logos[i], data.sketches[i])) ++ok;
    }
  EXPECT_GE(static_cast<double>(ok) / pairs, 0.95);
}

TEST(Synth, NeedsTwoInstances) {
  TempDir dir("synth_one");
  SynthOptions o;
  o.instances = 1;
  EXPECT_THROW(synth_generate(o, dir.path()), ConfigError);
}

}  // namespace
}  // namespace logonet
