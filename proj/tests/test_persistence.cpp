#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "fixture_models.hpp"
#include "logonet/error.hpp"
#include "logonet/image.hpp"
#include "logonet/persistence.hpp"
#include "test_helpers.hpp"

#ifndef LOGONET_FIXTURE_DIR
#error "LOGONET_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace logonet {
namespace {
namespace fs = std::filesystem;

LogoNetConfig small_config() {
  LogoNetConfig c;
  c.input_size = 16;
  c.first_kernel = 5;
  c.stage_channels = {4, 8};
  c.embed_dim = 6;
  c.reduction_ratio = 2;
  c.spatial_kernel = 3;
  return c;
}

using testing::formula_gallery;
using testing::formula_model;

TEST(Checkpoint, RoundTripIsByteIdentical) {
  const auto model = init_model(small_config(), 7);
  const auto bytes = serialize_checkpoint(model);
  const auto loaded = deserialize_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(loaded), bytes);
  EXPECT_EQ(loaded.config().to_text(), model.config().to_text());
  EXPECT_EQ(fingerprint(loaded), fingerprint(model));
}

TEST(Checkpoint, LoadedModelEmbedsBitwiseIdentically) {
  const auto model = init_model(small_config(), 8);
  const fs::path path = fs::temp_directory_path() / "logonet_ckpt_embed.lgn";
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint(path);
  fs::remove(path);
  std::mt19937_64 rng(9);
  const auto x = testing::random_tensor<float>({3, 1, 16, 16}, rng, 0.0, 1.0);
  EXPECT_EQ(testing::as_doubles(embed(model, x)), testing::as_doubles(embed(loaded, x)));
}

TEST(Checkpoint, LayoutStartsWithMagicVersionAndConfig) {
  const auto bytes = serialize_checkpoint(formula_model());
  ASSERT_GT(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "LGN1");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
  const std::size_t text_len = bytes[8] | (bytes[9] << 8) | (bytes[10] << 16) | (bytes[11] << 24);
  const std::string text(bytes.begin() + 12, bytes.begin() + 12 + text_len);
  EXPECT_EQ(text, formula_model().config().to_text());
}

TEST(Checkpoint, MatchesCommittedFixture) {
  // A layout change must bump the version and regenerate this fixture.
  const auto fixture = read_file_bytes(fs::path(LOGONET_FIXTURE_DIR) / "formula_model.lgn");
  EXPECT_EQ(serialize_checkpoint(formula_model()), fixture);
  EXPECT_EQ(serialize_checkpoint(deserialize_checkpoint(fixture)), fixture);
}

TEST(Gallery, MatchesCommittedFixture) {
  const auto fixture = read_file_bytes(fs::path(LOGONET_FIXTURE_DIR) / "formula_gallery.lgg");
  EXPECT_EQ(serialize_gallery(formula_gallery()), fixture);
}

TEST(Checkpoint, TruncationReportsTheOffset) {
  const auto bytes = serialize_checkpoint(formula_model());
  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + cut);
    try {
      deserialize_checkpoint(part);
      FAIL() << "expected a format error at cut " << cut;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
      EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos) << e.what();
    }
  }
}

TEST(Checkpoint, BadMagicVersionAndTrailingBytes) {
  auto bytes = serialize_checkpoint(formula_model());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(deserialize_checkpoint(bad), FormatError);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(deserialize_checkpoint(bad), FormatError);
}

TEST(Checkpoint, RecordShapeMustMatchConfig) {
  auto bytes = serialize_checkpoint(formula_model());
  const std::string config = formula_model().config().to_text();
  std::string changed = config;
  const auto at = changed.find("embed_dim=2");
  ASSERT_NE(at, std::string::npos);
  changed.replace(at, 11, "embed_dim=3");
  std::copy(changed.begin(), changed.end(), bytes.begin() + 12);
  try {
    deserialize_checkpoint(bytes);
    FAIL() << "expected a format error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("head.weight"), std::string::npos) << e.what();
  }
}

TEST(GalleryFile, RoundTripAndWarning) {
  const auto g = formula_gallery();
  const fs::path path = fs::temp_directory_path() / "logonet_gallery.lgg";
  save_gallery(g, path);
  std::vector<std::string> warnings;
  const auto loaded = load_gallery(path, std::string("ffffffffffffffff"),
                                   [&](const std::string& w) { warnings.push_back(w); });
  EXPECT_EQ(loaded.instance_ids, g.instance_ids);
  EXPECT_EQ(testing::as_doubles(loaded.embeddings), testing::as_doubles(g.embeddings));
  EXPECT_EQ(serialize_gallery(loaded), serialize_gallery(g));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("0123456789abcdef"), std::string::npos);
  warnings.clear();
  load_gallery(path, g.fingerprint, [&](const std::string& w) { warnings.push_back(w); });
  EXPECT_TRUE(warnings.empty());
  fs::remove(path);
}

TEST(GalleryFile, EmptyGalleryCannotBeSaved) {
  Gallery g;
  EXPECT_THROW(serialize_gallery(g), Error);
}

TEST(GalleryFile, TruncationIsAFormatError) {
  const auto bytes = serialize_gallery(formula_gallery());
  const std::vector<std::uint8_t> part(bytes.begin(), bytes.end() - 3);
  EXPECT_THROW(deserialize_gallery(part), FormatError);
}

TEST(AtomicWrite, LeavesNoTemporaryBehind) {
  const fs::path dir = fs::temp_directory_path() / "logonet_atomic";
  fs::remove_all(dir);
  save_checkpoint(formula_model(), dir / "m.lgn");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1u);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace logonet
