#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "mvlloc/data.hpp"
#include "test_util.hpp"

namespace mvl {
namespace {

SceneCatalog with_description(const SceneCatalog& base, std::size_t index, const std::string& description) {
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& s : base.scenes()) entries.emplace_back(s.name, s.index == index ? description : s.description);
  return SceneCatalog(entries);
}

TEST(Catalog, BuiltIns) {
  const SceneCatalog seven = SceneCatalog::seven_scenes();
  ASSERT_EQ(seven.size(), 7u);
  EXPECT_EQ(seven.at(0).name, "Chess");
  EXPECT_EQ(seven.at(0).description, "A chessboard on a small table surrounded by chairs");
  EXPECT_EQ(seven.at(3).description, "Two monitors side by side on a cluttered desk with a chair in front");
  EXPECT_EQ(seven.find("Stairs"), 6u);
  EXPECT_EQ(seven.find("Nowhere"), 7u);
  EXPECT_EQ(SceneCatalog::cambridge_landmarks().size(), 4u);
  const SceneCatalog two = seven.prefix(2);
  EXPECT_EQ(two.size(), 2u);
  EXPECT_EQ(two.at(1).name, "Fire");
  EXPECT_THROW(seven.prefix(8), std::invalid_argument);
  for (std::size_t i = 0; i < seven.size(); ++i) EXPECT_EQ(seven.at(i).index, i);
}

TEST(Catalog, RejectsBadEntries) {
  using Entries = std::vector<std::pair<std::string, std::string>>;
  EXPECT_THROW(SceneCatalog(Entries{}), std::invalid_argument);
  EXPECT_THROW(SceneCatalog(Entries{{"a", "x"}, {"a", "y"}}), std::invalid_argument);
  EXPECT_THROW(SceneCatalog(Entries{{"", "x"}}), std::invalid_argument);
  EXPECT_THROW(SceneCatalog(Entries{{"a", ""}}), std::invalid_argument);
}

TEST(Catalog, Json) {
  const SceneCatalog c = parse_catalog_json(R"([{"name": "Lab", "description": "A bench"}, {"name": "Hall", "description": "A long corridor"}])");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.at(1).name, "Hall");
  EXPECT_ANY_THROW(parse_catalog_json(R"({"name": "Lab"})"));
  EXPECT_ANY_THROW(parse_catalog_json(R"([{"name": "Lab"}])"));
  EXPECT_ANY_THROW(parse_catalog_json("[not json"));
}

TEST(Vocab, ReservedIdsAndSortedWords) {
  const SceneCatalog c = parse_catalog_json(R"([{"name": "A", "description": "Zebra, apple. apple"}])");
  const Vocab v = build_vocab(c);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.token(0), "<pad>");
  EXPECT_EQ(v.token(1), "<unk>");
  EXPECT_EQ(v.token(2), "apple");
  EXPECT_EQ(v.token(3), "zebra");
  EXPECT_EQ(v.id("zebra"), 3);
  EXPECT_EQ(v.id("mango"), Vocab::kUnknownId);
  EXPECT_THROW(v.token(9), std::out_of_range);
}

TEST(Vocab, Tokenize) {
  EXPECT_EQ(normalize_words("  A red, KITCHEN!  counter "),
            (std::vector<std::string>{"a", "red", "kitchen", "counter"}));
  const Vocab v = build_vocab(SceneCatalog::seven_scenes());
  const auto ids = tokenize("A chessboard on a small table", v, 32);
  EXPECT_EQ(detokenize(ids, v), "a chessboard on a small table");
  EXPECT_EQ(tokenize("a chessboard on a small table", v, 3).size(), 3u);
  EXPECT_EQ(tokenize("", v, 8), (std::vector<int>{Vocab::kUnknownId}));
  EXPECT_EQ(tokenize("spaceship", v, 8), (std::vector<int>{Vocab::kUnknownId}));
}

TEST(Synthetic, PosesAreDeterministicAndInRange) {
  for (std::size_t i = 0; i < 50; ++i) {
    const geo::Pose a = synthetic_pose(3, 1, i);
    const geo::Pose b = synthetic_pose(3, 1, i);
    EXPECT_EQ(a.p, b.p);
    EXPECT_EQ(a.q, b.q);
    for (double x : a.p) {
      EXPECT_GE(x, -0.5);
      EXPECT_LE(x, 0.5);
    }
    EXPECT_EQ(geo::canonicalize_hemisphere(a.q), a.q);
  }
  EXPECT_NE(synthetic_pose(3, 1, 0).p, synthetic_pose(4, 1, 0).p);
  EXPECT_NE(synthetic_pose(3, 1, 0).p, synthetic_pose(3, 2, 0).p);
}

TEST(Synthetic, SamplesArePureFunctionsOfTheirIndices) {
  const SceneCatalog c = SceneCatalog::seven_scenes().prefix(3);
  const SyntheticSpec spec{32, 32, 32};
  const auto few = generate_synthetic(11, c, 2, spec);
  const auto many = generate_synthetic(11, c, 5, spec);
  ASSERT_EQ(few.size(), 6u);
  ASSERT_EQ(many.size(), 15u);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 2; ++i) {
      const PoseSample& a = few[k * 2 + i];
      const PoseSample& b = many[k * 5 + i];
      EXPECT_EQ(a.scene_index, k);
      EXPECT_EQ(a.image, b.image);
      EXPECT_EQ(a.caption_tokens, b.caption_tokens);
      EXPECT_EQ(a.pose.p, b.pose.p);
    }
}

TEST(Synthetic, ImagesAreValidAndInformative) {
  const SceneCatalog c = SceneCatalog::seven_scenes().prefix(2);
  const auto samples = generate_synthetic(1, c, 8, SyntheticSpec{64, 64, 32});
  std::set<std::vector<double>> distinct;
  for (const auto& s : samples) {
    ASSERT_EQ(s.image.shape(), (Shape{3, 64, 64}));
    double total = 0.0;
    for (double v : s.image.storage()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      total += v;
    }
    EXPECT_GT(total, 0.0);
    distinct.insert(s.image.storage());
  }
  EXPECT_EQ(distinct.size(), samples.size());
  EXPECT_EQ(scene_landmarks(0).size(), kLandmarksPerScene);
  EXPECT_NE(scene_landmarks(0)[0].position, scene_landmarks(1)[0].position);
}

TEST(Dataset, WriteReadRoundTrip) {
  const auto dir = test::fresh_dir("data_roundtrip");
  const SceneCatalog c = SceneCatalog::seven_scenes().prefix(3);
  const Dataset ds{c, generate_synthetic(5, c, 3, SyntheticSpec{16, 16, 32}), 5};
  const std::string digest = write_dataset(dir, ds);
  EXPECT_EQ(digest.size(), 64u);
  EXPECT_EQ(dataset_digest(dir), digest);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_TRUE(std::filesystem::is_directory(dir / ("scene_0" + std::to_string(k))));
  EXPECT_FALSE(std::filesystem::exists(dir / "scene_03"));

  const Dataset back = read_dataset(dir, 32);
  EXPECT_EQ(back.catalog, c);
  EXPECT_EQ(back.seed, 5u);
  ASSERT_EQ(back.samples.size(), ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].image, ds.samples[i].image);
    EXPECT_EQ(back.samples[i].caption_tokens, ds.samples[i].caption_tokens);
    EXPECT_EQ(back.samples[i].scene_index, ds.samples[i].scene_index);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(back.samples[i].pose.p[j], ds.samples[i].pose.p[j], 1e-12);
    EXPECT_LT(geo::rotation_error_deg(back.samples[i].pose.q, ds.samples[i].pose.q), 1e-6);
  }
}

TEST(Dataset, DigestIsStableAndSensitive) {
  const SceneCatalog c = SceneCatalog::seven_scenes().prefix(2);
  const SyntheticSpec spec{16, 16, 32};
  const Dataset ds{c, generate_synthetic(2, c, 2, spec), 2};
  const std::string a = write_dataset(test::fresh_dir("digest_a"), ds);
  const std::string b = write_dataset(test::fresh_dir("digest_b"), ds);
  EXPECT_EQ(a, b);

  const SceneCatalog edited = with_description(c, 1, c.at(1).description + " and a rug");
  const Dataset ds2{edited, generate_synthetic(2, edited, 2, spec), 2};
  EXPECT_NE(write_dataset(test::fresh_dir("digest_c"), ds2), a);

  const Dataset ds3{c, generate_synthetic(3, c, 2, spec), 3};
  EXPECT_NE(write_dataset(test::fresh_dir("digest_d"), ds3), a);

  const auto dir = test::fresh_dir("digest_e");
  write_dataset(dir, ds);
  {
    std::fstream f(dir / "scene_00" / "images.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-1, std::ios::end);
    f.put('\x7f');
  }
  EXPECT_NE(dataset_digest(dir), a);
}

TEST(Dataset, ReadRejectsMissingOrCorruptData) {
  EXPECT_ANY_THROW(read_dataset(test::fresh_dir("data_missing"), 32));
  const auto dir = test::fresh_dir("data_corrupt");
  const SceneCatalog c = SceneCatalog::seven_scenes().prefix(1);
  write_dataset(dir, Dataset{c, generate_synthetic(1, c, 2, SyntheticSpec{8, 8, 32}), 1});
  std::filesystem::resize_file(dir / "scene_00" / "images.bin", 10);
  EXPECT_ANY_THROW(read_dataset(dir, 32));
}

}  // namespace
}  // namespace mvl
