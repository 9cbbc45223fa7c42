#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "namea/attack/primitives.hpp"
#include "namea/data/dataset.hpp"
#include "namea/data/image_io.hpp"
#include "namea/errors.hpp"
#include "namea/eval/harness.hpp"
#include "support/toy.hpp"

using namespace namea;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Synthetic, DeterministicAndBalanced) {
  const auto a = data::generate_synthetic(3, 11);
  const auto b = data::generate_synthetic(3, 11);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.labels, b.labels);
  ASSERT_EQ(a.size(), 30u);
  EXPECT_EQ(a.images.shape(), (Shape{30, 3, 32, 32}));
  std::vector<int> counts(data::kSynthClasses, 0);
  for (int y : a.labels) ++counts[static_cast<std::size_t>(y)];
  for (int c : counts) EXPECT_EQ(c, 3);
  for (float v : a.images.values()) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
  EXPECT_NE(data::generate_synthetic(3, 12).images, a.images);
}

TEST(ImageIo, PngRoundTripIsEightBitExact) {
  const auto dir = fresh_dir("namea_io");
  Tensor img({3, 5, 4});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(i % 256) / 255.0f;
  data::write_png(dir / "a.png", img);
  const Tensor back = data::read_image(dir / "a.png");
  ASSERT_EQ(back.shape(), img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_FLOAT_EQ(back[i], img[i]);
}

TEST(ImageIo, ReadsBinaryPnm) {
  const auto dir = fresh_dir("namea_pnm");
  {
    std::ofstream ppm(dir / "a.ppm", std::ios::binary);
    ppm << "P6\n# c\n2 1\n255\n";
    const unsigned char px[6] = {255, 0, 0, 0, 0, 255};
    ppm.write(reinterpret_cast<const char*>(px), 6);
    std::ofstream pgm(dir / "b.pgm", std::ios::binary);
    pgm << "P5 1 2 255\n";
    const unsigned char g[2] = {0, 51};
    pgm.write(reinterpret_cast<const char*>(g), 2);
  }
  const Tensor rgb = data::read_image(dir / "a.ppm");
  EXPECT_EQ(rgb.shape(), (Shape{3, 1, 2}));
  EXPECT_EQ(rgb[0], 1.0f);
  EXPECT_EQ(rgb[5], 1.0f);
  const Tensor gray = data::read_image(dir / "b.pgm");
  EXPECT_EQ(gray.shape(), (Shape{1, 2, 1}));
  EXPECT_FLOAT_EQ(gray[1], 0.2f);
  std::ofstream(dir / "c.png") << "garbage";
  EXPECT_THROW(data::read_image(dir / "c.png"), Error);
  EXPECT_THROW(data::read_image(dir / "none.png"), Error);
}

TEST(Dataset, WriteIndexLoad) {
  const auto dir = fresh_dir("namea_ds");
  const auto batch = data::generate_synthetic(2, 5);
  data::write_dataset(dir, batch);
  std::filesystem::create_directories(dir / "zz_empty");
  const auto index = data::index_dataset(dir);
  ASSERT_EQ(index.class_names.size(), 11u);
  EXPECT_EQ(index.class_names[0], "class_0");
  EXPECT_TRUE(index.by_class.back().empty());
  std::vector<data::DatasetEntry> all;
  for (const auto& cls : index.by_class) all.insert(all.end(), cls.begin(), cls.end());
  const auto loaded = data::load_entries(all);
  ASSERT_EQ(loaded.size(), 20u);
  EXPECT_LT(max_abs_diff(loaded.images.slice(0, 1), batch.images.slice(0, 1)), 0.5f / 255.0f + 1e-6f);
  EXPECT_THROW(data::index_dataset(dir / "missing"), Error);
}

TEST(Dataset, DataRootFromEnvironment) {
  ::setenv("NAMEA_DATA_ROOT", "/tmp/somewhere", 1);
  EXPECT_EQ(data::data_root(), "/tmp/somewhere");
  ::unsetenv("NAMEA_DATA_ROOT");
  EXPECT_EQ(data::data_root("fallback"), "fallback");
}

// --- harness ------------------------------------------------------------------------

namespace {

/// A CNN and a ViT that agree on the label of every sampled image is not
/// guaranteed for random weights, so labels are set to the CNN prediction.
struct Bench {
  std::vector<model::ModelHandle> surrogates;
  std::vector<model::ModelHandle> targets;
  ImageBatch data;
  Bench() {
    surrogates.push_back(toy::handle("s_cnn", toy::cnn3(8)));
    surrogates.push_back(toy::handle("s_vit", toy::vit(2, 9)));
    targets.push_back(toy::handle("t_cnn", toy::cnn3(18)));
    targets.push_back(toy::handle("t_vit", toy::vit(1, 19)));
    data.images = toy::images(6, 8, 21);
    data.labels = eval::predict(surrogates[0], data.images);
  }
};

}  // namespace

TEST(Harness, AttackSuccessRateCountsMisclassifications) {
  Bench b;
  const auto pred = eval::predict(b.targets[0], b.data.images);
  EXPECT_DOUBLE_EQ(eval::attack_success_rate(b.targets[0], b.data.images, pred), 0.0);
  std::vector<int> wrong = pred;
  wrong[0] = (wrong[0] + 1) % 4;
  wrong[1] = (wrong[1] + 1) % 4;
  EXPECT_DOUBLE_EQ(eval::attack_success_rate(b.targets[0], b.data.images, wrong), 2.0 / 6.0);
}

TEST(Harness, ChunkedRunsRespectBudget) {
  Bench b;
  AttackConfig cfg;
  cfg.outer_iters = 2;
  cfg.inner_loops = 2;
  cfg.batch_size = 4;
  const Tensor adv = eval::run_attack(b.data, b.surrogates, cfg);
  EXPECT_EQ(adv.shape(), b.data.images.shape());
  EXPECT_NO_THROW(attack::check_budget(adv, b.data.images, cfg.epsilon));
  cfg.method = Method::ENS;
  const Tensor ens = eval::run_attack(b.data, b.surrogates, cfg);
  EXPECT_NO_THROW(attack::check_budget(ens, b.data.images, cfg.epsilon));
}

TEST(Harness, EvaluateFillsFamilies) {
  Bench b;
  AttackConfig cfg;
  cfg.outer_iters = 1;
  cfg.inner_loops = 2;
  cfg.seed = 5;
  const auto r = eval::evaluate_attack("NAMEA", b.data, b.surrogates, b.targets, cfg);
  EXPECT_EQ(r.asr.size(), 2u);
  EXPECT_EQ(r.samples, 6u);
  EXPECT_EQ(r.seed, 5u);
  EXPECT_DOUBLE_EQ(r.family_asr.at("ALL"), 0.5 * (r.asr.at("t_cnn") + r.asr.at("t_vit")));
  EXPECT_DOUBLE_EQ(r.family_asr.at("CNN"), r.asr.at("t_cnn"));
  EXPECT_DOUBLE_EQ(r.family_asr.at("VIT"), r.asr.at("t_vit"));
}

TEST(Harness, MaskedAccuracyTableShape) {
  Bench b;
  const std::vector<double> ratios{0.0, 0.5, 1.0};
  const auto t = eval::masked_accuracy_experiment(b.surrogates[0], b.targets, ratios, b.data, 3);
  ASSERT_EQ(t.accuracy.size(), 3u);
  ASSERT_EQ(t.targets.size(), 2u);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(t.accuracy[0][j], t.clean[j]);
  for (const auto& row : t.accuracy)
    for (double a : row) {
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 1.0);
    }
}

TEST(Harness, OverlapMatrixIsSymmetricWithUnitDiagonal) {
  Bench b;
  const auto m = eval::overlap_experiment(b.surrogates, b.data, 0.6f);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_DOUBLE_EQ(m[0][0], 1.0);
  EXPECT_DOUBLE_EQ(m[0][1], m[1][0]);
}

TEST(Harness, AblationGrids) {
  AttackConfig base;
  const auto eta = eval::ablation_grid(eval::AblationKind::EtaSweep, base, std::vector<double>{0.2, 0.8});
  ASSERT_EQ(eta.size(), 2u);
  EXPECT_FLOAT_EQ(eta[1].config.threshold, 0.8f);
  const auto meta = eval::ablation_grid(eval::AblationKind::MetaComponents, base, {});
  ASSERT_EQ(meta.size(), 4u);
  EXPECT_TRUE(meta[1].config.drop_meta_train);
  EXPECT_TRUE(meta[2].config.drop_meta_test);
  EXPECT_TRUE(meta[3].config.drop_gso);
  EXPECT_EQ(eval::ablation_grid(eval::AblationKind::SelectionStrategy, base, {}).size(), 4u);
  EXPECT_EQ(eval::ablation_grid(eval::AblationKind::ExtractedArea, base, {}).size(), 3u);
  EXPECT_EQ(eval::ablation_grid(eval::AblationKind::Padding, base, {}).size(), 3u);
  const auto lam = eval::ablation_grid(eval::AblationKind::LambdaSweep, base, {});
  EXPECT_EQ(lam.size(), 4u);
  EXPECT_THROW(eval::ablation_grid(eval::AblationKind::BetaSweep, base, std::vector<double>{-1.0}), ConfigError);
  EXPECT_EQ(eval::ablation_kind_from_string(eval::to_string(eval::AblationKind::BetaSweep)), eval::AblationKind::BetaSweep);
}

TEST(Harness, SampleKeepsOnlyCorrectlyClassified) {
  const auto dir = fresh_dir("namea_sample");
  const auto batch = data::generate_synthetic(4, 9);
  data::write_dataset(dir, batch);
  std::vector<model::ModelHandle> s;
  s.push_back(toy::handle("s", toy::cnn({{4, 2, false}, {8, 2, false}}, 3, 32, 10)));
  const auto sample = eval::sample_dataset(dir, 2, 1, s);
  const auto pred = eval::predict(s[0], sample.images);
  EXPECT_EQ(pred, sample.labels);
  EXPECT_LE(sample.size(), 20u);
  const auto again = eval::sample_dataset(dir, 2, 1, s);
  EXPECT_EQ(again.tags, sample.tags);
}
