#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "phit/checkpoint.hpp"

using namespace phit;
namespace fs = std::filesystem;

namespace {

BackboneConfig small_config() {
  BackboneConfig c;
  c.filters_per_branch = 4;
  c.bottleneck_size = 4;
  c.kernel_sizes = {8, 4, 2};
  return c;
}

Batch<float> batch_of(std::size_t B, std::size_t L, std::size_t sources) {
  Batch<float> b;
  const auto v = oracle::random_values(B * L, 77);
  b.inputs = Tensor<float>({B, 1, L}, std::vector<float>(v.begin(), v.end()));
  for (std::size_t i = 0; i < B; ++i) {
    b.dataset_ids.push_back(static_cast<int>(i % sources));
    b.labels.push_back(static_cast<int>(i % sources));
  }
  return b;
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("phit_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST_F(CheckpointTest, RoundTripIsByteIdenticalAndLogitsMatch) {
  auto g = build_pretext_model<float>(small_config(), 3, 4, {"a", "b", "c"});
  const auto batch = batch_of(6, 24, 3);
  forward(g, batch, Mode::Train);  // move the running statistics away from their init
  const auto before = forward(g, batch, Mode::Eval).value();
  CheckpointMeta meta{4, 17, 0.123456789012345678, {{"note", "x"}}};
  save_checkpoint((dir_ / "one").string(), g, meta);
  auto loaded = load_checkpoint<float>((dir_ / "one").string());
  EXPECT_EQ(loaded.model.output_names, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(loaded.meta.epoch, 17);
  EXPECT_EQ(loaded.meta.train_loss, 0.123456789012345678);
  EXPECT_EQ(loaded.meta.extra.at("note"), "x");
  EXPECT_EQ(forward(loaded.model, batch, Mode::Eval).value(), before);
  save_checkpoint((dir_ / "two").string(), loaded.model, loaded.meta);
  EXPECT_EQ(oracle::read_bytes(dir_ / "one.bin"), oracle::read_bytes(dir_ / "two.bin"));
  auto without_blob_name = [](std::string text) {
    const auto at = text.find("blob=");
    return text.erase(at, text.find('\n', at) - at);
  };
  EXPECT_EQ(without_blob_name(oracle::read_text(dir_ / "one.manifest")),
            without_blob_name(oracle::read_text(dir_ / "two.manifest")));
}

TEST_F(CheckpointTest, FinetuneKindSurvives) {
  auto pt = build_pretext_model<float>(small_config(), 2, 1);
  auto ft = build_finetune_model(pt, 1, 3, 2);
  save_checkpoint((dir_ / "ft").string(), ft, {});
  auto loaded = load_checkpoint<float>((dir_ / "ft").string());
  EXPECT_EQ(loaded.model.kind, ModelKind::Finetune);
  Batch<float> b = batch_of(3, 16, 1);
  b.dataset_ids.clear();
  EXPECT_EQ(forward(loaded.model, b, Mode::Eval).value(), forward(ft, b, Mode::Eval).value());
}

TEST_F(CheckpointTest, ManifestIsReadableText) {
  auto g = build_baseline_model<float>(small_config(), 2, 0);
  save_checkpoint((dir_ / "m").string(), g, {});
  const auto text = oracle::read_text(dir_ / "m.manifest");
  EXPECT_NE(text.find("dtype=f32"), std::string::npos);
  EXPECT_NE(text.find("endianness=little"), std::string::npos);
  EXPECT_NE(text.find("tensor.module1.conv0.weight=4x1x8@0"), std::string::npos);
  EXPECT_NE(text.find("tensor.head.bias=2@"), std::string::npos);
}

TEST_F(CheckpointTest, CorruptionIsReported) {
  auto g = build_baseline_model<float>(small_config(), 2, 0);
  const auto base = (dir_ / "c").string();
  save_checkpoint(base, g, {});
  fs::resize_file(base + ".bin", 16);
  EXPECT_THROW(load_checkpoint<float>(base), CheckpointError);
  EXPECT_THROW(load_checkpoint<float>((dir_ / "missing").string()), CheckpointError);
}
