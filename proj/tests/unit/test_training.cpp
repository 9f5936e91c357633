#include <fstream>
#include <iterator>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "depthcod/training.hpp"
#include "expect_error.hpp"
#include "fixtures.hpp"

using namespace depthcod;
namespace fs = std::filesystem;

namespace {

data::Batch first_batch(const fs::path& root, int size = 64, int count = 2) {
  const auto m = data::load_manifest(root);
  data::LoadOptions opt;
  opt.size = size;
  std::vector<data::Sample> samples;
  for (int i = 0; i < count; ++i) samples.push_back(data::load_sample(m, i, opt));
  return data::collate(samples);
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

class TrainingTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fixture::TempDir("train");
    root_ = fixture::toy_dataset(*dir_, 6);
  }
  static void TearDownTestSuite() { delete dir_; }
  static fixture::TempDir* dir_;
  static fs::path root_;
};
fixture::TempDir* TrainingTest::dir_ = nullptr;
fs::path TrainingTest::root_;

TEST_F(TrainingTest, FullStepReportsEverything) {
  Trainer t(fixture::tiny_config(ModelVariant::Full));
  const auto r = t.step(first_batch(root_));
  for (const auto& v : {r.l_rgb, r.l_rgbd, r.l_cod, r.l_depth, r.l_adv, r.l_gen, r.l_dis}) {
    ASSERT_TRUE(v.has_value());
    EXPECT_TRUE(std::isfinite(*v));
    EXPECT_GE(*v, 0.0);
  }
  EXPECT_NEAR(*r.l_gen, *r.l_cod + *r.l_depth + 0.1 * *r.l_adv, 1e-6);
  EXPECT_EQ(t.global_step(), 1);
}

TEST_F(TrainingTest, ZeroAdversarialWeight) {
  auto cfg = fixture::tiny_config(ModelVariant::Full);
  cfg.lambda_adv = 0;
  Trainer t(cfg);
  const auto r = t.step(first_batch(root_));
  EXPECT_EQ(static_cast<float>(*r.l_gen), static_cast<float>(*r.l_cod) + static_cast<float>(*r.l_depth));
}

TEST_F(TrainingTest, ReducedStepComponents) {
  const auto batch = first_batch(root_);
  auto report = [&](ModelVariant v) {
    Trainer t(fixture::tiny_config(v));
    return t.step(batch);
  };
  const auto base = report(ModelVariant::Base);
  EXPECT_TRUE(base.l_rgb && base.l_cod && base.l_gen);
  EXPECT_FALSE(base.l_depth || base.l_rgbd || base.l_adv || base.l_dis);
  EXPECT_EQ(*base.l_gen, *base.l_rgb);

  const auto ade = report(ModelVariant::ADE);
  EXPECT_TRUE(ade.l_depth);
  EXPECT_FALSE(ade.l_rgbd || ade.l_adv);
  EXPECT_NEAR(*ade.l_gen, *ade.l_rgb + *ade.l_depth, 1e-6);

  const auto ad = report(ModelVariant::A_D);
  EXPECT_TRUE(ad.l_rgb && ad.l_rgbd && ad.l_depth);
  EXPECT_FALSE(ad.l_adv || ad.l_dis);
  EXPECT_NEAR(*ad.l_cod, *ad.l_rgb + *ad.l_rgbd, 1e-6);
  EXPECT_NEAR(*ad.l_gen, *ad.l_cod + *ad.l_depth, 1e-6);

  for (const auto v : {ModelVariant::EarlyFusion, ModelVariant::LateFusion}) {
    const auto r = report(v);
    EXPECT_TRUE(r.l_rgb);
    EXPECT_FALSE(r.l_depth || r.l_rgbd || r.l_adv) << to_string(v);
  }
  const auto cross = report(ModelVariant::CrossFusion);
  EXPECT_TRUE(cross.l_rgb && cross.l_rgbd);
  EXPECT_FALSE(cross.l_depth || cross.l_adv);
  EXPECT_GT(*cross.l_cod, *cross.l_rgb + *cross.l_rgbd);
}

TEST_F(TrainingTest, CrossFusionDepthRegressionFlag) {
  auto cfg = fixture::tiny_config(ModelVariant::CrossFusion);
  cfg.cross_depth_loss = true;
  Trainer t(cfg);
  const auto r = t.step(first_batch(root_));
  ASSERT_TRUE(r.l_depth);
  EXPECT_NEAR(*r.l_cod, *r.l_rgb + *r.l_rgbd, 1e-6);
  EXPECT_NEAR(*r.l_gen, *r.l_cod + *r.l_depth, 1e-6);
}

TEST_F(TrainingTest, IdenticalSeedsIdenticalReports) {
  const auto batch = first_batch(root_);
  for (const auto v : {ModelVariant::Full, ModelVariant::A_D}) {
    Trainer a(fixture::tiny_config(v)), b(fixture::tiny_config(v));
    for (int i = 0; i < 2; ++i) {
      const auto ra = a.step(batch), rb = b.step(batch);
      EXPECT_EQ(*ra.l_gen, *rb.l_gen);
      EXPECT_EQ(ra.l_dis, rb.l_dis);
    }
  }
}

TEST_F(TrainingTest, AlternationTouchesOneNetworkAtATime) {
  Trainer t(fixture::tiny_config(ModelVariant::Full));
  auto snap = [](const torch::nn::Module& m) {
    std::vector<torch::Tensor> out;
    for (const auto& p : m.parameters()) out.push_back(p.detach().clone());
    return out;
  };
  auto same = [](const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!torch::equal(a[i], b[i])) return false;
    return true;
  };
  auto gen0 = snap(*t.model().generator), dis0 = snap(*t.model().discriminator);
  std::vector<std::string> events;
  t.set_observer([&](StepPhase phase) {
    const auto gen1 = snap(*t.model().generator), dis1 = snap(*t.model().discriminator);
    if (phase == StepPhase::GeneratorUpdated) {
      events.push_back(same(dis0, dis1) && !same(gen0, gen1) ? "g-ok" : "g-bad");
    } else {
      events.push_back(same(gen0, gen1) && !same(dis0, dis1) ? "d-ok" : "d-bad");
    }
    gen0 = gen1;
    dis0 = dis1;
  });
  const auto batch = first_batch(root_);
  for (int i = 0; i < 3; ++i) t.step(batch);
  EXPECT_EQ(events, (std::vector<std::string>{"g-ok", "d-ok", "g-ok", "d-ok", "g-ok", "d-ok"}));
}

TEST_F(TrainingTest, NonFiniteLossAborts) {
  Trainer t(fixture::tiny_config(ModelVariant::ADE));
  auto batch = first_batch(root_);
  batch.image.fill_(std::numeric_limits<float>::quiet_NaN());
  try {
    t.step(batch);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
    EXPECT_NE(std::string(e.what()).find("l_rgb="), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("l_depth="), std::string::npos);
  }
}

TEST_F(TrainingTest, StepKindMatchesVariant) {
  Trainer full(fixture::tiny_config(ModelVariant::Full));
  EXPECT_DCOD_ERROR(full.reduced_step(first_batch(root_)), ErrorCode::VariantUnsupported);
  Trainer base(fixture::tiny_config(ModelVariant::Base));
  EXPECT_DCOD_ERROR(base.train_step(first_batch(root_)), ErrorCode::VariantUnsupported);
  EXPECT_DCOD_ERROR(base.discriminator_step(first_batch(root_)), ErrorCode::VariantUnsupported);
}

TEST_F(TrainingTest, ZeroEpochsWritesInitialCheckpointOnly) {
  fixture::TempDir out;
  auto cfg = fixture::tiny_config(ModelVariant::Base);
  cfg.epochs = 0;
  cfg.data_root = root_;
  cfg.out_dir = out.path();
  const auto r = train(cfg);
  EXPECT_TRUE(r.rows.empty());
  EXPECT_TRUE(fs::exists(out / "ckpt/epoch_000.ckpt"));
  EXPECT_TRUE(fs::exists(out / "ckpt/latest.ckpt"));
  EXPECT_EQ(lines(out / "losses.csv"), (std::vector<std::string>{loss_csv_header()}));
  EXPECT_TRUE(fs::exists(out / "config.txt"));
}

TEST_F(TrainingTest, EmptyDatasetRejected) {
  fixture::TempDir out;
  for (auto sub : {"Images", "Depth", "GT"}) fs::create_directories(out / "data" / sub);
  auto cfg = fixture::tiny_config(ModelVariant::Base);
  cfg.data_root = out / "data";
  cfg.out_dir = out / "run";
  EXPECT_DCOD_ERROR(train(cfg), ErrorCode::EmptyDataset);
}

TEST_F(TrainingTest, RunWritesCurveAndCheckpoints) {
  fixture::TempDir out;
  auto cfg = fixture::tiny_config(ModelVariant::A_D);
  cfg.epochs = 2;
  cfg.data_root = root_;
  cfg.out_dir = out.path();
  const auto r = train(cfg);
  const auto csv = lines(r.loss_csv);
  ASSERT_EQ(csv.size(), 1u + 6u);  // 6 samples, batch 2, 2 epochs
  EXPECT_EQ(csv[0], "epoch,step,l_rgb,l_rgbd,l_cod,l_depth,l_adv,l_gen,l_dis");
  EXPECT_EQ(csv[1].rfind("1,1,", 0), 0u);
  EXPECT_EQ(csv[6].rfind("2,6,", 0), 0u);
  EXPECT_NE(csv[1].find(",,"), std::string::npos);  // l_adv absent
  for (auto name : {"epoch_000.ckpt", "epoch_001.ckpt", "epoch_002.ckpt", "latest.ckpt"})
    EXPECT_TRUE(fs::exists(out / "ckpt" / name)) << name;
  TrainConfig loaded;
  auto model = load_model(r.final_checkpoint, &loaded);
  EXPECT_EQ(loaded.to_pairs(), cfg.to_pairs());
  EXPECT_EQ(load_checkpoint(r.final_checkpoint).epoch, 2);
}

TEST_F(TrainingTest, ResumeMatchesUninterrupted) {
  fixture::TempDir a, b;
  auto cfg = fixture::tiny_config(ModelVariant::Full);
  cfg.data_root = root_;
  cfg.epochs = 2;
  cfg.out_dir = a.path();
  train(cfg);

  auto first = cfg;
  first.out_dir = b.path();
  first.epochs = 1;
  train(first);
  auto rest = cfg;
  rest.out_dir = b.path();
  train(rest, b / "ckpt/epoch_001.ckpt");
  EXPECT_EQ(slurp(a / "losses.csv"), slurp(b / "losses.csv"));
  const auto ca = load_checkpoint(a / "ckpt/latest.ckpt"), cb = load_checkpoint(b / "ckpt/latest.ckpt");
  ASSERT_EQ(ca.tensors.size(), cb.tensors.size());
  for (std::size_t i = 0; i < ca.tensors.size(); ++i)
    EXPECT_TRUE(torch::equal(ca.tensors[i].second, cb.tensors[i].second)) << ca.tensors[i].first;
}

TEST_F(TrainingTest, SnapshotRestoreRoundTrip) {
  Trainer a(fixture::tiny_config(ModelVariant::Full));
  const auto batch = first_batch(root_);
  a.step(batch);
  const auto snap = a.snapshot();
  auto cfg = fixture::tiny_config(ModelVariant::Full);
  cfg.seed = 99;  // different init, overwritten by restore
  Trainer b(cfg);
  b.restore(snap);
  EXPECT_EQ(b.global_step(), 1);
  const auto ra = a.step(batch), rb = b.step(batch);
  EXPECT_EQ(*ra.l_gen, *rb.l_gen);
  EXPECT_EQ(*ra.l_dis, *rb.l_dis);
}

TEST_F(TrainingTest, MaxStepsStopsMidEpoch) {
  auto cfg = fixture::tiny_config(ModelVariant::Base);
  cfg.max_steps = 2;
  Trainer t(cfg);
  const auto rows = t.run_epoch(data::load_manifest(root_));
  EXPECT_EQ(rows.size(), 2u);
  EXPECT_TRUE(t.reached_max_steps());
}

TEST(LossCsv, FormatsAbsentAsEmpty) {
  LossRow row;
  row.epoch = 3;
  row.step = 12;
  row.report.l_rgb = 0.5;
  row.report.l_gen = 0.25;
  EXPECT_EQ(format_loss_row(row), "3,12,0.5,,,,,0.25,");
}
