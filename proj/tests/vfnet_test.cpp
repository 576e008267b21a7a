#include "unitflow/vfnet/objective.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

using namespace unitflow;
using namespace unitflow::vfnet;

namespace {

ModelConfig gradcheck_config(CondMode mode) {
  ModelConfig c;
  c.layers = 2;
  c.heads = 2;
  c.dim = 32;
  c.unit_emb_dim = 16;
  c.time_freq_dim = 16;
  c.unit_vocab = 6;
  c.max_frames = 16;
  c.cond_mode = mode;
  return c;
}

template <typename T>
ObjectiveBatch<T> random_batch(const ModelConfig& cfg, std::mt19937_64& rng, std::vector<int> lengths, int frames) {
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> unit(0, cfg.filler_id());
  ObjectiveBatch<T> b;
  b.input.batch = static_cast<int>(lengths.size());
  b.input.frames = frames;
  b.input.lengths = lengths;
  const auto rows = static_cast<Eigen::Index>(lengths.size()) * frames;
  auto rnd = [&](Eigen::Index r, Eigen::Index c) {
    Mat<T> m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(n01(rng));
    return m;
  };
  b.input.x_t = rnd(rows, cfg.mel_dim);
  b.input.x_ctx = rnd(rows, cfg.mel_dim);
  b.target = rnd(rows, cfg.mel_dim);
  b.cond_mel = rnd(rows, cfg.mel_dim);
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    b.input.t.push_back(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    for (int f = 0; f < frames; ++f) {
      const bool real = f < lengths[s];
      b.unit_ids.push_back(real ? unit(rng) : cfg.batch_pad_id());
      b.cond_valid.push_back(f < lengths[s] - 2 ? 1 : 0);
      b.loss_mask.push_back(real && f >= 1 ? 1 : 0);
    }
  }
  return b;
}

template <typename T>
std::size_t closed_form_count(const ModelConfig& c) {
  const std::size_t d = c.dim, e = c.unit_emb_dim, mel = c.mel_dim, ff = c.ff_dim(), f = c.time_freq_dim;
  const std::size_t per_layer = 2 * d + (d * 3 * d + 3 * d) + (d * d + d) + 2 * d + (d * ff + ff) + (ff * d + d);
  const std::size_t cond = c.cond_mode == CondMode::units ? c.unit_vocab * e : mel * e + 2 * e;
  return cond + (2 * mel + e) * d + d + (f * d + d) + (d * d + d) + c.layers * per_layer + 2 * d + d * mel + mel;
}

}  // namespace

TEST(Vfnet, EmbedUnitsLooksUpRows) {
  const auto cfg = ModelConfig::tiny(12);
  const auto p = init_params<float>(cfg, 3);
  const Mat<float> e = embed_units(std::vector<int>{0, 0, cfg.filler_id()}, p, cfg);
  EXPECT_EQ(e.rows(), 3);
  EXPECT_EQ(e.cols(), 512);
  EXPECT_TRUE(e.row(0) == e.row(1));
  EXPECT_TRUE(e.row(2) == p.unit_table.row(cfg.filler_id()));
  for (int k = 0; k < cfg.codebook_size(); ++k) EXPECT_FALSE(e.row(2) == p.unit_table.row(k));
  try {
    embed_units(std::vector<int>{cfg.unit_vocab}, p, cfg);
    FAIL() << "expected InvalidInput";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::InvalidInput);
  }
}

TEST(Vfnet, FreshModelPredictsZeroFieldWithMelShape) {
  const auto cfg = ModelConfig::tiny(12);
  const auto p = init_params<float>(cfg, 11);
  const VectorFieldNet<float> net(cfg);
  std::mt19937_64 rng(5);
  for (int t : {1, 7, 64}) {
    std::vector<int> ids(static_cast<std::size_t>(t), 3);
    const Mat<float> xt = Mat<float>::Random(t, 80), ctx = Mat<float>::Random(t, 80);
    const Mat<float> y = forward(xt, ctx, embed_units(ids, p, cfg), 0.3, p, net);
    EXPECT_EQ(y.rows(), t);
    EXPECT_EQ(y.cols(), 80);
    EXPECT_EQ(y.cwiseAbs().maxCoeff(), 0.0f);
  }
}

TEST(Vfnet, ForwardIsBitStable) {
  auto cfg = gradcheck_config(CondMode::units);
  auto p = init_params<float>(cfg, 1);
  p.head_w.setRandom();
  const VectorFieldNet<float> net(cfg);
  std::mt19937_64 rng(2);
  auto b = random_batch<float>(cfg, rng, {8, 5}, 8);
  b.input.cond = embed_condition(b, p, cfg);
  const Mat<float> y1 = net.forward(p, b.input);
  const Mat<float> y2 = net.forward(p, b.input);
  EXPECT_TRUE(y1 == y2);
}

TEST(Vfnet, InitIsDeterministicAndCountMatchesArchitecture) {
  const auto cfg = gradcheck_config(CondMode::units);
  const auto a = init_params<double>(cfg, 99), b = init_params<double>(cfg, 99);
  std::vector<Mat<double>> ta, tb;
  a.visit([&](const std::string&, const Mat<double>& m) { ta.push_back(m); });
  b.visit([&](const std::string&, const Mat<double>& m) { tb.push_back(m); });
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_TRUE(ta[i] == tb[i]);
  EXPECT_EQ(a.parameter_count(), closed_form_count<double>(cfg));
  EXPECT_TRUE(a.head_w.isZero(0.0));
  EXPECT_TRUE(a.head_b.isZero(0.0));

  const auto mel_cfg = gradcheck_config(CondMode::mel_input);
  EXPECT_EQ(init_params<double>(mel_cfg, 1).parameter_count(), closed_form_count<double>(mel_cfg));
}

TEST(Vfnet, RejectsIndivisibleHeads) {
  ModelConfig cfg;
  cfg.dim = 30;
  cfg.heads = 4;
  try {
    init_params<float>(cfg, 0);
    FAIL() << "expected InvalidInput";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::InvalidInput);
  }
}

TEST(Vfnet, RejectsMismatchedShapes) {
  const auto cfg = ModelConfig::tiny(12);
  const auto p = init_params<float>(cfg, 0);
  const VectorFieldNet<float> net(cfg);
  const Mat<float> xt = Mat<float>::Zero(5, 80), ctx = Mat<float>::Zero(4, 80);
  EXPECT_THROW(forward(xt, ctx, embed_units(std::vector<int>(5, 0), p, cfg), 0.5, p, net), Error);
  const Mat<float> big = Mat<float>::Zero(cfg.max_frames + 1, 80);
  EXPECT_THROW(forward(big, big, embed_units(std::vector<int>(cfg.max_frames + 1, 0), p, cfg), 0.5, p, net),
               Error);
}

// Analytic gradients of the masked field loss against central differences,
// relative error per parameter group.
void expect_gradients_match(const ModelConfig& cfg) {
  auto p = init_params<double>(cfg, 7);
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n01(0.0, 0.3);
  // move off the zero-initialized head so every group receives gradient
  for (Eigen::Index i = 0; i < p.head_w.size(); ++i) p.head_w.data()[i] = n01(rng);
  const VectorFieldNet<double> net(cfg);
  auto batch = random_batch<double>(cfg, rng, {8, 6}, 8);

  auto grads = p.zeros_like();
  loss_and_grad(net, p, batch, &grads);

  std::map<std::string, Mat<double>*> analytic;
  grads.visit([&](const std::string& n, Mat<double>& m) { analytic[n] = &m; });

  const double eps = 1e-4;
  double worst = 0.0;
  p.visit([&](const std::string& name, Mat<double>& m) {
    const Mat<double>& ga = *analytic.at(name);
    std::uniform_int_distribution<Eigen::Index> pick(0, m.size() - 1);
    double num2 = 0.0, diff2 = 0.0, ana2 = 0.0;
    for (int s = 0; s < 12; ++s) {
      Eigen::Index i = pick(rng);
      if (name == "unit_table") i = batch.unit_ids[static_cast<std::size_t>(s % 14)] * m.cols() + pick(rng) % m.cols();
      const double keep = m.data()[i];
      m.data()[i] = keep + eps;
      const double up = loss_and_grad<double>(net, p, batch, nullptr);
      m.data()[i] = keep - eps;
      const double down = loss_and_grad<double>(net, p, batch, nullptr);
      m.data()[i] = keep;
      const double numeric = (up - down) / (2 * eps);
      num2 += numeric * numeric;
      ana2 += ga.data()[i] * ga.data()[i];
      diff2 += (numeric - ga.data()[i]) * (numeric - ga.data()[i]);
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(num2), std::sqrt(ana2), 1e-12});
    worst = std::max(worst, rel);
    EXPECT_LT(rel, 1e-3) << name;
    EXPECT_GT(std::sqrt(ana2), 0.0) << name << " received no gradient";
  });
  ::testing::Test::RecordProperty("worst_relative_error", std::to_string(worst));
}

class GradientCheck : public ::testing::TestWithParam<CondMode> {};

TEST_P(GradientCheck, AnalyticMatchesFiniteDifferences) { expect_gradients_match(gradcheck_config(GetParam())); }

TEST(Vfnet, DecoupledHeadWidthGradients) {
  auto cfg = gradcheck_config(CondMode::units);
  cfg.heads = 3;
  cfg.head_width = 6;
  expect_gradients_match(cfg);
}

TEST(Vfnet, SmallPresetUsesSixHeadsOfWidth64) {
  auto cfg = ModelConfig::paper_small(512);
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.attn_dim(), 384);
  cfg.layers = 1;
  const auto p = init_params<float>(cfg, 0);
  EXPECT_EQ(p.layers[0].qkv_w.rows(), 512);
  EXPECT_EQ(p.layers[0].qkv_w.cols(), 3 * 384);
  EXPECT_EQ(p.layers[0].out_w.rows(), 384);
  EXPECT_EQ(p.layers[0].out_w.cols(), 512);
  EXPECT_EQ(ModelConfig::paper_base(512).attn_dim(), 768);
}

INSTANTIATE_TEST_SUITE_P(BothConditionModes, GradientCheck,
                         ::testing::Values(CondMode::units, CondMode::mel_input));
