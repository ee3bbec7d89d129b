#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "generators.hpp"
#include "maskmatch/evaluation.hpp"
#include "maskmatch/image_io.hpp"
#include "temp_dir.hpp"

using namespace maskmatch;
using maskmatch::testing::Gen;
using maskmatch::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Plain whole-video PSNR, MAX = 1, accumulated in long double.
double scalar_psnr(const Tensor& a, const Tensor& b) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double e = static_cast<long double>(a[i]) - static_cast<long double>(b[i]);
    sum += e * e;
  }
  const long double mse = sum / static_cast<long double>(a.size());
  return static_cast<double>(10.0L * std::log10(1.0L / mse));
}

Report sample_report(Gen& gen) {
  Report r;
  const IouMatrix a = gen.planted<IouMatrix>(6, 5, 1, 4);
  const IouMatrix b = gen.planted<IouMatrix>(6, 5, 1, 4);
  r.profile = aggregate_profiles(std::vector<IouMatrix>{a, b}, AggregateMode::kMeanIou, "toy");
  r.per_video = {{"square_0", a}, {"square_1", b}};
  r.masked_psnr = {{"square_0", 23.25}, {"square_1", 1.0 / 3.0}};
  return r;
}

}  // namespace

TEST(MaskedPsnr, IdenticalIsCapped) {
  Gen gen(81);
  const Tensor v = gen.tensor({2, 3, 4, 4}, 0.0f, 1.0f);
  EXPECT_EQ(masked_psnr(v, v, gen.grid(2, 4, 4, 0.9)), kPsnrCap);
}

TEST(MaskedPsnr, ConstantTenthIsTwentyDb) {
  const Tensor src = Tensor::filled({2, 3, 4, 4}, 0.0f);
  const Tensor edited = Tensor::filled({2, 3, 4, 4}, 0.1f);
  // 0.1 is stored as float; the only deviation from 20 dB is that rounding.
  EXPECT_NEAR(masked_psnr(edited, src, BinaryGrid(2, 4, 4, true)), 20.0, 1e-6);
}

TEST(MaskedPsnrProperty, FullMaskMatchesScalarPsnr) {
  Gen gen(82);
  for (int i = 0; i < 200; ++i) {
    const Shape dims{gen.size(1, 3), gen.size(1, 3), gen.size(1, 6), gen.size(1, 6)};
    const Tensor a = gen.tensor(dims, 0.0f, 1.0f);
    const Tensor b = gen.tensor(dims, 0.0f, 1.0f);
    const BinaryGrid full(dims[0], dims[2], dims[3], true);
    ASSERT_NEAR(masked_psnr(a, b, full), scalar_psnr(a, b), 1e-9);
  }
}

TEST(MaskedPsnrProperty, IgnoresMaskedOutPixels) {
  Gen gen(83);
  for (int i = 0; i < 100; ++i) {
    const Tensor a = gen.tensor({2, 3, 5, 5}, 0.0f, 1.0f);
    Tensor b = gen.tensor({2, 3, 5, 5}, 0.0f, 1.0f);
    BinaryGrid mask = gen.grid(2, 5, 5);
    mask.set(0, 0, 0, true);
    const double before = masked_psnr(a, b, mask);
    for (std::size_t k = 0; k < b.size(); ++k) {
      const std::size_t p = k % 25, f = k / 75;
      if (!mask[f * 25 + p]) b[k] = gen.value(0.0f, 1.0f);
    }
    ASSERT_EQ(masked_psnr(a, b, mask), before);
  }
}

TEST(MaskedPsnrProperty, MonotoneDecreasingInError) {
  Gen gen(84);
  for (int i = 0; i < 100; ++i) {
    const Tensor src = gen.tensor({1, 3, 4, 4}, 0.2f, 0.8f);
    const Tensor dir = gen.tensor({1, 3, 4, 4}, -0.1f, 0.1f);
    const double s1 = gen.real(0.01, 1.0), s2 = gen.real(s1, 2.0);
    Tensor e1 = src, e2 = src;
    for (std::size_t k = 0; k < src.size(); ++k) {
      e1[k] += static_cast<float>(s1 * dir[k]);
      e2[k] += static_cast<float>(s2 * dir[k]);
    }
    const BinaryGrid mask = gen.grid(1, 4, 4, 0.7);
    if (mask.count() == 0) continue;
    ASSERT_GE(masked_psnr(e1, src, mask) + 1e-9, masked_psnr(e2, src, mask));
  }
}

TEST(MaskedPsnr, Errors) {
  const Tensor v({1, 3, 2, 2});
  try {
    masked_psnr(v, v, BinaryGrid(1, 2, 2, false));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no unedited pixels"), std::string::npos);
  }
  EXPECT_THROW(masked_psnr(v, Tensor({1, 3, 2, 3}), BinaryGrid(1, 2, 2, true)), Error);
  EXPECT_THROW(masked_psnr(v, v, BinaryGrid(1, 3, 2, true)), Error);
}

TEST(UneditedMask, TaskRule) {
  const Tensor ann({1, 2, 2}, {0.0f, 0.29f, 0.3f, 1.0f});
  const BinaryGrid keep = unedited_mask(ann, EditTask::kAttribute);
  EXPECT_TRUE(keep[0]);
  EXPECT_TRUE(keep[1]);
  EXPECT_FALSE(keep[2]);
  EXPECT_FALSE(keep[3]);
  EXPECT_EQ(unedited_mask(ann, EditTask::kShape), keep);
  EXPECT_EQ(unedited_mask(ann, EditTask::kStylization).count(), 4u);
}

TEST(Report, CsvRowsAndBytes) {
  Gen gen(85);
  const Report r = sample_report(gen);
  TempDir a("report-a"), b("report-b");
  emit_report(r, a.path());
  emit_report(r, b.path());
  const std::string lm = slurp(a / "lmmc.csv");
  EXPECT_EQ(lm.rfind("layer,cost\n", 0), 0u);
  EXPECT_EQ(std::count(lm.begin(), lm.end(), '\n'), 6);
  const std::string tm = slurp(a / "tmmc.csv");
  EXPECT_EQ(std::count(tm.begin(), tm.end(), '\n'), 7);
  for (const char* f : {"lmmc.csv", "tmmc.csv", "report.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_FALSE(std::filesystem::exists(a / "lmmc.png"));
}

TEST(Report, CsvFormat) {
  EXPECT_EQ(costs_csv("layer", {1.5, 3.0}), "layer,cost\n0,1.5\n1,3\n");
}

TEST(Report, RoundTrip) {
  Gen gen(86);
  const Report r = sample_report(gen);
  TempDir dir("report-rt");
  emit_report(r, dir.path(), true);
  EXPECT_EQ(read_report(dir / "report.json"), r);
  const Image plot = read_png(dir / "lmmc.png");
  EXPECT_EQ(plot.width, 800u);
  EXPECT_EQ(plot.height, 600u);
  EXPECT_TRUE(std::filesystem::exists(dir / "tmmc.png"));
  EXPECT_THROW(read_report(dir / "absent.json"), Error);
}
