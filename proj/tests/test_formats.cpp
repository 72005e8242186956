#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "brushplan/dataset.hpp"
#include "brushplan/image_io.hpp"
#include "brushplan/numeric_text.hpp"
#include "brushplan/planner.hpp"
#include "brushplan/stroke_model.hpp"
#include "support.hpp"

using namespace brushplan;
namespace fs = std::filesystem;

namespace {

std::string plan_text(const Plan& p, const std::vector<StrokeParams>* realized = nullptr) {
  std::ostringstream out;
  write_plan(out, p, realized);
  return out.str();
}

std::string model_bytes(const StrokeShapeModel& m) {
  std::ostringstream out(std::ios::binary);
  save_model(m, out);
  return out.str();
}

Plan awkward_plan() {
  std::mt19937_64 rng(1);
  auto p = init_plan(30, CanvasGeometry{}, rng);
  // values without short decimal forms
  p.strokes[0].x = 1.0 / 3.0;
  p.strokes[0].theta = -std::nextafter(3.141592653589793, 0.0);
  p.strokes[1].color = {0.1, 0.2, 0.30000000000000004};
  p.strokes[2].shape.b = -0.0;
  p.strokes[3].y = std::numeric_limits<double>::denorm_min();
  return p;
}

}  // namespace

TEST(NumericText, ShortestRoundTrip) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, double(i % 40) - 20);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_THROW(parse_double("1.5x", "width"), std::runtime_error);
  EXPECT_THROW(parse_double("", "width"), std::runtime_error);
}

TEST(PlanFile, ParseSerializeIsBitExact) {
  const auto p = awkward_plan();
  const auto text = plan_text(p);
  std::istringstream in(text);
  const auto q = read_plan(in);
  EXPECT_EQ(q, p);
  EXPECT_TRUE(std::signbit(q.strokes[2].shape.b));
  EXPECT_EQ(plan_text(q), text);
  EXPECT_EQ(text.substr(0, 6), "PLAN1 ");
}

TEST(PlanFile, RealizedSectionRoundTrips) {
  const auto p = awkward_plan().slice(0, 4);
  std::vector<StrokeParams> realized = p.strokes;
  realized[1].x += 0.01;
  const auto text = plan_text(p, &realized);
  std::istringstream in(text);
  std::vector<StrokeParams> back;
  EXPECT_EQ(read_plan(in, &back), p);
  EXPECT_EQ(back, realized);
  std::istringstream again(text);
  EXPECT_EQ(read_plan(again), p);  // readers that skip comments see the plain plan
}

TEST(PlanFile, RejectsMalformedInput) {
  std::istringstream wrong_count("PLAN1 64 64 0.1 0.1 2\n0.5 0.03 0 0.5 0.5 0 0 0 0\n");
  EXPECT_THROW(read_plan(wrong_count), std::runtime_error);
  std::istringstream bad_magic("PLAN2 64 64 0.1 0.1 0\n");
  EXPECT_THROW(read_plan(bad_magic), std::runtime_error);
  std::istringstream short_line("PLAN1 64 64 0.1 0.1 1\n0.5 0.03 0 0.5\n");
  EXPECT_THROW(read_plan(short_line), std::runtime_error);
}

TEST(ModelFile, ByteIdenticalRoundTrip) {
  auto m = StrokeShapeModel::initialized(5);
  m.geometry.meters_per_pixel = 0.0013;
  const auto bytes = model_bytes(m);
  EXPECT_EQ(bytes.substr(0, 4), "P2S1");
  std::istringstream in(bytes, std::ios::binary);
  const auto back = load_model(in);
  EXPECT_EQ(back.parameters(), m.parameters());
  EXPECT_EQ(back.geometry, m.geometry);
  EXPECT_EQ(model_bytes(back), bytes);
}

TEST(ModelFile, HeaderIsLittleEndian) {
  const auto bytes = model_bytes(StrokeShapeModel::zeros());
  // tensor count, then rank and dims of the first weight [64, 3]
  const auto u32 = [&](std::size_t at) {
    return std::uint32_t(std::uint8_t(bytes[at])) | std::uint32_t(std::uint8_t(bytes[at + 1])) << 8 |
           std::uint32_t(std::uint8_t(bytes[at + 2])) << 16 | std::uint32_t(std::uint8_t(bytes[at + 3])) << 24;
  };
  EXPECT_EQ(u32(4), 8u);
  EXPECT_EQ(u32(8), 2u);
}

TEST(ModelFile, RejectsCorruption) {
  auto bytes = model_bytes(StrokeShapeModel::zeros());
  std::istringstream truncated(bytes.substr(0, bytes.size() - 9), std::ios::binary);
  EXPECT_THROW(load_model(truncated), std::runtime_error);
  bytes[0] = 'X';
  std::istringstream magic(bytes, std::ios::binary);
  EXPECT_THROW(load_model(magic), std::runtime_error);
}

TEST(Images, PgmAndPpmByteIdentical) {
  std::mt19937_64 rng(3);
  const auto gray = support::random_tensor({7, 11}, rng, 0, 1);
  const auto rgb = support::random_tensor({3, 5, 9}, rng, 0, 1);
  std::ostringstream g1, c1;
  write_pgm(g1, gray);
  write_ppm(c1, rgb);
  std::istringstream gi(g1.str()), ci(c1.str());
  const auto gray2 = read_pgm(gi);
  const auto rgb2 = read_ppm(ci);
  EXPECT_EQ(gray2.shape(), gray.shape());
  EXPECT_EQ(rgb2.shape(), rgb.shape());
  for (std::size_t i = 0; i < gray.size(); ++i) EXPECT_NEAR(gray2[i], gray[i], 0.5 / 255 + 1e-12);
  std::ostringstream g2, c2;
  write_pgm(g2, gray2);
  write_ppm(c2, rgb2);
  EXPECT_EQ(g2.str(), g1.str());
  EXPECT_EQ(c2.str(), c1.str());
  EXPECT_EQ(c1.str().substr(0, 3), "P6\n");
}

TEST(Images, ReadsSixteenBitAndComments) {
  std::string data = "P5\n# a comment\n2 1\n65535\n";
  data += std::string("\xff\xff\x00\x00", 4);
  std::istringstream in(data);
  const auto t = read_pgm(in);
  EXPECT_EQ(t[0], 1.0);
  EXPECT_EQ(t[1], 0.0);
  std::istringstream wrong("P6\n2 1\n255\nabc");
  EXPECT_THROW(read_pgm(wrong), std::runtime_error);
}

TEST(DatasetDir, RoundTripIsStable) {
  const auto dir = fs::temp_directory_path() / "brushplan_dataset_test";
  fs::remove_all(dir);
  const auto d = generate_dataset(6, 4);
  save_dataset(d, dir);
  const auto back = load_dataset(dir);
  ASSERT_EQ(back.size(), 6u);
  EXPECT_EQ(back.geometry, d.geometry);
  EXPECT_EQ(back.provenance, "oracle");
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(back.samples[i].shape, d.samples[i].shape);
    for (std::size_t k = 0; k < d.samples[i].stamp.size(); ++k)
      ASSERT_NEAR(back.samples[i].stamp[k], d.samples[i].stamp[k], 0.5 / 255 + 1e-12);
  }
  // after one quantizing pass the files reproduce byte for byte
  const auto dir2 = fs::temp_directory_path() / "brushplan_dataset_test2";
  fs::remove_all(dir2);
  save_dataset(back, dir2);
  const auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  EXPECT_EQ(slurp(dir / "index.tsv"), slurp(dir2 / "index.tsv"));
  EXPECT_EQ(slurp(dir / "stamp_00003.pgm"), slurp(dir2 / "stamp_00003.pgm"));
  const auto again = load_dataset(dir2);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(again.samples[i].stamp, back.samples[i].stamp);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST(DatasetDir, ImportedWithoutMetadata) {
  const auto dir = fs::temp_directory_path() / "brushplan_dataset_import";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_pgm(dir / "a.pgm", ad::Tensor({32, 64}));
  std::ofstream(dir / "index.tsv") << "h\tl\tb\tstamp\n0.5\t0.02\t0\ta.pgm\n";
  const auto d = load_dataset(dir);
  EXPECT_EQ(d.provenance, "imported");
  EXPECT_EQ(d.size(), 1u);
  EXPECT_THROW(load_dataset(dir / "missing"), std::runtime_error);
  fs::remove_all(dir);
}

TEST(Csv, LossAndDeviationLayouts) {
  const auto dir = fs::temp_directory_path();
  write_loss_csv(dir / "bp_loss.csv", {0.5, 0.25});
  write_deviation_csv(dir / "bp_dev.csv", {0.1, 0.2, 0.3});
  std::ifstream l(dir / "bp_loss.csv"), d(dir / "bp_dev.csv");
  std::string a((std::istreambuf_iterator<char>(l)), {}), b((std::istreambuf_iterator<char>(d)), {});
  EXPECT_EQ(a, "iteration,loss\n0,0.5\n1,0.25\n");
  EXPECT_EQ(b, "batch,deviation\n1,0.1\n2,0.2\n3,0.3\n");
  fs::remove(dir / "bp_loss.csv");
  fs::remove(dir / "bp_dev.csv");
}
