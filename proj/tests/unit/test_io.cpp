#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "crowdloss/error.hpp"
#include "crowdloss/io.hpp"

using namespace crowdloss;

namespace {

::testing::AssertionResult throws_at_line(const std::string& text, int line) {
  std::istringstream is(text);
  try {
    io::read_scene(is);
  } catch (const InvalidInput& e) {
    const std::string want = "line " + std::to_string(line) + ":";
    if (std::string(e.what()).rfind(want, 0) == 0) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << "message: " << e.what();
  }
  return ::testing::AssertionFailure() << "no exception";
}

}  // namespace

TEST(FormatReal, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456.789, 0.0}) {
    EXPECT_EQ(std::strtod(io::format_real(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(io::format_real(0.5), "0.5");
}

TEST(SceneIo, RoundTrip) {
  SceneConfig cfg;
  cfg.distractors = 2;
  const Scene scene = generate_scene(cfg, 4);
  std::stringstream ss;
  io::write_scene(ss, scene);
  const Scene back = io::read_scene(ss);
  EXPECT_EQ(back.width, scene.width);
  EXPECT_EQ(back.height, scene.height);
  ASSERT_EQ(back.pedestrians.size(), scene.pedestrians.size());
  for (std::size_t k = 0; k < scene.pedestrians.size(); ++k) {
    EXPECT_EQ(back.pedestrians[k].full, scene.pedestrians[k].full);
    EXPECT_EQ(back.pedestrians[k].visible, scene.pedestrians[k].visible);
  }
  ASSERT_EQ(back.distractors.size(), 2u);
  EXPECT_EQ(back.distractors[1], scene.distractors[1]);
}

TEST(SceneIo, CommentsAndErrors) {
  std::istringstream ok("# header\nextent 100 50\n\nped 0 0 10 20 0 0 10 10\n");
  EXPECT_EQ(io::read_scene(ok).pedestrians.size(), 1u);
  EXPECT_TRUE(throws_at_line("extent 100 50\nped 0 0 10\n", 2));
  EXPECT_TRUE(throws_at_line("extent 100 50\n\nwall 0 0 1 1\n", 3));
  EXPECT_TRUE(throws_at_line("extent 100 50\ndistractor 0 0 1 1 7\n", 2));
  EXPECT_TRUE(throws_at_line("extent 100 50\nped 5 0 1 1 5 0 1 1\n", 2));
  std::istringstream no_extent("ped 0 0 10 20 0 0 10 10\n");
  EXPECT_THROW(io::read_scene(no_extent), InvalidInput);
  // Visible box leaking out of the full box.
  std::istringstream leak("extent 100 50\nped 0 0 10 20 0 0 11 10\n");
  EXPECT_THROW(io::read_scene(leak), InvalidInput);
  EXPECT_THROW(io::load_scene("/nonexistent/scene.txt"), InvalidInput);
}

TEST(MapIo, RoundTrip) {
  ProbabilityMap p(3, 2, 8.0, {0.0, 0.25, 1.0, 0.1, 0.7, 1.0 / 3.0});
  std::stringstream ss;
  io::write_probability_map(ss, p);
  const ProbabilityMap q = io::read_probability_map(ss);
  EXPECT_EQ(q.width(), 3);
  EXPECT_EQ(q.stride(), 8.0);
  EXPECT_EQ(q.values(), p.values());

  TargetMap t(2, 2, 4.0);
  t.set(0, 0, CellLabel::Positive);
  t.set(1, 1, CellLabel::Ignored);
  std::stringstream ts;
  io::write_target_map(ts, t);
  const TargetMap u = io::read_target_map(ts);
  EXPECT_EQ(u.at(0, 0), CellLabel::Positive);
  EXPECT_EQ(u.at(1, 1), CellLabel::Ignored);
  EXPECT_EQ(u.at(1, 0), CellLabel::Negative);
}

TEST(MapIo, Errors) {
  std::istringstream short_map("2 2 1\n0.1 0.2 0.3\n");
  EXPECT_THROW(io::read_probability_map(short_map), InvalidInput);
  std::istringstream long_map("1 1 1\n0.1 0.2\n");
  EXPECT_THROW(io::read_probability_map(long_map), InvalidInput);
  std::istringstream out_of_range("1 1 1\n1.5\n");
  EXPECT_THROW(io::read_probability_map(out_of_range), InvalidInput);
  std::istringstream bad_label("1 1 1\nX\n");
  EXPECT_THROW(io::read_target_map(bad_label), InvalidInput);
  std::istringstream bad_header("0 1 1\n");
  EXPECT_THROW(io::read_target_map(bad_header), InvalidInput);
}

TEST(DetectionsCsv, RoundTripAndErrors) {
  const std::vector<Detection> dets{{BBox(0.1, 0.2, 3.3, 4.4), 0.9, 0}, {BBox(1, 1, 2, 2), 1.0 / 7.0, 3}};
  std::stringstream ss;
  io::write_detections_csv(ss, dets);
  const auto back = io::read_detections_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].box, dets[1].box);
  EXPECT_EQ(back[1].score, dets[1].score);
  EXPECT_EQ(back[1].scene_id, 3);

  std::istringstream bad_score("scene_id,x1,y1,x2,y2,score\n0,0,0,1,1,1.5\n");
  try {
    io::read_detections_csv(bad_score);
    FAIL() << "no exception";
  } catch (const InvalidInput& e) {
    EXPECT_EQ(std::string(e.what()).rfind("line 2:", 0), 0u) << e.what();
  }
  std::istringstream missing("0,0,0,1\n");
  EXPECT_THROW(io::read_detections_csv(missing), InvalidInput);
}

TEST(CurveCsv, Format) {
  EvalCurve c;
  c.points.push_back({0.9, 0.0, 0.5});
  std::ostringstream os;
  io::write_curve_csv(os, c);
  EXPECT_EQ(os.str(), "threshold,fppi,miss_rate\n0.90000000000000002,0,0.5\n");
}
