// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "thermocal/errors.hpp"
#include "thermocal/image.hpp"

using namespace thermocal;

TEST(Image, BilinearSample) {
  Image img(2, 2, std::vector<double>{0.0, 1.0, 0.5, 0.25});
  EXPECT_DOUBLE_EQ(img.sample(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(img.sample(1.0, 1.0), 0.25);
  EXPECT_DOUBLE_EQ(img.sample(0.5, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(img.sample(0.5, 0.5), (0.0 + 1.0 + 0.5 + 0.25) / 4.0);
  EXPECT_DOUBLE_EQ(img.sample(-3.0, 5.0), 0.5);
}

TEST(Image, DimensionMismatchThrows) {
  EXPECT_THROW(Image(2, 2, std::vector<double>(3)), ContractViolation);
}

TEST(Frame, RejectsOutOfRange) {
  Frame f{0, Image(2, 1, std::vector<double>{0.2, 1.2})};
  EXPECT_THROW(f.validate(), DataError);
}

TEST(Pgm, EightBitRoundTrip) {
  const auto dir = fixtures::scratch_dir("pgm8");
  Image img(3, 2);
  for (int k = 0; k < 6; ++k) img.pixels()[k] = k * 51 / 255.0;
  write_pgm(dir / "a.pgm", img);
  const Image back = read_pgm(dir / "a.pgm");
  ASSERT_EQ(back.width(), 3);
  ASSERT_EQ(back.height(), 2);
  for (int k = 0; k < 6; ++k) EXPECT_DOUBLE_EQ(back.pixels()[k], img.pixels()[k]);
  EXPECT_EQ(fixtures::slurp(dir / "a.pgm").substr(0, 11), "P5\n3 2\n255\n");
}

TEST(Pgm, SixteenBitAndComments) {
  const auto dir = fixtures::scratch_dir("pgm16");
  std::string data = "P5\n# comment\n2 1\n65535\n";
  data += std::string{'\xff', '\xff', '\x00', '\x00'};
  fixtures::spit(dir / "b.pgm", data);
  const Image img = read_pgm(dir / "b.pgm");
  EXPECT_DOUBLE_EQ(img(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(img(1, 0), 0.0);
}

TEST(Pgm, Errors) {
  const auto dir = fixtures::scratch_dir("pgmbad");
  EXPECT_THROW(read_pgm(dir / "missing.pgm"), DataError);
  fixtures::spit(dir / "p2.pgm", "P2\n1 1\n255\n0\n");
  EXPECT_THROW(read_pgm(dir / "p2.pgm"), DataError);
  fixtures::spit(dir / "short.pgm", "P5\n4 4\n255\nab");
  EXPECT_THROW(read_pgm(dir / "short.pgm"), DataError);
}

TEST(ListFrames, LexicographicOrder) {
  const auto dir = fixtures::scratch_dir("listing");
  for (const char* name : {"f10.pgm", "f02.pgm", "f01.pgm", "notes.txt"}) fixtures::spit(dir / name, "");
  const auto frames = list_frames(dir);
  ASSERT_EQ(frames.size(), 3u);
  EXPECT_EQ(frames[0].filename(), "f01.pgm");
  EXPECT_EQ(frames[1].filename(), "f02.pgm");
  EXPECT_EQ(frames[2].filename(), "f10.pgm");
  EXPECT_THROW(list_frames(dir / "nope"), DataError);
}
