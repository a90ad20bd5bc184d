#include <doctest.h>

#include <map>

#include "oracles.hpp"
#include "ulcerseg/postprocess.hpp"

using namespace ulcerseg;

namespace {

BinaryMask from_rows(const std::vector<std::string>& rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows[0].size());
  std::vector<std::uint8_t> v;
  for (const auto& r : rows) {
    for (char ch : r) v.push_back(ch == '#' ? 1 : 0);
  }
  return BinaryMask(h, w, std::move(v));
}

bool subset(const BinaryMask& a, const BinaryMask& b) {
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    if (a.data()[i] && !b.data()[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("binarize uses >= with the tie going to foreground") {
  CHECK(binarize(ProbMask::filled(2, 2, 0.6)).foreground_count() == 4);
  CHECK(binarize(ProbMask::filled(2, 2, 0.5)).foreground_count() == 4);
  CHECK(binarize(ProbMask::filled(2, 2, 0.4999999)).foreground_count() == 0);
  CHECK_THROWS_AS(binarize(ProbMask::filled(1, 1, 0.5), 0.0), ValidationError);
  CHECK_THROWS_AS(binarize(ProbMask::filled(1, 1, 0.5), 1.0), ValidationError);

  Rng rng(1);
  const ProbMask p = oracle::random_prob(rng, 9, 9);
  const BinaryMask b = binarize(p, 0.5);
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) CHECK(b.at(r, c) == (p.at(r, c) >= 0.5));
  }
}

TEST_CASE("binarize area is non-increasing in the threshold") {
  Rng rng(2);
  const ProbMask p = oracle::random_prob(rng, 16, 16);
  std::size_t prev = p.pixel_count() + 1;
  for (double t = 0.05; t < 1.0; t += 0.05) {
    const auto area = binarize(p, t).foreground_count();
    CHECK(area <= prev);
    prev = area;
  }
}

TEST_CASE("connected_components small cases") {
  CHECK(connected_components(BinaryMask(4, 4), Connectivity::kEight).count == 0);
  const BinaryMask diag = from_rows({"#.", ".#"});
  CHECK(connected_components(diag, Connectivity::kFour).count == 2);
  CHECK(connected_components(diag, Connectivity::kEight).count == 1);

  // Labels are numbered by each component's first raster pixel.
  const BinaryMask m = from_rows({"..#", "#..", "#.#"});
  const LabelMap lm = connected_components(m, Connectivity::kFour);
  CHECK(lm.count == 3);
  CHECK(lm.at(0, 2) == 1);
  CHECK(lm.at(1, 0) == 2);
  CHECK(lm.at(2, 0) == 2);
  CHECK(lm.at(2, 2) == 3);
}

TEST_CASE("connected_components agrees with a flood-fill oracle on 500 random masks") {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const BinaryMask m = oracle::random_mask(rng, 16, 16, rng.uniform(0.2, 0.7));
    for (int conn : {4, 8}) {
      int count = 0;
      const auto expected = oracle::flood_labels(m, true, conn, &count);
      const LabelMap got = connected_components(m, connectivity_from_int(conn));
      REQUIRE(got.count == count);
      for (std::size_t i = 0; i < expected.size(); ++i) REQUIRE(got.labels[i] == expected[i]);
    }
  }
}

TEST_CASE("fill_holes fills an enclosed centre") {
  const BinaryMask ring = from_rows({".....", ".###.", ".#.#.", ".###.", "....."});
  const BinaryMask filled = fill_holes(ring);
  CHECK(filled.at(2, 2));
  CHECK(filled.foreground_count() == 9);
  CHECK(filled == oracle::fill_from_border(ring));
}

TEST_CASE("fill_holes leaves masks without enclosed background alone") {
  const BinaryMask m = from_rows({"##..", "#...", "....", "..##"});
  CHECK(fill_holes(m) == m);
}

TEST_CASE("fill_holes does not fill a channel that reaches the border") {
  const BinaryMask open = from_rows({".....", ".###.", ".#.#.", ".#.#.", "....."});
  CHECK(fill_holes(open) == open);
  CHECK(fill_holes(open) == oracle::fill_from_border(open));
  // Diagonal leak: 8-connected foreground ring, background only touches the
  // outside diagonally, so with 4-connected background the hole is enclosed.
  const BinaryMask diamond = from_rows({"..#..", ".#.#.", "#...#", ".#.#.", "..#.."});
  const BinaryMask filled = fill_holes(diamond, Connectivity::kEight);
  CHECK(filled.at(2, 2));
  CHECK(filled == oracle::fill_from_border(diamond));
}

TEST_CASE("fill_holes matches the border-flood oracle and is idempotent and monotone") {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const BinaryMask m = oracle::random_mask(rng, 16, 16, rng.uniform(0.3, 0.7));
    const BinaryMask f = fill_holes(m);
    REQUIRE(f == oracle::fill_from_border(m));
    REQUIRE(fill_holes(f) == f);
    REQUIRE(subset(m, f));
  }
}

TEST_CASE("remove_small_objects") {
  const BinaryMask dot = from_rows({"...", ".#.", "..."});
  CHECK(remove_small_objects(dot, 2).foreground_count() == 0);
  CHECK(remove_small_objects(dot, 1) == dot);
  CHECK(remove_small_objects(dot, 0) == dot);
  const BinaryMask pair = from_rows({"##.", "...", "..#"});
  // Area exactly min_area is kept.
  const BinaryMask kept = remove_small_objects(pair, 2);
  CHECK(kept.at(0, 0));
  CHECK(kept.at(0, 1));
  CHECK_FALSE(kept.at(2, 2));
  CHECK_THROWS_AS(remove_small_objects(pair, -1), ValidationError);
}

TEST_CASE("remove_small_objects matches the component-area oracle and is idempotent") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const BinaryMask m = oracle::random_mask(rng, 16, 16, rng.uniform(0.2, 0.6));
    const std::int64_t min_area = static_cast<std::int64_t>(rng.below(8));
    const BinaryMask out = remove_small_objects(m, min_area);
    int count = 0;
    const auto labels = oracle::flood_labels(m, true, 8, &count);
    std::map<int, std::int64_t> area;
    for (int l : labels) {
      if (l) ++area[l];
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool expected = labels[i] != 0 && area[labels[i]] >= min_area;
      REQUIRE((out.data()[i] == 1) == expected);
    }
    REQUIRE(remove_small_objects(out, min_area) == out);
    REQUIRE(subset(out, m));
  }
}

TEST_CASE("postprocess pipeline") {
  CHECK(postprocess(ProbMask::filled(8, 8, 0.0), {}).foreground_count() == 0);

  // Ring of probability 0.9 with a 0.1 centre: filled into a solid 3x3 square.
  std::vector<double> v(7 * 7, 0.1);
  for (int r = 2; r <= 4; ++r)
    for (int c = 2; c <= 4; ++c) v[r * 7 + c] = 0.9;
  v[3 * 7 + 3] = 0.1;
  const ProbMask ring(7, 7, v);
  PostprocessConfig cfg;
  cfg.min_object_area = 9;
  const BinaryMask out = postprocess(ring, cfg);
  CHECK(out.foreground_count() == 9);
  CHECK(out.at(3, 3));
  cfg.min_object_area = 10;
  CHECK(postprocess(ring, cfg).foreground_count() == 0);

  PostprocessConfig bad;
  bad.threshold = 1.0;
  CHECK_THROWS_AS(postprocess(ring, bad), ValidationError);
}

TEST_CASE("postprocess is idempotent and leaves no small objects or holes") {
  Rng rng(6);
  PostprocessConfig cfg;
  cfg.min_object_area = 5;
  for (int trial = 0; trial < 200; ++trial) {
    const ProbMask p = oracle::random_prob(rng, 16, 16);
    const BinaryMask once = postprocess(p, cfg);
    REQUIRE(postprocess(to_prob(once), cfg) == once);
    const LabelMap lm = connected_components(once, cfg.connectivity);
    const auto areas = lm.areas();
    for (std::size_t l = 1; l < areas.size(); ++l) REQUIRE(areas[l] >= cfg.min_object_area);
    REQUIRE(fill_holes(once, cfg.connectivity) == once);
  }
}

TEST_CASE("default postprocess settings") {
  const PostprocessConfig cfg;
  CHECK(cfg.threshold == 0.5);
  CHECK(cfg.min_object_area == 100);
  CHECK(cfg.connectivity == Connectivity::kEight);
  CHECK_THROWS_AS(connectivity_from_int(6), ValidationError);
}
