#include <doctest.h>

#include <cmath>

#include "posegroup/errors.hpp"
#include "posegroup/rng.hpp"
#include "posegroup/skeleton.hpp"

using namespace posegroup;

TEST_SUITE("skeleton") {

TEST_CASE("oks is exactly one at zero distance") {
  SkeletonSpec spec = compact7_skeleton();
  Keypoint a{0.4, 0.6, 2};
  Keypoint b{0.4, 0.6, 2};
  CHECK(oks(a, b, 0.3, spec) == 1.0);
  CHECK(oks(a, b, 0.01, spec) == 1.0);
}

TEST_CASE("oks closed-form values") {
  SkeletonSpec spec;
  spec.type_names = {"only"};
  spec.kappa = {1.0};

  // d^2 = 2 s^2 kappa^2 gives exactly exp(-1).
  double s = 0.1;
  double d = std::sqrt(2.0) * s;
  Keypoint a{0.5, 0.5, 0};
  Keypoint b{0.5 + d, 0.5, 0};
  CHECK(oks(a, b, s, spec) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  // d = 0.2, s = 0.1, kappa = 1: exp(-0.04 / 0.02) = exp(-2).
  Keypoint c{0.5, 0.7, 0};
  CHECK(oks(a, c, 0.1, spec) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  CHECK(oks(a, c, 0.1, spec) == doctest::Approx(0.135335).epsilon(1e-5));
}

TEST_CASE("oks is symmetric and monotone in distance") {
  SkeletonSpec spec = compact7_skeleton();
  double prev = 1.0;
  for (int i = 1; i <= 20; ++i) {
    double d = 0.02 * i;
    Keypoint a{0.1, 0.1, 3};
    Keypoint b{0.1 + d, 0.1, 3};
    double v = oks(a, b, 0.25, spec);
    CHECK(v == oks(b, a, 0.25, spec));
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("oks rejects bad arguments") {
  SkeletonSpec spec = compact7_skeleton();
  Keypoint a{0.1, 0.1, 0};
  Keypoint b{0.1, 0.1, 1};
  CHECK_THROWS_AS(oks(a, b, 0.3, spec), std::invalid_argument);
  Keypoint c{0.1, 0.1, 0};
  CHECK_THROWS_AS(oks(a, c, 0.0, spec), std::invalid_argument);
  CHECK_THROWS_AS(oks(a, c, -1.0, spec), std::invalid_argument);
}

TEST_CASE("built-in skeletons") {
  CHECK(coco17_skeleton().num_types() == 17);
  CHECK(compact7_skeleton().num_types() == 7);
  CHECK(coco17_skeleton().kappa[0] == 0.8);
  CHECK(coco17_skeleton().content_hash() != compact7_skeleton().content_hash());
}

TEST_CASE("skeleton config parsing") {
  SkeletonSpec s = parse_skeleton_json(R"({"names": ["a", "b"], "kappa": [0.5, 0.7]})");
  CHECK(s.num_types() == 2);
  CHECK(s.kappa[1] == 0.7);

  // Scalar kappa broadcasts.
  SkeletonSpec u = parse_skeleton_json(R"({"names": ["a", "b", "c"], "kappa": 0.8})");
  CHECK(u.kappa == std::vector<double>{0.8, 0.8, 0.8});
}

TEST_CASE("skeleton config rejects duplicates, bad kappa, empty list") {
  CHECK_THROWS_WITH_AS(
      parse_skeleton_json(R"({"names": ["a", "a"], "kappa": [0.5, 0.7]})"),
      doctest::Contains("duplicate type name \"a\""), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_skeleton_json(R"({"names": ["a", "b"], "kappa": [0.5, 0.0]})"),
      doctest::Contains("\"b\""), ConfigError);
  CHECK_THROWS_AS(parse_skeleton_json(R"({"names": [], "kappa": []})"), ConfigError);
  CHECK_THROWS_AS(parse_skeleton_json(R"({"names": ["a"]})"), ConfigError);
  CHECK_THROWS_AS(parse_skeleton_json(R"({"names": ["a", "b"], "kappa": [0.5]})"),
                  ConfigError);
}

TEST_CASE("content hash reflects names and kappa") {
  SkeletonSpec a = parse_skeleton_json(R"({"names": ["x", "y"], "kappa": [0.5, 0.5]})");
  SkeletonSpec b = parse_skeleton_json(R"({"names": ["x", "y"], "kappa": [0.5, 0.6]})");
  SkeletonSpec c = parse_skeleton_json(R"({"names": ["x", "z"], "kappa": [0.5, 0.5]})");
  CHECK(a.content_hash() != b.content_hash());
  CHECK(a.content_hash() != c.content_hash());
  CHECK(a.content_hash() ==
        parse_skeleton_json(R"({"names": ["x", "y"], "kappa": [0.5, 0.5]})").content_hash());
}

}  // TEST_SUITE
