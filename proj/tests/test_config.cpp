#include <gtest/gtest.h>

#include "primevm/config.hpp"
#include "primevm/pattern.hpp"

using namespace primevm;

TEST(Config, ParsesCommentsAndOverrides) {
  const auto c = Config::parse_string("# geometry\nkappa = 300\n\n register.size=1000  # trailing\nkappa = 400\n");
  EXPECT_EQ(c.get_size("kappa", 0), 400u);
  EXPECT_EQ(c.get_size("register.size", 0), 1000u);
  EXPECT_EQ(c.get("missing", "x"), "x");
}

TEST(Config, BadLines) {
  EXPECT_THROW(Config::parse_string("kappa 300\n"), ConfigError);
  EXPECT_THROW(Config::parse_string(" = 3\n"), ConfigError);
  const auto c = Config::parse_string("a = 1.5x\nb = maybe\nn = -3\n");
  EXPECT_THROW(c.get_double("a", 0.0), ConfigError);
  EXPECT_THROW(c.get_bool("b", false), ConfigError);
  EXPECT_THROW(c.get_size("n", 0), ConfigError);
  EXPECT_THROW(Config::load("/nonexistent/primevm.cfg"), ConfigError);
}

TEST(Config, UnusedKeys) {
  const auto c = Config::parse_string("kappa = 300\ntypo.key = 1\n");
  Geometry::from_config(c);
  const auto u = c.unused();
  ASSERT_EQ(u.size(), 1u);
  EXPECT_EQ(u[0], "typo.key");
}

TEST(Geometry, RoundTrip) {
  Geometry g;
  g.seed = 77;
  g.kappa = 333;
  g.default_ratio = 0.4;
  g.t_recall = 31;
  const auto back = Geometry::from_config(g.to_config());
  EXPECT_EQ(back.fingerprint(), g.fingerprint());
  EXPECT_EQ(back.kappa, 333u);
  EXPECT_DOUBLE_EQ(back.default_ratio, 0.4);
  EXPECT_EQ(back.seed, 77u);
}

TEST(Geometry, FingerprintSeesEveryField) {
  Geometry a, b;
  b.t_bind += 1;
  EXPECT_NE(a.fingerprint(), b.fingerprint());
  b = a;
  b.seed += 1;
  EXPECT_NE(a.fingerprint(), b.fingerprint());
}

TEST(Geometry, RangeChecks) {
  EXPECT_THROW(Geometry::from_config(Config::parse_string("register.active = 1\n")), ConfigError);
  EXPECT_THROW(Geometry::from_config(Config::parse_string("kappa = 0\n")), ConfigError);
  EXPECT_THROW(Geometry::from_config(Config::parse_string("train.alpha = 0\n")), ConfigError);
  EXPECT_THROW(Geometry::from_config(Config::parse_string("panel.leak = 1.5\n")), ConfigError);
  EXPECT_DOUBLE_EQ(Geometry{}.coverage(), 20.0 / 4000.0);
}
