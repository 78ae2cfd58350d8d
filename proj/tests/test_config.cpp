#include <doctest.h>

#include <stdexcept>
#include <string>

#include "tagc/config.hpp"

using namespace tagc;

TEST_SUITE("config") {

TEST_CASE("key-value parsing") {
  const KvFile kv = KvFile::parse_string(
      "# comment\n"
      "theta = 80\n"
      "ratio=2\n"
      "name = hello world  # trailing comment\n"
      "flag = true\n",
      "test.cfg");
  CHECK(kv.get_double("theta") == 80.0);
  CHECK(kv.get_uint("ratio") == 2);
  CHECK(kv.get_string("name") == "hello world");
  CHECK(kv.get_bool("flag") == true);
  CHECK(kv.get_double("missing", 1.5) == 1.5);
  CHECK_THROWS_WITH_AS(kv.get_string("absent"),
                       "test.cfg: missing required key 'absent'", std::invalid_argument);
}

TEST_CASE("parse errors carry line numbers") {
  CHECK_THROWS_WITH_AS(KvFile::parse_string("a = 1\nnonsense line\n", "f.cfg"),
                       "f.cfg:2: expected 'key = value', got 'nonsense line'",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(KvFile::parse_string("a = 1\na = 2\n", "f.cfg"),
                       "f.cfg:2: duplicate key 'a'", std::invalid_argument);
  CHECK_THROWS_AS(KvFile::parse_string("= 3\n", "f.cfg"), std::invalid_argument);
  CHECK_THROWS_AS(KvFile::parse_string("x = abc\n", "f").get_double("x"),
                  std::invalid_argument);
}

TEST_CASE("theta floors per compression ratio") {
  CHECK(CompressionConfig::theta_floor(2) == 80.0);
  CHECK(CompressionConfig::theta_floor(4) == 90.0);
  CHECK(CompressionConfig::theta_floor(10) == 98.75);
  CHECK_THROWS_AS(CompressionConfig::theta_floor(3), std::invalid_argument);
}

TEST_CASE("theta-ratio pairing is validated") {
  CompressionConfig c;
  c.ratio = 10;
  c.theta = 50.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.allow_low_theta = true;
  CHECK_NOTHROW(c.validate());
  c.allow_low_theta = false;
  c.theta = 98.75;
  CHECK_NOTHROW(c.validate());
  c.ratio = 4;
  c.theta = 89.9;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.theta = 90.0;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("field validation") {
  CompressionConfig c;
  c.theta = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.theta = 0.0;
  c.index_width = 2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.index_width = 4;
  c.ratio = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("4-bit index worlds are capped at 15 ranks") {
  CompressionConfig c;
  c.ratio = 2;
  c.theta = 80.0;
  c.index_width = 4;
  CHECK_NOTHROW(c.validate_for_world(15));
  CHECK_THROWS_AS(c.validate_for_world(16), std::invalid_argument);
  c.index_width = 1;
  CHECK_NOTHROW(c.validate_for_world(16));
  c.ratio = 1;  // bypass sends no index
  c.index_width = 4;
  CHECK_NOTHROW(c.validate_for_world(64));
}

TEST_CASE("unknown keys are rejected by strict consumers") {
  const KvFile kv = KvFile::parse_string("a = 1\nb = 2\n", "s.cfg");
  CHECK_NOTHROW(kv.require_known({"a", "b", "c"}));
  CHECK_THROWS_WITH_AS(kv.require_known({"a"}), "s.cfg: unknown key 'b'",
                       std::invalid_argument);
}

TEST_CASE("policy names round-trip") {
  for (Policy p : {Policy::all_layers, Policy::non_attention_linear, Policy::none})
    CHECK(policy_from_string(to_string(p)) == p);
  CHECK_THROWS_AS(policy_from_string("everything"), std::invalid_argument);
}

}  // TEST_SUITE
