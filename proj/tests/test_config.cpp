#include <doctest.h>

#include <cstdlib>
#include <string>

#include "sentrec/config.hpp"
#include "sentrec/errors.hpp"

using namespace sentrec;
namespace C = sentrec::config;

namespace {

// Scoped environment variable for interpolation tests.
struct EnvVar {
  std::string name;
  bool had = false;
  std::string old;
  EnvVar(const std::string& n, const char* value) : name(n) {
    if (const char* prev = std::getenv(n.c_str())) {
      had = true;
      old = prev;
    }
    if (value)
      setenv(n.c_str(), value, 1);
    else
      unsetenv(n.c_str());
  }
  ~EnvVar() {
    if (had)
      setenv(name.c_str(), old.c_str(), 1);
    else
      unsetenv(name.c_str());
  }
};

}  // namespace

TEST_CASE("parse_text reads key = value lines, skipping comments and blanks") {
  const C::Map m = C::parse_text(
      "# a comment\n"
      "\n"
      "   # indented comment\n"
      "alpha = 1\n"
      "beta=two words  \n"
      "  gamma   =   spaced   \n"
      "delta =\n",
      "test.conf");
  CHECK(m.size() == 4);
  CHECK(m.at("alpha") == "1");
  CHECK(m.at("beta") == "two words");
  CHECK(m.at("gamma") == "spaced");
  CHECK(m.at("delta") == "");
}

TEST_CASE("parse_text: the last assignment of a repeated key wins") {
  const C::Map m = C::parse_text("k = first\nk = second\n", "dup.conf");
  CHECK(m.at("k") == "second");
}

TEST_CASE("parse_text rejects malformed lines with origin and line number") {
  CHECK_THROWS_WITH_AS(C::parse_text("ok = 1\nbroken line\n", "f.conf"),
                       "f.conf:2: expected 'key = value'", ConfigError);
  CHECK_THROWS_WITH_AS(C::parse_text("= value\n", "f.conf"), "f.conf:1: empty key",
                       ConfigError);
}

TEST_CASE("interpolation resolves ${NAME} from the environment") {
  const EnvVar guard("SENTREC_TEST_CONF_VAR", "hello");
  CHECK(C::interpolate("x ${SENTREC_TEST_CONF_VAR} y", "o") == "x hello y");
  CHECK(C::interpolate("${SENTREC_TEST_CONF_VAR}${SENTREC_TEST_CONF_VAR}", "o") ==
        "hellohello");
  // A bare '$' without '{' passes through untouched.
  CHECK(C::interpolate("$5 and $x", "o") == "$5 and $x");

  const C::Map m =
      C::parse_text("path = ${SENTREC_TEST_CONF_VAR}/data\n", "env.conf");
  CHECK(m.at("path") == "hello/data");
}

TEST_CASE("interpolation failures are ConfigErrors naming the origin") {
  const EnvVar guard("SENTREC_TEST_CONF_UNSET", nullptr);
  CHECK_THROWS_WITH_AS(
      C::interpolate("${SENTREC_TEST_CONF_UNSET}", "f.conf:3"),
      "f.conf:3: environment variable 'SENTREC_TEST_CONF_UNSET' is not set", ConfigError);
  CHECK_THROWS_WITH_AS(C::interpolate("${oops", "o"),
                       "o: unterminated ${...} in value '${oops'", ConfigError);
  CHECK_THROWS_WITH_AS(C::interpolate("${}", "o"), "o: empty environment reference ${}",
                       ConfigError);
  CHECK_THROWS_AS(C::interpolate("${BAD-NAME}", "o"), ConfigError);
}

TEST_CASE("typed getters parse values and fall back on missing keys") {
  const C::Map m = C::parse_text(
      "flag_on = yes\n"
      "flag_off = 0\n"
      "count = -12\n"
      "big = 18446744073709551615\n"
      "ratio = 2.5e-1\n"
      "name = alice\n",
      "typed.conf");

  CHECK(C::get_bool(m, "flag_on", false) == true);
  CHECK(C::get_bool(m, "flag_off", true) == false);
  CHECK(C::get_bool(m, "missing", true) == true);

  CHECK(C::get_int(m, "count", 0) == -12);
  CHECK(C::get_int(m, "missing", 7) == 7);
  CHECK(C::get_uint(m, "big", 0) == 18446744073709551615ULL);
  CHECK(C::get_double(m, "ratio", 0.0) == 0.25);
  CHECK(C::get_double(m, "count", 0.0) == -12.0);
  CHECK(C::get_string(m, "name", "bob") == "alice");
  CHECK(C::get_string(m, "missing", "bob") == "bob");
  CHECK(C::has(m, "name"));
  CHECK_FALSE(C::has(m, "missing"));
}

TEST_CASE("typed getters reject malformed values, naming the key") {
  const C::Map m = C::parse_text(
      "b = maybe\n"
      "i = 12x\n"
      "u = -3\n"
      "d = 1.5.2\n",
      "bad.conf");
  CHECK_THROWS_WITH_AS(C::get_bool(m, "b", false),
                       "config key 'b': expected boolean, got 'maybe'", ConfigError);
  CHECK_THROWS_WITH_AS(C::get_int(m, "i", 0), "config key 'i': expected integer, got '12x'",
                       ConfigError);
  CHECK_THROWS_WITH_AS(C::get_uint(m, "u", 0),
                       "config key 'u': expected unsigned integer, got '-3'", ConfigError);
  CHECK_THROWS_WITH_AS(C::get_double(m, "d", 0.0),
                       "config key 'd': expected number, got '1.5.2'", ConfigError);
}

TEST_CASE("parse_file raises IoError for missing paths") {
  CHECK_THROWS_AS(C::parse_file("/nonexistent/sentrec.conf"), IoError);
}
