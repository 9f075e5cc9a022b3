#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jrnet/config.hpp"

#include <string>

using namespace jrnet;

TEST_CASE("parse key = value lines with comments") {
    Config c = Config::parse_string("# comment\nsubject = S01\n\ntrial.T1.rate.ecg = 1000\n");
    CHECK(c.get("subject") == "S01");
    CHECK(c.get_double("trial.T1.rate.ecg") == 1000.0);
    CHECK_FALSE(c.has("missing"));
    CHECK_THROWS_WITH(c.get("missing"), doctest::Contains("missing config key"));
}

TEST_CASE("malformed lines and values throw") {
    CHECK_THROWS(Config::parse_string("no equals sign here"));
    Config c = Config::parse_string("x = abc\n");
    CHECK_THROWS(c.get_double("x"));
    CHECK_THROWS(c.get_bool_or("x", true));
}

TEST_CASE("lists split on commas and whitespace") {
    Config c = Config::parse_string("trials = a, b c\n");
    auto items = c.get_list("trials");
    REQUIRE(items.size() == 3);
    CHECK(items[0] == "a");
    CHECK(items[2] == "c");
}

TEST_CASE("serialization is canonical and hash-stable") {
    Config a, b;
    a.set("z", "1");
    a.set("a", "2");
    b.set("a", "2");
    b.set("z", "1");
    CHECK(a.serialize() == b.serialize());
    CHECK(a.hash() == b.hash());
    Config c = Config::parse_string(a.serialize());
    CHECK(c.hash() == a.hash());

    b.set("a", "3");
    CHECK(a.hash() != b.hash());
}

TEST_CASE("format_double round-trips exactly") {
    for (double v : {0.1, 1.0 / 3.0, 2.43, -1e-300, 6.02214076e23}) {
        std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
}
