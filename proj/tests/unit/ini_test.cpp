#include <doctest.h>

#include <stdexcept>

#include "spikestrat/ini.hpp"

using namespace spikestrat;

TEST_CASE("sections, comments, and whitespace") {
    ini_file f = parse_ini_text("# comment\n"
                                "top = 1\n"
                                "[a]\n"
                                "x = 10  ; trailing comment\n"
                                "words =  two words \n"
                                "[b]\n"
                                "x = 20\n",
                                "test");
    CHECK(f.entries.size() == 4);
    CHECK(f.get("top") == "1");
    CHECK(f.get("a.x") == "10");
    CHECK(f.get("a.words") == "two words");
    CHECK(f.get("b.x") == "20");
    CHECK(f.has("a.x"));
    CHECK_FALSE(f.has("c.x"));
    CHECK(f.get_or("c.x", "dflt") == "dflt");
    CHECK_THROWS_AS((void)f.get("c.x"), std::invalid_argument);
}

TEST_CASE("malformed lines carry the origin and line number") {
    CHECK_THROWS_WITH_AS(parse_ini_text("[open\n", "f.ini"),
                         "f.ini:1: unterminated section header", std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_ini_text("\nnokey\n", "f.ini"),
                         "f.ini:2: expected key = value", std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_ini_text("= v\n", "f.ini"), "f.ini:1: empty key",
                         std::invalid_argument);
    CHECK_THROWS_AS(parse_ini_text("a = 1\na = 2\n", "f.ini"), std::invalid_argument);
}

TEST_CASE("typed getters parse fully or throw with the key name") {
    ini_file f = parse_ini_text("[s]\nd = 2.5\nn = 7\nbad = 1x\nlist = 1, 2.5,3\n", "t");
    CHECK(ini_double(f, "s.d", 0.0) == 2.5);
    CHECK(ini_double(f, "s.missing", 1.25) == 1.25);
    CHECK(ini_long(f, "s.n", 0) == 7);
    CHECK(ini_long(f, "s.missing", -3) == -3);
    CHECK_THROWS_AS(ini_double(f, "s.bad", 0.0), std::invalid_argument);
    CHECK_THROWS_AS(ini_long(f, "s.d", 0), std::invalid_argument);
    CHECK(ini_double_list(f, "s.list") == std::vector<double>{1.0, 2.5, 3.0});
    CHECK_THROWS_AS(ini_double_list(f, "s.bad"), std::invalid_argument);
}

TEST_CASE("split_csv_list trims and drops empty tokens") {
    CHECK(split_csv_list(" a, b ,c ") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_csv_list("").empty());
}
