#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "mks/records_io.hpp"

using namespace mks;

TEST_CASE("box pairs with comments and blank lines") {
    std::istringstream is("# header\n\n1 1 2 2 2 2 2 2\n  \n 0.5 0.5 1 1 3 3 1 1 \n");
    const auto pairs = parse_box_pairs(is);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].pred == AABox(1, 1, 2, 2));
    CHECK(pairs[1].gt == AABox(3, 3, 1, 1));
}

TEST_CASE("parse errors carry line numbers") {
    std::istringstream few("1 1 2 2 2 2 2 2\n1 2 3\n");
    try {
        parse_box_pairs(few, "pairs.txt");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).rfind("pairs.txt:2:", 0) == 0);
    }
    std::istringstream word("1 1 2 x\n");
    CHECK_THROWS_AS(parse_boxes(word), ParseError);
    std::istringstream zero("# c\n1 1 0 2\n");
    try {
        parse_boxes(zero);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("detection records") {
    std::istringstream is("img7 2 1 1 2 2 0.25\nimg8 0 3 3 1 1\n");
    const auto d = parse_detections(is);
    REQUIRE(d.size() == 2);
    CHECK(d[0].image_id == "img7");
    CHECK(d[0].class_id == 2);
    CHECK(d[0].confidence == 0.25);
    CHECK(d[1].confidence == 1.0);
    std::istringstream conf("a 0 1 1 1 1 1.5\n");
    CHECK_THROWS_AS(parse_detections(conf), ParseError);
    std::istringstream cls("a zero 1 1 1 1\n");
    CHECK_THROWS_AS(parse_detections(cls), ParseError);
}

TEST_CASE("level detections and outcomes") {
    std::istringstream is("20 0 1 1 2 2 0.5\n10\n20 1 4 4 2 2\n");
    const auto runs = parse_level_detections(is);
    REQUIRE(runs.size() == 2);
    CHECK(runs[0].level == 10.0);
    CHECK(runs[0].detections.empty());
    CHECK(runs[1].detections.size() == 2);

    std::istringstream out("10 clean\n11 miss\n12 fail\n");
    const auto o = parse_outcomes(out);
    REQUIRE(o.size() == 3);
    CHECK(o[2].second == Outcome::Fail);
    std::istringstream bad("10 nope\n");
    CHECK_THROWS_AS(parse_outcomes(bad), ParseError);
}

TEST_CASE("missing files are reported") {
    CHECK_THROWS_AS(read_boxes("/nonexistent/boxes.txt"), std::runtime_error);
}
