#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "firebench/annotations.hpp"
#include "firebench/error.hpp"

using namespace firebench;
namespace fs = std::filesystem;

namespace
{

const ClassTable fire_smoke({{0, "fire"}, {1, "smoke"}});
const fs::path data_dir = FIREBENCH_TEST_DATA;

template <class Fn>
Error capture(Fn&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e;
    }
    FAIL("expected firebench::Error");
    return Error(ErrorKind::Parse, "unreachable");
}

fs::path scratch_dir(const std::string& name)
{
    fs::path dir = fs::temp_directory_path() / ("firebench_annotations_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text)
{
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

} // namespace

TEST_CASE("parse_label_file")
{
    auto gt = parse_label_file("0 0.5 0.5 0.2 0.1", fire_smoke);
    REQUIRE(gt.size() == 1);
    CHECK(gt[0].class_id == 0);
    CHECK(gt[0].box == BoundingBox{0.5, 0.5, 0.2, 0.1});

    CHECK(parse_label_file("", fire_smoke).empty());
    CHECK(parse_label_file("\n  \n", fire_smoke).empty());
    CHECK(parse_label_file("1 0.1 0.2 0.1 0.2\r\n", fire_smoke).size() == 1);

    CHECK(capture([] { parse_label_file("0 0.5 0.5 1.2 0.1", fire_smoke); }).kind() == ErrorKind::Range);
    CHECK(capture([] { parse_label_file("0 0.5 0.5 0 0.1", fire_smoke); }).kind() == ErrorKind::Range);
    CHECK(capture([] { parse_label_file("0 -0.1 0.5 0.1 0.1", fire_smoke); }).kind() == ErrorKind::Range);
    CHECK(capture([] { parse_label_file("7 0.5 0.5 0.1 0.1", fire_smoke); }).kind() == ErrorKind::Class);
    CHECK(capture([] { parse_label_file("x 0.5 0.5 0.1 0.1", fire_smoke); }).kind() == ErrorKind::Parse);
    CHECK(capture([] { parse_label_file("0 0.5 abc 0.1 0.1", fire_smoke); }).kind() == ErrorKind::Parse);

    const auto e = capture([] { parse_label_file("0 0.5 0.5 0.2 0.2\n\n0 0.5 0.5 0.2\n", fire_smoke); });
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(e.line() == 3);
}

TEST_CASE("boxes past the border are clamped once, with a warning")
{
    std::vector<std::string> warnings;
    auto gt = parse_label_file("0 0.05 0.5 0.2 0.2", fire_smoke, &warnings);
    REQUIRE(gt.size() == 1);
    CHECK(warnings.size() == 1);
    CHECK(gt[0].box.x1() == doctest::Approx(0.0));
    CHECK(gt[0].box.x2() == doctest::Approx(0.15));
    CHECK(gt[0].box.inside_unit_square());

    warnings.clear();
    parse_label_file("0 0.5 0.5 0.2 0.2", fire_smoke, &warnings);
    CHECK(warnings.empty());
}

TEST_CASE("parse_prediction_file")
{
    auto d = parse_prediction_file("1 0.4 0.4 0.3 0.3 0.91", fire_smoke);
    REQUIRE(d.size() == 1);
    CHECK(d[0].class_id == 1);
    CHECK(d[0].confidence == 0.91);

    CHECK(capture([] { parse_prediction_file("1 0.4 0.4 0.3 0.3 1.5", fire_smoke); }).kind() == ErrorKind::Range);
    CHECK(capture([] { parse_prediction_file("1 0.4 0.4 0.3 0.3", fire_smoke); }).kind() == ErrorKind::Parse);

    auto two = parse_prediction_file("1 0.4 0.4 0.3 0.3 0.2\n0 0.6 0.6 0.1 0.1 0.9\n", fire_smoke);
    REQUIRE(two.size() == 2);
    CHECK(two[0].confidence == 0.2);
    CHECK(two[1].confidence == 0.9);
}

TEST_CASE("format/parse round trip within six decimals")
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> side(0.01, 0.9), unit(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Detection> dets;
        for (int i = 0; i < 8; ++i) {
            const double w = side(rng), h = side(rng);
            const double cx = w / 2 + unit(rng) * (1 - w), cy = h / 2 + unit(rng) * (1 - h);
            dets.push_back({i % 2, {cx, cy, w, h}, unit(rng)});
        }
        const auto back = parse_prediction_file(format_prediction_file(dets), fire_smoke);
        REQUIRE(back.size() == dets.size());
        for (std::size_t i = 0; i < dets.size(); ++i) {
            CHECK(back[i].class_id == dets[i].class_id);
            CHECK(std::abs(back[i].box.cx - dets[i].box.cx) <= 5e-7);
            CHECK(std::abs(back[i].box.cy - dets[i].box.cy) <= 5e-7);
            CHECK(std::abs(back[i].box.w - dets[i].box.w) <= 5e-7);
            CHECK(std::abs(back[i].box.h - dets[i].box.h) <= 5e-7);
            CHECK(std::abs(back[i].confidence - dets[i].confidence) <= 5e-7);
        }
        // Once formatted, the text is a fixed point.
        const auto text = format_prediction_file(back);
        CHECK(format_prediction_file(parse_prediction_file(text, fire_smoke)) == text);

        std::vector<GroundTruthInstance> gt;
        for (const auto& d : back)
            gt.push_back({d.class_id, d.box});
        const auto gtext = format_label_file(gt);
        CHECK(format_label_file(parse_label_file(gtext, fire_smoke)) == gtext);
    }
}

TEST_CASE("class table rejects duplicate ids")
{
    CHECK(capture([] { ClassTable({{0, "fire"}, {0, "smoke"}}); }).kind() == ErrorKind::Duplicate);
    CHECK(fire_smoke.name_of(1) == "smoke");
    CHECK(fire_smoke.find("fire")->id == 0);
}

TEST_CASE("load_manifest")
{
    SUBCASE("two valid images")
    {
        auto ds = load_manifest(data_dir / "two_images" / "manifest.json");
        CHECK(ds.name == "two-image fixture");
        REQUIRE(ds.images.size() == 2);
        CHECK(ds.images[0].image_id == "img_001");
        CHECK(ds.images[0].ground_truth.size() == 2);
        CHECK(ds.images[0].detections.size() == 3);
        CHECK(ds.images[1].has_predictions);
        CHECK(ds.warnings.empty());
    }
    SUBCASE("duplicate image id")
    {
        auto e = capture([] { load_manifest(data_dir / "duplicate_id" / "manifest.json"); });
        CHECK(e.kind() == ErrorKind::Duplicate);
        CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    }
    SUBCASE("missing label file names the path")
    {
        auto e = capture([] { load_manifest(data_dir / "missing_label" / "manifest.json"); });
        CHECK(e.kind() == ErrorKind::Io);
        CHECK(e.file().find("does_not_exist.txt") != std::string::npos);
    }
    SUBCASE("label parse error carries file and line")
    {
        auto e = capture([] { load_manifest(data_dir / "bad_label" / "manifest.json"); });
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(e.line() == 2);
        CHECK(e.file().find("a.txt") != std::string::npos);
    }
    SUBCASE("unknown class in label file")
    {
        auto dir = scratch_dir("unknown_class");
        write(dir / "l.txt", "3 0.5 0.5 0.1 0.1\n");
        write(dir / "m.json", R"({"name":"x","classes":[{"id":0,"name":"fire"}],"images":[{"id":"a","labels":"l.txt"}]})");
        auto e = capture([&] { load_manifest(dir / "m.json"); });
        CHECK(e.kind() == ErrorKind::Class);
        CHECK(e.line() == 1);
    }
    SUBCASE("image without predictions is flagged")
    {
        auto dir = scratch_dir("no_preds");
        write(dir / "l.txt", "0 0.5 0.5 0.1 0.1\n");
        write(dir / "m.json", R"({"name":"x","classes":[{"id":0,"name":"fire"}],"images":[{"id":"a","labels":"l.txt"}]})");
        auto ds = load_manifest(dir / "m.json");
        REQUIRE(ds.images.size() == 1);
        CHECK_FALSE(ds.images[0].has_predictions);
        CHECK(ds.images[0].detections.empty());
        CHECK(ds.warnings.size() == 1);
    }
    SUBCASE("predictions directory override")
    {
        auto dir = scratch_dir("pred_dir");
        write(dir / "l.txt", "0 0.5 0.5 0.1 0.1\n");
        write(dir / "preds" / "a.txt", "0 0.5 0.5 0.1 0.1 0.4\n");
        write(dir / "m.json", R"({"name":"x","classes":[{"id":0,"name":"fire"}],"images":[{"id":"a","labels":"l.txt"}]})");
        LoadOptions opts;
        opts.predictions_dir = dir / "preds";
        auto ds = load_manifest(dir / "m.json", opts);
        REQUIRE(ds.images[0].detections.size() == 1);
        CHECK(ds.images[0].detections[0].confidence == 0.4);
    }
    SUBCASE("282-image manifest")
    {
        auto dir = scratch_dir("afse_sized");
        std::string images;
        for (int i = 0; i < 282; ++i) {
            const std::string id = "afse_" + std::to_string(i);
            write(dir / "labels" / (id + ".txt"), i % 5 == 0 ? "" : "1 0.5 0.5 0.3 0.3\n");
            images += std::string(i ? "," : "") + R"({"id":")" + id + R"(","labels":"labels/)" + id + R"(.txt"})";
        }
        write(dir / "m.json", R"({"name":"afse","classes":[{"id":0,"name":"fire"},{"id":1,"name":"smoke"}],"images":[)" +
                                  images + "]}");
        auto ds = load_manifest(dir / "m.json");
        CHECK(ds.images.size() == 282);
    }
    SUBCASE("malformed JSON")
    {
        CHECK(capture([] { load_manifest_text("{\"name\": ", "."); }).kind() == ErrorKind::Parse);
        CHECK(capture([] { load_manifest_text(R"({"name":"x","images":[]})", "."); }).kind() == ErrorKind::MissingField);
    }
}
