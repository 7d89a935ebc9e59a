#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "firebench/error.hpp"
#include "firebench/report.hpp"
#include "firebench/serialization.hpp"

using namespace firebench;
namespace fs = std::filesystem;

namespace
{

const fs::path data_dir = FIREBENCH_TEST_DATA;

ErrorKind kind_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected firebench::Error");
    return ErrorKind::Parse;
}

EvalReport report(double fire, double smoke, double iou = 0.5)
{
    EvalReport r;
    r.iou_threshold = iou;
    APResult f;
    f.class_id = 0;
    f.class_name = "fire";
    f.ap = fire;
    APResult s;
    s.class_id = 1;
    s.class_name = "smoke";
    s.ap = smoke;
    r.per_class = {f, s};
    r.map = (fire + smoke) / 2;
    return r;
}

ExperimentRecord single_stage(std::string id, std::string weights, int frozen, double hours)
{
    ExperimentRecord r;
    r.run_id = std::move(id);
    r.model = "YOLOv5n";
    r.stages.push_back({1, std::move(weights), "AFSE", frozen, 100, std::nullopt, hours});
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("format_fixed rounds half to even")
{
    CHECK(format_fixed(79.25, 1) == "79.2");
    CHECK(format_fixed(79.35, 1) == "79.4");
    CHECK(format_fixed(0.125, 2) == "0.12");
    CHECK(format_fixed(0.375, 2) == "0.38");
    CHECK(format_fixed(2.5, 0) == "2");
    CHECK(format_fixed(3.5, 0) == "4");
    CHECK(format_fixed(6783.22, 2) == "6783.22");
    CHECK(format_fixed(5.9000365, 1) == "5.9");
    CHECK(format_fixed(0.0, 3) == "0.000");
    CHECK(format_fixed(-1.25, 1) == "-1.2");
    // (0.70 + 0.885) / 2 in percent lands on a binary neighbour of 79.25
    CHECK(format_fixed((0.70 + 0.885) / 2 * 100.0, 1) == "79.2");
}

TEST_CASE("format_shortest round trips")
{
    CHECK(format_shortest(0.5) == "0.5");
    CHECK(format_shortest(0.8) == "0.8");
    CHECK(format_shortest(1.0) == "1");
    CHECK(std::stod(format_shortest(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("accuracy layout")
{
    auto scratch = single_stage("a", "scratch", 0, 1.25);
    scratch.validation = report(0.358, 0.828);
    scratch.testing = report(0.471, 0.767);
    auto tuned = single_stage("b", "FASDD", 10, 0.75);
    tuned.weights_training_time_hours = 3.0;
    tuned.validation = report(0.60, 0.90);
    tuned.testing = report(0.70, 0.885);
    const std::vector<ExperimentRecord> records{scratch, tuned};

    const auto t = build_table(records, TableLayout::Accuracy);
    const std::vector<std::string> header{"Pre-trained Weights",
                                          "Training Time for Weights (Hours)",
                                          "Training Description",
                                          "Frozen Layers",
                                          "Epochs",
                                          "Training Time (Hours)",
                                          "Val AP_fire (%)",
                                          "Val AP_smoke (%)",
                                          "Val mAP@0.5 (%)",
                                          "Test AP_fire (%)",
                                          "Test AP_smoke (%)",
                                          "Test mAP@0.5 (%)"};
    CHECK(t.header == header);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0] == std::vector<std::string>{"-", "-", "Train from scratch", "-", "100", "1.250", "35.8", "82.8",
                                                "59.3", "47.1", "76.7", "61.9"});
    CHECK(t.rows[1] == std::vector<std::string>{"FASDD", "3.000", "Fine Tune", "10", "100", "0.750", "60.0", "90.0",
                                                "75.0", "70.0", "88.5", "79.2"});

    auto missing = tuned;
    missing.testing.reset();
    const std::vector<ExperimentRecord> bad{scratch, missing};
    try {
        build_table(bad, TableLayout::Accuracy);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingField);
        CHECK(std::string(e.what()).find("'b'") != std::string::npos);
        CHECK(std::string(e.what()).find("testing") != std::string::npos);
    }
}

TEST_CASE("mAP column follows the IoU threshold")
{
    auto r = single_stage("a", "COCO", 5, 1.0);
    r.validation = report(0.5, 0.5, 0.75);
    r.testing = report(0.5, 0.5, 0.75);
    const std::vector<ExperimentRecord> records{r};
    const auto t = build_table(records, TableLayout::Accuracy);
    CHECK(t.header[8] == "Val mAP@0.75 (%)");
}

TEST_CASE("cascaded layout totals stage and weight times")
{
    ExperimentRecord r;
    r.run_id = "c";
    r.model = "YOLOv8n";
    r.weights_training_time_hours = 1.5;
    r.stages.push_back({1, "COCO", "FASDD", 10, 50, std::nullopt, 2.0});
    r.stages.push_back({2, "FASDD", "AFSE", 5, 100, std::nullopt, 0.25});
    r.validation = report(0.5, 0.9);
    r.testing = report(0.6, 0.8);
    const std::vector<ExperimentRecord> records{r};
    const auto t = build_table(records, TableLayout::Cascaded);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.header[8] == "Total Train Time (Hours)");
    CHECK(t.rows[0] == std::vector<std::string>{"COCO", "1.500", "FASDD", "10", "2.000", "AFSE", "5", "0.250", "3.750",
                                                "50.0", "90.0", "70.0", "60.0", "80.0", "70.0"});
}

TEST_CASE("efficiency layout against the golden file")
{
    const auto records = load_records(data_dir / "records");
    REQUIRE(records.size() == 3);
    CHECK(render_table(records, TableLayout::Efficiency, TableFormat::Markdown) ==
          slurp(data_dir / "golden" / "efficiency_table.md"));

    const auto csv = render_table(records, TableLayout::Efficiency, TableFormat::Csv);
    CHECK(csv.substr(0, csv.find('\n')) == "Pre-trained Weights,Model,Avg. FPS,Avg. Power During Inference (mW),"
                                           "Test AP_fire (%),Test AP_smoke (%),Test mAP@0.5 (%)");
    CHECK(csv.find("FASDD,YOLOv5n,6.1,6886.54,70.0,88.5,79.2\n") != std::string::npos);

    auto no_metrics = records;
    no_metrics[1].metrics.reset();
    CHECK(kind_of([&] { build_table(no_metrics, TableLayout::Efficiency); }) == ErrorKind::MissingField);
}

TEST_CASE("empty record set renders a header-only table")
{
    const std::vector<ExperimentRecord> none;
    const auto md = render_table(none, TableLayout::Efficiency, TableFormat::Markdown);
    CHECK(md ==
          "| Pre-trained Weights | Model | Avg. FPS | Avg. Power During Inference (mW) | Test AP_fire (%) | "
          "Test AP_smoke (%) | Test mAP@0.5 (%) |\n|---|---|---|---|---|---|---|\n");
    CHECK(build_table(none, TableLayout::Accuracy).rows.empty());
}

TEST_CASE("csv quoting")
{
    Table t;
    t.header = {"a", "b"};
    t.rows = {{"x,y", "say \"hi\""}};
    CHECK(t.to_csv() == "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
}

TEST_CASE("edp csv")
{
    std::vector<RunMetrics> runs{make_run_metrics("A", 10, 5, 1000, 10), make_run_metrics("B", 10, 10, 1000, 8)};
    CHECK(edp_csv(edp_group(runs, "g")) == "run_id,normalized_energy,normalized_runtime,edp\nA,1,0.5,0.5\nB,0.8,1,0.8\n");
}

TEST_CASE("records survive a JSON round trip")
{
    for (const auto& r : load_records(data_dir / "records")) {
        const auto back = experiment_record_from_json(json::parse(to_json(r).dump()));
        CHECK(back.run_id == r.run_id);
        CHECK(back.model == r.model);
        CHECK(back.stages.size() == r.stages.size());
        REQUIRE(back.testing);
        CHECK(back.testing->per_class[0].ap == r.testing->per_class[0].ap);
        REQUIRE(back.metrics);
        CHECK(back.metrics->fps == r.metrics->fps);
        CHECK(back.metrics->avg_power_mw == r.metrics->avg_power_mw);
        CHECK(back.edp_groups == r.edp_groups);
    }
    CHECK(kind_of([] { experiment_record_from_json(json::parse(R"({"run_id":"x"})")); }) == ErrorKind::MissingField);
    CHECK(kind_of([] {
              experiment_record_from_json(json::parse(
                  R"({"run_id":"x","stages":[{"index":1,"source_weights":"s","dataset":"d","frozen_layers":0,"epochs":1}],)"
                  R"("metrics":{"n_images":10,"runtime_s":2,"avg_power_mw":5,"energy_j":1,"fps":4}})"));
          }) == ErrorKind::Range);
}
