#include "firebench/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "firebench/annotations.hpp"
#include "firebench/efficiency.hpp"
#include "firebench/error.hpp"
#include "firebench/report.hpp"
#include "firebench/serialization.hpp"

namespace firebench::cli
{

std::optional<std::uint64_t> seed_from_env()
{
    const char* v = std::getenv("FIREBENCH_SEED");
    if (!v || !*v)
        return std::nullopt;
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(v, &end, 10);
    if (*end != '\0')
        throw Error(ErrorKind::Parse, "FIREBENCH_SEED must be an unsigned integer, got '" + std::string(v) + "'");
    return seed;
}

namespace
{

OutputFormat parse_format(const std::string& s)
{
    if (s == "md" || s == "markdown")
        return OutputFormat::Markdown;
    if (s == "csv")
        return OutputFormat::Csv;
    if (s == "json")
        return OutputFormat::Json;
    throw Error(ErrorKind::Parse, "unknown format '" + s + "' (expected md, csv or json)");
}

const char* extension(OutputFormat f)
{
    switch (f) {
    case OutputFormat::Markdown: return ".md";
    case OutputFormat::Csv: return ".csv";
    case OutputFormat::Json: return ".json";
    }
    return "";
}

std::string dump(const json& j)
{
    return j.dump(2) + "\n";
}

std::string join_lines(const std::vector<std::string>& ids)
{
    std::string out;
    for (const auto& id : ids)
        out += id + "\n";
    return out;
}

std::string table_json(const Table& t)
{
    return dump(json{{"header", t.header}, {"rows", t.rows}});
}

std::string render(const Table& t, OutputFormat f)
{
    switch (f) {
    case OutputFormat::Markdown: return t.to_markdown();
    case OutputFormat::Csv: return t.to_csv();
    case OutputFormat::Json: return table_json(t);
    }
    return {};
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err)
{
    for (const auto& w : warnings)
        err << "warning: " << w << "\n";
}

// Raw option values as typed; resolved into Config once parsing succeeded.
struct RawOptions
{
    double iou = 0.5;
    std::string ap_method = "envelope";
    std::optional<std::uint64_t> seed;
    std::string ratios = "0.70,0.15,0.15";
    std::size_t k = 5;
    std::string format = "md";
    std::string out = ".";
    bool no_stratify = false;
    unsigned threads = 0;
};

Config resolve(const RawOptions& raw)
{
    Config c;
    if (!(raw.iou > 0.0 && raw.iou <= 1.0))
        throw Error(ErrorKind::Range, "--iou-thresh must lie in (0,1]");
    c.iou_threshold = raw.iou;
    c.ap_method = parse_ap_method(raw.ap_method);
    c.seed = raw.seed ? *raw.seed : seed_from_env().value_or(0);
    c.ratios = parse_ratios(raw.ratios);
    c.k = raw.k;
    c.format = parse_format(raw.format);
    c.out = raw.out;
    c.stratify = !raw.no_stratify;
    c.threads = raw.threads ? raw.threads : std::max(1u, std::thread::hardware_concurrency());
    return c;
}

int cmd_eval(const Config& cfg, const std::string& manifest_path, const std::string& predictions_dir,
             bool include_empty, std::ostream& out, std::ostream& err)
{
    LoadOptions load;
    if (!predictions_dir.empty())
        load.predictions_dir = predictions_dir;
    const DatasetManifest ds = load_manifest(manifest_path, load);
    print_warnings(ds.warnings, err);

    EvalOptions opts;
    opts.iou_threshold = cfg.iou_threshold;
    opts.method = cfg.ap_method;
    opts.exclude_empty_classes = !include_empty;
    opts.threads = cfg.threads;
    const EvalReport report = evaluate(ds.images, ds.classes, opts);
    print_warnings(report.warnings, err);

    const Table table = eval_table(report);
    const std::string report_json = dump(to_json(report));
    write_file_atomic(cfg.out / "eval_report.json", report_json);
    if (cfg.format != OutputFormat::Json)
        write_file_atomic(cfg.out / (std::string("eval_report") + extension(cfg.format)), render(table, cfg.format));

    if (cfg.format == OutputFormat::Json) {
        out << report_json;
    } else {
        out << "dataset: " << ds.name << " (" << ds.images.size() << " images), IoU threshold "
            << format_shortest(report.iou_threshold) << ", AP method " << to_string(report.method) << "\n";
        out << render(table, cfg.format);
    }
    return Success;
}

int cmd_split(const Config& cfg, const std::string& manifest_path, std::ostream& out)
{
    const DatasetManifest ds = load_manifest(manifest_path);
    const SplitAssignment s = split(ds.images, cfg.ratios, cfg.seed, cfg.stratify);
    const json j = to_json(s, ds.classes, ds.images);

    write_file_atomic(cfg.out / "split.json", dump(j));
    for (Subset sub : {Subset::Train, Subset::Val, Subset::Test})
        write_file_atomic(cfg.out / (std::string(to_string(sub)) + ".txt"), join_lines(s.ids_in(sub)));

    if (cfg.format == OutputFormat::Json) {
        out << dump(j);
        return Success;
    }
    out << "seed " << s.seed << ", ratios " << format_shortest(s.ratios.train) << "/" << format_shortest(s.ratios.val)
        << "/" << format_shortest(s.ratios.test) << (s.stratified ? ", stratified" : ", unstratified") << "\n";
    for (Subset sub : {Subset::Train, Subset::Val, Subset::Test}) {
        const auto& entry = j["sets"][to_string(sub)];
        out << to_string(sub) << ": " << entry["size"].get<std::size_t>();
        for (const auto& [label, n] : entry["strata"].items())
            out << "  " << label << "=" << n.get<std::size_t>();
        out << "\n";
    }
    return Success;
}

int cmd_kfold(const Config& cfg, const std::string& manifest_path, std::ostream& out)
{
    const DatasetManifest ds = load_manifest(manifest_path);
    const FoldAssignment f = stratified_kfold(ds.images, cfg.k, cfg.seed);
    const json j = to_json(f, ds.classes, ds.images);

    write_file_atomic(cfg.out / "folds.json", dump(j));
    for (std::size_t i = 0; i < f.k; ++i)
        write_file_atomic(cfg.out / ("fold_" + std::to_string(i) + ".txt"), join_lines(f.ids_in(i)));

    if (cfg.format == OutputFormat::Json) {
        out << dump(j);
        return Success;
    }
    out << "k " << f.k << ", seed " << f.seed << "\n";
    for (const auto& fold : j["folds"]) {
        out << "fold " << fold["fold"].get<std::size_t>() << ": " << fold["size"].get<std::size_t>();
        for (const auto& [label, n] : fold["strata"].items())
            out << "  " << label << "=" << n.get<std::size_t>();
        out << "\n";
    }
    return Success;
}

int cmd_bench(const Config& cfg, const std::string& timing_path, const std::string& power_path,
              const std::string& averaging, const std::string& energy_method, std::ostream& out, std::ostream& err)
{
    TimingLog timing;
    try {
        timing = parse_timing_log(read_text_file(timing_path));
    } catch (const Error& e) {
        throw e.with_file(timing_path);
    }
    PowerTrace trace;
    try {
        trace = ingest_power_trace(read_text_file(power_path), PowerSchema::Auto, power_path);
    } catch (const Error& e) {
        throw e.with_file(power_path);
    }

    BenchOptions opts;
    if (averaging == "time")
        opts.averaging = PowerAveraging::TimeWeighted;
    else if (averaging != "sample")
        throw Error(ErrorKind::Parse, "--avg-power must be sample or time");
    if (energy_method == "mean-power")
        opts.energy = EnergyMethod::MeanPowerTimesRuntime;
    else if (energy_method != "trapezoid")
        throw Error(ErrorKind::Parse, "--energy must be trapezoid or mean-power");

    const RunMetrics m = make_run_metrics(timing, trace, opts);
    const std::string text = dump(to_json(m));
    write_file_atomic(cfg.out / "run_metrics.json", text);

    if (m.fps < realtime_fps_threshold)
        err << "warning: " << format_fixed(m.fps, 2) << " FPS is below the real-time bar of "
            << format_shortest(realtime_fps_threshold) << " FPS\n";

    if (cfg.format == OutputFormat::Json) {
        out << text;
    } else {
        out << "run " << m.run_id << ": " << m.n_images << " images in " << format_shortest(m.runtime_s) << " s\n"
            << "fps " << format_fixed(m.fps, 2) << ", avg power " << format_fixed(m.avg_power_mw, 2) << " mW, energy "
            << format_fixed(m.energy_j, 5) << " J (" << to_string(m.energy_method) << ")\n";
    }
    return Success;
}

int cmd_edp(const Config& cfg, const std::string& records_dir, const std::string& only_group, std::ostream& out)
{
    const auto records = load_records(records_dir);
    std::map<std::string, std::vector<RunMetrics>> groups;
    for (const auto& r : records) {
        for (const auto& g : r.edp_groups) {
            if (!only_group.empty() && g != only_group)
                continue;
            if (!r.metrics)
                throw Error(ErrorKind::MissingField, "record '" + r.run_id + "' joins EDP group '" + g +
                                                         "' but lacks 'metrics'");
            groups[g].push_back(*r.metrics);
        }
    }
    if (groups.empty())
        throw Error(ErrorKind::MissingField, only_group.empty() ? std::string("no record declares an EDP group")
                                                                : "no record declares EDP group '" + only_group + "'");

    json all = json::array();
    for (const auto& [name, runs] : groups) {
        const EdpGroup group = edp_group(runs, name);
        const json j = to_json(group);
        write_file_atomic(cfg.out / ("edp_" + name + ".json"), dump(j));
        write_file_atomic(cfg.out / ("edp_" + name + ".csv"), edp_csv(group));
        if (cfg.format == OutputFormat::Json) {
            all.push_back(j);
        } else {
            out << "# group " << name << "\n" << edp_csv(group);
        }
    }
    if (cfg.format == OutputFormat::Json)
        out << dump(all);
    return Success;
}

int cmd_report(const Config& cfg, const std::string& records_dir, const std::string& layout_name, std::ostream& out)
{
    const TableLayout layout = parse_table_layout(layout_name);
    const auto records = load_records(records_dir);
    const Table t = build_table(records, layout);
    const std::string text = render(t, cfg.format);
    write_file_atomic(cfg.out / ("report_" + layout_name + extension(cfg.format)), text);
    out << text;
    return Success;
}

void add_common(CLI::App* sub, RawOptions& raw)
{
    sub->add_option("--format", raw.format, "Output format: md, csv or json");
    sub->add_option("--out", raw.out, "Output directory");
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"firebench: detection accuracy and edge efficiency benchmarking"};
    app.name("firebench");
    app.require_subcommand(1);

    RawOptions raw;
    std::string manifest;
    std::string predictions_dir;
    bool include_empty = false;
    std::string timing_path;
    std::string power_path;
    std::string averaging = "sample";
    std::string energy_method = "trapezoid";
    std::string records_dir;
    std::string group;
    std::string layout = "accuracy";
    std::uint64_t seed_value = 0;

    auto* eval = app.add_subcommand("eval", "Match detections and compute per-class AP and mAP");
    eval->add_option("manifest", manifest, "Dataset manifest (JSON)")->required();
    eval->add_option("--predictions", predictions_dir, "Directory of <image_id>.txt prediction files");
    eval->add_option("--iou-thresh", raw.iou, "IoU threshold for a true positive");
    eval->add_option("--ap-method", raw.ap_method, "envelope or coco101");
    eval->add_flag("--include-empty-classes", include_empty, "Score classes without ground truth as 0");
    eval->add_option("--threads", raw.threads, "Matching threads (0 = all cores)");
    add_common(eval, raw);

    auto* split_cmd = app.add_subcommand("split", "Stratified train/val/test split");
    split_cmd->add_option("manifest", manifest, "Dataset manifest (JSON)")->required();
    auto* split_seed = split_cmd->add_option("--seed", seed_value, "PRNG seed (falls back to FIREBENCH_SEED)");
    split_cmd->add_option("--ratios", raw.ratios, "train,val,test ratios");
    split_cmd->add_flag("--no-stratify", raw.no_stratify, "Shuffle the whole dataset as one stratum");
    add_common(split_cmd, raw);

    auto* kfold = app.add_subcommand("kfold", "Stratified k-fold assignment");
    kfold->add_option("manifest", manifest, "Dataset manifest (JSON)")->required();
    auto* kfold_seed = kfold->add_option("--seed", seed_value, "PRNG seed (falls back to FIREBENCH_SEED)");
    kfold->add_option("--k", raw.k, "Number of folds")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 30));
    add_common(kfold, raw);

    auto* bench = app.add_subcommand("bench", "FPS, average power and energy from a timing log and power trace");
    bench->add_option("timing", timing_path, "Timing log (JSON)")->required();
    bench->add_option("power", power_path, "Power trace (CSV)")->required();
    bench->add_option("--avg-power", averaging, "sample (unweighted mean) or time (time-weighted)");
    bench->add_option("--energy", energy_method, "trapezoid or mean-power");
    add_common(bench, raw);

    auto* edp_cmd = app.add_subcommand("edp", "Normalized energy-delay product per declared group");
    edp_cmd->add_option("records", records_dir, "Directory of experiment record JSON files")->required();
    edp_cmd->add_option("--group", group, "Only this group");
    add_common(edp_cmd, raw);

    auto* report = app.add_subcommand("report", "Render comparison tables from experiment records");
    report->add_option("records", records_dir, "Directory of experiment record JSON files")->required();
    report->add_option("--layout", layout, "accuracy, cascaded or efficiency");
    add_common(report, raw);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Success;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return Success;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return InputError;
    }

    try {
        if (split_seed->count() || kfold_seed->count())
            raw.seed = seed_value;
        const Config cfg = resolve(raw);

        if (eval->parsed())
            return cmd_eval(cfg, manifest, predictions_dir, include_empty, out, err);
        if (split_cmd->parsed())
            return cmd_split(cfg, manifest, out);
        if (kfold->parsed())
            return cmd_kfold(cfg, manifest, out);
        if (bench->parsed())
            return cmd_bench(cfg, timing_path, power_path, averaging, energy_method, out, err);
        if (edp_cmd->parsed())
            return cmd_edp(cfg, records_dir, group, out);
        if (report->parsed())
            return cmd_report(cfg, records_dir, layout, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return InputError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return InputError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return InternalError;
    }
    return InternalError;
}

} // namespace firebench::cli
