#include "firebench/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "firebench/annotations.hpp"
#include "firebench/error.hpp"

namespace firebench
{

namespace
{

const json& field(const json& j, const char* key, const std::string& where)
{
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null())
        throw Error(ErrorKind::MissingField, where + " lacks '" + key + "'");
    return j.at(key);
}

double number(const json& j, const char* key, const std::string& where)
{
    const json& v = field(j, key, where);
    if (!v.is_number())
        throw Error(ErrorKind::Parse, where + "." + key + " must be a number");
    return v.get<double>();
}

std::string text(const json& j, const char* key, const std::string& where)
{
    const json& v = field(j, key, where);
    if (!v.is_string())
        throw Error(ErrorKind::Parse, where + "." + key + " must be a string");
    return v.get<std::string>();
}

std::optional<double> optional_number(const json& j, const char* key, const std::string& where)
{
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return number(j, key, where);
}

long long integer(const json& j, const char* key, const std::string& where)
{
    const json& v = field(j, key, where);
    if (!v.is_number_integer())
        throw Error(ErrorKind::Parse, where + "." + key + " must be an integer");
    return v.get<long long>();
}

json stratum_counts(const std::vector<std::string>& ids, const ClassTable& classes,
                    std::span<const ImageRecord> images)
{
    std::map<std::string, const ImageRecord*> by_id;
    for (const auto& img : images)
        by_id[img.image_id] = &img;
    std::map<std::string, std::size_t> counts;
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it != by_id.end())
            ++counts[stratum_label(stratum_of(*it->second), classes)];
    }
    json out = json::object();
    for (const auto& [k, v] : counts)
        out[k] = v;
    return out;
}

} // namespace

json to_json(const EvalReport& report, bool include_curves)
{
    json classes = json::array();
    for (const auto& c : report.per_class) {
        json entry{{"id", c.class_id}, {"name", c.class_name}, {"ap", c.ap},
                   {"n_ground_truth", c.curve.n_ground_truth}};
        if (include_curves) {
            json pts = json::array();
            for (const auto& p : c.curve.points)
                pts.push_back({p.recall, p.precision, p.confidence});
            entry["curve"] = std::move(pts);
        }
        classes.push_back(std::move(entry));
    }
    return json{{"iou_threshold", report.iou_threshold},
                {"ap_method", to_string(report.method)},
                {"map", report.map},
                {"classes", std::move(classes)},
                {"warnings", report.warnings}};
}

EvalReport eval_report_from_json(const json& j)
{
    const std::string where = "eval report";
    EvalReport r;
    r.iou_threshold = j.contains("iou_threshold") ? number(j, "iou_threshold", where) : 0.5;
    r.method = j.contains("ap_method") ? parse_ap_method(text(j, "ap_method", where)) : ApMethod::Envelope;
    const json& classes = field(j, "classes", where);
    if (!classes.is_array())
        throw Error(ErrorKind::Parse, where + ".classes must be an array");
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const std::string cw = where + ".classes[" + std::to_string(i) + "]";
        APResult a;
        a.class_id = classes[i].contains("id") ? static_cast<int>(integer(classes[i], "id", cw)) : static_cast<int>(i);
        a.class_name = text(classes[i], "name", cw);
        a.ap = number(classes[i], "ap", cw);
        if (a.ap < 0.0 || a.ap > 1.0)
            throw Error(ErrorKind::Range, cw + ".ap must lie in [0,1]");
        a.method = r.method;
        a.curve.class_id = a.class_id;
        if (classes[i].contains("n_ground_truth"))
            a.curve.n_ground_truth = static_cast<std::size_t>(integer(classes[i], "n_ground_truth", cw));
        if (classes[i].contains("curve")) {
            for (const auto& p : classes[i]["curve"])
                a.curve.points.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
        }
        r.per_class.push_back(std::move(a));
    }
    if (r.per_class.empty())
        throw Error(ErrorKind::MissingField, where + " has no classes");
    // The stored value is informational; the mean is always recomputed.
    r.map = mean_ap(std::span<const APResult>(r.per_class));
    if (j.contains("warnings") && j["warnings"].is_array())
        r.warnings = j["warnings"].get<std::vector<std::string>>();
    return r;
}

json to_json(const RunMetrics& m)
{
    json j{{"run_id", m.run_id},
           {"n_images", m.n_images},
           {"runtime_s", m.runtime_s},
           {"avg_power_mw", m.avg_power_mw},
           {"energy_j", m.energy_j},
           {"fps", m.fps},
           {"energy_method", to_string(m.energy_method)}};
    if (!m.window.empty())
        j["window"] = m.window;
    if (m.energy_discrepancy_j)
        j["energy_discrepancy_j"] = *m.energy_discrepancy_j;
    return j;
}

RunMetrics run_metrics_from_json(const json& j)
{
    const std::string where = "metrics";
    const long long n = integer(j, "n_images", where);
    if (n < 0)
        throw Error(ErrorKind::Range, where + ".n_images must be non-negative");
    RunMetrics m = make_run_metrics(j.contains("run_id") ? text(j, "run_id", where) : std::string{},
                                    static_cast<std::size_t>(n), number(j, "runtime_s", where),
                                    number(j, "avg_power_mw", where), number(j, "energy_j", where));
    if (j.contains("fps")) {
        const double stored = number(j, "fps", where);
        if (std::abs(stored - m.fps) > 1e-9 * std::max(1.0, m.fps))
            throw Error(ErrorKind::Range, where + ".fps disagrees with n_images / runtime_s");
    }
    if (j.contains("window") && j["window"].is_string())
        m.window = j["window"].get<std::string>();
    if (j.contains("energy_method") && j["energy_method"] == "mean_power_x_runtime")
        m.energy_method = EnergyMethod::MeanPowerTimesRuntime;
    m.energy_discrepancy_j = optional_number(j, "energy_discrepancy_j", where);
    return m;
}

json to_json(const EdpGroup& group)
{
    json members = json::array();
    for (std::size_t i = 0; i < group.members.size(); ++i) {
        const auto& m = group.members[i];
        const auto& e = group.entries[i];
        members.push_back({{"run_id", m.run_id},
                           {"energy_j", m.energy_j},
                           {"runtime_s", m.runtime_s},
                           {"normalized_energy", e.normalized_energy},
                           {"normalized_runtime", e.normalized_runtime},
                           {"edp", e.edp}});
    }
    return json{{"group", group.name},
                {"max_energy_j", group.max_energy_j},
                {"max_runtime_s", group.max_runtime_s},
                {"best", group.entries[group.best()].run_id},
                {"members", std::move(members)}};
}

json to_json(const SplitAssignment& split, const ClassTable& classes, std::span<const ImageRecord> images)
{
    json sets = json::object();
    json assignment = json::array();
    for (Subset s : {Subset::Train, Subset::Val, Subset::Test}) {
        const auto ids = split.ids_in(s);
        sets[to_string(s)] = {{"size", ids.size()}, {"strata", stratum_counts(ids, classes, images)}};
    }
    for (const auto& [id, s] : split.assignment)
        assignment.push_back({{"id", id}, {"set", to_string(s)}});
    return json{{"seed", split.seed},
                {"ratios", {{"train", split.ratios.train}, {"val", split.ratios.val}, {"test", split.ratios.test}}},
                {"stratified", split.stratified},
                {"sets", std::move(sets)},
                {"assignment", std::move(assignment)}};
}

json to_json(const FoldAssignment& folds, const ClassTable& classes, std::span<const ImageRecord> images)
{
    json per_fold = json::array();
    for (std::size_t f = 0; f < folds.k; ++f) {
        const auto ids = folds.ids_in(f);
        per_fold.push_back({{"fold", f}, {"size", ids.size()}, {"strata", stratum_counts(ids, classes, images)}});
    }
    json assignment = json::array();
    for (const auto& [id, f] : folds.assignment)
        assignment.push_back({{"id", id}, {"fold", f}});
    return json{{"k", folds.k}, {"seed", folds.seed}, {"folds", std::move(per_fold)},
                {"assignment", std::move(assignment)}};
}

json to_json(const ExperimentRecord& r)
{
    json stages = json::array();
    for (const auto& s : r.stages) {
        json st{{"index", s.index},
                {"source_weights", s.source_weights},
                {"dataset", s.dataset},
                {"frozen_layers", s.frozen_layers},
                {"epochs", s.epochs}};
        if (s.initial_lr)
            st["initial_lr"] = *s.initial_lr;
        if (s.training_time_hours)
            st["training_time_hours"] = *s.training_time_hours;
        stages.push_back(std::move(st));
    }
    json j{{"run_id", r.run_id}, {"model", r.model}, {"stages", std::move(stages)}, {"edp_groups", r.edp_groups}};
    if (r.weights_training_time_hours)
        j["weights_training_time_hours"] = *r.weights_training_time_hours;
    if (r.validation)
        j["validation"] = to_json(*r.validation, false);
    if (r.testing)
        j["testing"] = to_json(*r.testing, false);
    if (r.metrics)
        j["metrics"] = to_json(*r.metrics);
    return j;
}

ExperimentRecord experiment_record_from_json(const json& j)
{
    ExperimentRecord r;
    r.run_id = text(j, "run_id", "record");
    const std::string where = "record '" + r.run_id + "'";
    if (j.contains("model") && j["model"].is_string())
        r.model = j["model"].get<std::string>();
    r.weights_training_time_hours = optional_number(j, "weights_training_time_hours", where);

    const json& stages = field(j, "stages", where);
    if (!stages.is_array())
        throw Error(ErrorKind::Parse, where + ".stages must be an array");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const std::string sw = where + ".stages[" + std::to_string(i) + "]";
        TLStage s;
        s.index = static_cast<int>(integer(stages[i], "index", sw));
        s.source_weights = text(stages[i], "source_weights", sw);
        s.dataset = text(stages[i], "dataset", sw);
        s.frozen_layers = static_cast<int>(integer(stages[i], "frozen_layers", sw));
        s.epochs = static_cast<int>(integer(stages[i], "epochs", sw));
        s.initial_lr = optional_number(stages[i], "initial_lr", sw);
        s.training_time_hours = optional_number(stages[i], "training_time_hours", sw);
        r.stages.push_back(std::move(s));
    }

    auto nested = [&](const char* key, auto&& parse) {
        try {
            return parse(j.at(key));
        } catch (const Error& e) {
            throw Error(e.kind(), where + "." + key + ": " + e.detail());
        }
    };
    if (j.contains("validation") && !j["validation"].is_null())
        r.validation = nested("validation", eval_report_from_json);
    if (j.contains("testing") && !j["testing"].is_null())
        r.testing = nested("testing", eval_report_from_json);
    if (j.contains("metrics") && !j["metrics"].is_null()) {
        r.metrics = nested("metrics", run_metrics_from_json);
        if (r.metrics->run_id.empty())
            r.metrics->run_id = r.run_id;
    }
    if (j.contains("edp_groups") && j["edp_groups"].is_array())
        r.edp_groups = j["edp_groups"].get<std::vector<std::string>>();
    validate(r);
    return r;
}

std::vector<ExperimentRecord> load_records(const std::filesystem::path& dir)
{
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
        throw Error(ErrorKind::Io, "not a directory", dir.string());

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<ExperimentRecord> records;
    for (const auto& f : files) {
        try {
            records.push_back(experiment_record_from_json(json::parse(read_text_file(f))));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Parse, e.what(), f.string());
        } catch (const Error& e) {
            throw e.with_file(f.string());
        }
    }
    return records;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorKind::Io, "cannot write file", tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw Error(ErrorKind::Io, "write failed", tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorKind::Io, "cannot move temporary file into place", path.string());
    }
}

} // namespace firebench
