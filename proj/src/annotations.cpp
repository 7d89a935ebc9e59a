#include "firebench/annotations.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "firebench/error.hpp"

namespace firebench
{

// ---- Error -----------------------------------------------------------------

const char* to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::Class: return "class error";
    case ErrorKind::Duplicate: return "duplicate error";
    case ErrorKind::Io: return "io error";
    case ErrorKind::Ordering: return "ordering error";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::Precondition: return "precondition violated";
    case ErrorKind::NoPositives: return "no positives";
    case ErrorKind::MissingField: return "missing field";
    }
    return "error";
}

namespace
{

std::string compose_message(ErrorKind kind, const std::string& message, const std::string& file, std::size_t line)
{
    std::string out;
    if (!file.empty()) {
        out += file;
        out += ':';
        if (line > 0) {
            out += std::to_string(line);
            out += ':';
        }
        out += ' ';
    } else if (line > 0) {
        out += "line " + std::to_string(line) + ": ";
    }
    out += to_string(kind);
    out += ": ";
    out += message;
    return out;
}

} // namespace

Error::Error(ErrorKind kind, const std::string& message, std::string file, std::size_t line)
    : std::runtime_error(compose_message(kind, message, file, line))
    , kind_(kind)
    , detail_(message)
    , file_(std::move(file))
    , line_(line)
{
}

Error Error::with_file(const std::string& file) const
{
    if (!file_.empty())
        return *this;
    return Error(kind_, detail_, file, line_);
}

// ---- BoundingBox / ClassTable ----------------------------------------------

BoundingBox BoundingBox::from_corners(double x1, double y1, double x2, double y2)
{
    if (!(x1 < x2) || !(y1 < y2))
        throw Error(ErrorKind::Range, "degenerate box corners");
    return BoundingBox{(x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1};
}

bool BoundingBox::inside_unit_square() const noexcept
{
    return x1() >= 0.0 && y1() >= 0.0 && x2() <= 1.0 && y2() <= 1.0;
}

BoundingBox BoundingBox::clamped() const
{
    if (inside_unit_square())
        return *this;
    return from_corners(std::clamp(x1(), 0.0, 1.0), std::clamp(y1(), 0.0, 1.0),
                        std::clamp(x2(), 0.0, 1.0), std::clamp(y2(), 0.0, 1.0));
}

ClassTable::ClassTable(std::vector<ClassInfo> classes)
    : classes_(std::move(classes))
{
    std::set<int> seen;
    for (const auto& c : classes_) {
        if (c.id < 0)
            throw Error(ErrorKind::Range, "class id " + std::to_string(c.id) + " is negative");
        if (!seen.insert(c.id).second)
            throw Error(ErrorKind::Duplicate, "class id " + std::to_string(c.id) + " appears twice in class table");
    }
}

const ClassInfo* ClassTable::find(int id) const noexcept
{
    auto it = std::find_if(classes_.begin(), classes_.end(), [id](const ClassInfo& c) { return c.id == id; });
    return it == classes_.end() ? nullptr : &*it;
}

const ClassInfo* ClassTable::find(std::string_view name) const noexcept
{
    auto it = std::find_if(classes_.begin(), classes_.end(), [name](const ClassInfo& c) { return c.name == name; });
    return it == classes_.end() ? nullptr : &*it;
}

std::string ClassTable::name_of(int id) const
{
    if (const auto* c = find(id))
        return c->name;
    return std::to_string(id);
}

// ---- line parsing ----------------------------------------------------------

namespace
{

struct Line
{
    std::size_t number;
    std::vector<std::string_view> fields;
};

std::vector<Line> split_lines(std::string_view text)
{
    std::vector<Line> lines;
    std::size_t number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view raw = text.substr(pos, end - pos);
        ++number;

        Line line{number, {}};
        std::size_t i = 0;
        while (i < raw.size()) {
            while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i])))
                ++i;
            std::size_t start = i;
            while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i])))
                ++i;
            if (i > start)
                line.fields.push_back(raw.substr(start, i - start));
        }
        if (!line.fields.empty())
            lines.push_back(std::move(line));

        if (end == text.size())
            break;
        pos = end + 1;
    }
    return lines;
}

double parse_real(std::string_view field, const char* what, std::size_t line)
{
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+')
        ++first;
    auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::general);
    if (ec != std::errc() || ptr != last || !std::isfinite(value))
        throw Error(ErrorKind::Parse, std::string("invalid ") + what + " '" + std::string(field) + "'", {}, line);
    return value;
}

int parse_class_id(std::string_view field, const ClassTable& classes, std::size_t line)
{
    int value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw Error(ErrorKind::Parse, "invalid class id '" + std::string(field) + "'", {}, line);
    if (value < 0 || !classes.contains(value))
        throw Error(ErrorKind::Class, "unknown class id " + std::string(field), {}, line);
    return value;
}

BoundingBox parse_box(const Line& line, std::vector<std::string>* warnings)
{
    BoundingBox box{parse_real(line.fields[1], "cx", line.number), parse_real(line.fields[2], "cy", line.number),
                    parse_real(line.fields[3], "w", line.number), parse_real(line.fields[4], "h", line.number)};
    static constexpr const char* names[] = {"cx", "cy", "w", "h"};
    const double values[] = {box.cx, box.cy, box.w, box.h};
    for (std::size_t i = 0; i < 4; ++i) {
        if (values[i] < 0.0 || values[i] > 1.0)
            throw Error(ErrorKind::Range,
                        std::string(names[i]) + " = " + std::string(line.fields[i + 1]) + " outside [0,1]", {},
                        line.number);
    }
    if (box.w == 0.0 || box.h == 0.0)
        throw Error(ErrorKind::Range, "box has zero width or height", {}, line.number);

    if (!box.inside_unit_square()) {
        box = box.clamped();
        if (warnings)
            warnings->push_back("line " + std::to_string(line.number) + ": box extends past image border, clamped");
    }
    return box;
}

void expect_fields(const Line& line, std::size_t n)
{
    if (line.fields.size() != n)
        throw Error(ErrorKind::Parse,
                    "expected " + std::to_string(n) + " fields, found " + std::to_string(line.fields.size()), {},
                    line.number);
}

std::string format_box(const BoundingBox& b)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %.6f", b.cx, b.cy, b.w, b.h);
    return buf;
}

} // namespace

std::vector<GroundTruthInstance> parse_label_file(std::string_view text, const ClassTable& classes,
                                                  std::vector<std::string>* warnings)
{
    std::vector<GroundTruthInstance> out;
    for (const auto& line : split_lines(text)) {
        expect_fields(line, 5);
        int id = parse_class_id(line.fields[0], classes, line.number);
        out.push_back({id, parse_box(line, warnings)});
    }
    return out;
}

std::vector<Detection> parse_prediction_file(std::string_view text, const ClassTable& classes,
                                             std::vector<std::string>* warnings)
{
    std::vector<Detection> out;
    for (const auto& line : split_lines(text)) {
        expect_fields(line, 6);
        int id = parse_class_id(line.fields[0], classes, line.number);
        double conf = parse_real(line.fields[5], "confidence", line.number);
        if (conf < 0.0 || conf > 1.0)
            throw Error(ErrorKind::Range, "confidence " + std::string(line.fields[5]) + " outside [0,1]", {},
                        line.number);
        out.push_back({id, parse_box(line, warnings), conf});
    }
    return out;
}

std::string format_label_file(const std::vector<GroundTruthInstance>& instances)
{
    std::string out;
    for (const auto& g : instances)
        out += std::to_string(g.class_id) + ' ' + format_box(g.box) + '\n';
    return out;
}

std::string format_prediction_file(const std::vector<Detection>& detections)
{
    std::string out;
    char conf[32];
    for (const auto& d : detections) {
        std::snprintf(conf, sizeof conf, "%.6f", d.confidence);
        out += std::to_string(d.class_id) + ' ' + format_box(d.box) + ' ' + conf + '\n';
    }
    return out;
}

// ---- manifest --------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::Io, "cannot read file", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw Error(ErrorKind::Io, "read failed", path.string());
    return ss.str();
}

namespace
{

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where, const std::string& file)
{
    if (!obj.is_object() || !obj.contains(key))
        throw Error(ErrorKind::MissingField, where + " lacks key '" + key + "'", file);
    return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& where, const std::string& file)
{
    const json& v = require(obj, key, where, file);
    if (!v.is_string() || v.get<std::string>().empty())
        throw Error(ErrorKind::Parse, where + "." + key + " must be a non-empty string", file);
    return v.get<std::string>();
}

template <class Fn>
auto with_file_context(const std::filesystem::path& file, Fn&& fn)
{
    try {
        return fn();
    } catch (const Error& e) {
        throw e.with_file(file.string());
    }
}

} // namespace

DatasetManifest load_manifest_text(std::string_view json_text, const std::filesystem::path& base_dir,
                                   const LoadOptions& options, const std::string& manifest_name)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, e.what(), manifest_name);
    }
    if (!doc.is_object())
        throw Error(ErrorKind::Parse, "manifest root must be an object", manifest_name);

    DatasetManifest manifest;
    manifest.name = require_string(doc, "name", "manifest", manifest_name);

    const json& classes = require(doc, "classes", "manifest", manifest_name);
    if (!classes.is_array())
        throw Error(ErrorKind::Parse, "'classes' must be an array", manifest_name);
    std::vector<ClassInfo> class_list;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        std::string where = "classes[" + std::to_string(i) + "]";
        const json& id = require(classes[i], "id", where, manifest_name);
        if (!id.is_number_integer())
            throw Error(ErrorKind::Parse, where + ".id must be an integer", manifest_name);
        class_list.push_back({id.get<int>(), require_string(classes[i], "name", where, manifest_name)});
    }
    manifest.classes = with_file_context(manifest_name, [&] { return ClassTable(std::move(class_list)); });

    const json& images = require(doc, "images", "manifest", manifest_name);
    if (!images.is_array())
        throw Error(ErrorKind::Parse, "'images' must be an array", manifest_name);

    std::set<std::string> seen;
    for (std::size_t i = 0; i < images.size(); ++i) {
        std::string where = "images[" + std::to_string(i) + "]";
        ManifestEntry entry;
        entry.image_id = require_string(images[i], "id", where, manifest_name);
        if (!seen.insert(entry.image_id).second)
            throw Error(ErrorKind::Duplicate, "image id '" + entry.image_id + "' listed twice (" + where + ")",
                        manifest_name);
        entry.labels = base_dir / require_string(images[i], "labels", where, manifest_name);
        if (images[i].contains("predictions") && !images[i]["predictions"].is_null()) {
            if (!images[i]["predictions"].is_string())
                throw Error(ErrorKind::Parse, where + ".predictions must be a string", manifest_name);
            entry.predictions = base_dir / images[i]["predictions"].get<std::string>();
        }
        if (options.predictions_dir)
            entry.predictions = *options.predictions_dir / (entry.image_id + ".txt");
        manifest.entries.push_back(std::move(entry));
    }

    manifest.images.reserve(manifest.entries.size());
    for (const auto& entry : manifest.entries) {
        ImageRecord record;
        record.image_id = entry.image_id;

        std::vector<std::string> notes;
        std::string label_text = read_text_file(entry.labels);
        record.ground_truth = with_file_context(entry.labels, [&] {
            return parse_label_file(label_text, manifest.classes, &notes);
        });
        for (auto& n : notes)
            manifest.warnings.push_back(entry.labels.string() + ": " + n);
        notes.clear();

        bool have_predictions = entry.predictions && std::filesystem::exists(*entry.predictions);
        if (entry.predictions && !have_predictions && !options.predictions_dir)
            throw Error(ErrorKind::Io, "cannot read file", entry.predictions->string());
        if (have_predictions) {
            std::string pred_text = read_text_file(*entry.predictions);
            record.detections = with_file_context(*entry.predictions, [&] {
                return parse_prediction_file(pred_text, manifest.classes, &notes);
            });
            for (auto& n : notes)
                manifest.warnings.push_back(entry.predictions->string() + ": " + n);
        } else {
            record.has_predictions = false;
            manifest.warnings.push_back("image '" + entry.image_id + "' has no prediction file");
        }
        manifest.images.push_back(std::move(record));
    }
    return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path, const LoadOptions& options)
{
    std::string text = read_text_file(path);
    return load_manifest_text(text, path.parent_path(), options, path.string());
}

} // namespace firebench
