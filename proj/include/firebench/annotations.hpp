#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace firebench
{

/// Axis-aligned box in normalized center format (fractions of image size).
struct BoundingBox
{
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    double x1() const noexcept { return cx - w / 2.0; }
    double y1() const noexcept { return cy - h / 2.0; }
    double x2() const noexcept { return cx + w / 2.0; }
    double y2() const noexcept { return cy + h / 2.0; }
    double area() const noexcept { return w * h; }

    /// Build from corner coordinates. Throws Range on a degenerate box.
    static BoundingBox from_corners(double x1, double y1, double x2, double y2);

    /// True when the corners already lie inside the unit square.
    bool inside_unit_square() const noexcept;

    /// Corners clipped to [0,1], re-expressed in center format.
    BoundingBox clamped() const;

    bool operator==(const BoundingBox&) const = default;
};

struct ClassInfo
{
    int id = 0;
    std::string name;

    bool operator==(const ClassInfo&) const = default;
};

/// Class table of a dataset. Ids are unique; lookup is by id.
class ClassTable
{
public:
    ClassTable() = default;
    explicit ClassTable(std::vector<ClassInfo> classes);

    const std::vector<ClassInfo>& classes() const noexcept { return classes_; }
    bool contains(int id) const noexcept { return find(id) != nullptr; }
    const ClassInfo* find(int id) const noexcept;
    const ClassInfo* find(std::string_view name) const noexcept;
    std::string name_of(int id) const;
    std::size_t size() const noexcept { return classes_.size(); }
    bool empty() const noexcept { return classes_.empty(); }

private:
    std::vector<ClassInfo> classes_;
};

struct GroundTruthInstance
{
    int class_id = 0;
    BoundingBox box;

    bool operator==(const GroundTruthInstance&) const = default;
};

struct Detection
{
    int class_id = 0;
    BoundingBox box;
    double confidence = 0.0;

    bool operator==(const Detection&) const = default;
};

struct ImageRecord
{
    std::string image_id;
    std::vector<GroundTruthInstance> ground_truth;
    std::vector<Detection> detections;
    /// False when no prediction file was available for this image.
    bool has_predictions = true;
};

struct ManifestEntry
{
    std::string image_id;
    std::filesystem::path labels;
    std::optional<std::filesystem::path> predictions;
};

struct DatasetManifest
{
    std::string name;
    ClassTable classes;
    std::vector<ManifestEntry> entries;
    std::vector<ImageRecord> images;
    /// Clamping notices and missing-prediction flags collected during load.
    std::vector<std::string> warnings;
};

/// Parse a YOLO label file (`class cx cy w h` per line). Boxes spilling past
/// the unit square are clamped and a note is appended to `warnings`.
std::vector<GroundTruthInstance> parse_label_file(std::string_view text,
                                                  const ClassTable& classes,
                                                  std::vector<std::string>* warnings = nullptr);

/// Parse a prediction file (`class cx cy w h confidence` per line), keeping order.
std::vector<Detection> parse_prediction_file(std::string_view text,
                                             const ClassTable& classes,
                                             std::vector<std::string>* warnings = nullptr);

/// Six-decimal text form; parse_label_file / parse_prediction_file read it back.
std::string format_label_file(const std::vector<GroundTruthInstance>& instances);
std::string format_prediction_file(const std::vector<Detection>& detections);

struct LoadOptions
{
    /// When set, predictions are read from `<dir>/<image_id>.txt` instead of
    /// the manifest's per-image `predictions` entry.
    std::optional<std::filesystem::path> predictions_dir;
};

/// Load a JSON manifest and resolve every label and prediction file relative
/// to the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path, const LoadOptions& options = {});

/// Same as load_manifest but from manifest text already in memory.
DatasetManifest load_manifest_text(std::string_view json_text,
                                   const std::filesystem::path& base_dir,
                                   const LoadOptions& options = {},
                                   const std::string& manifest_name = "<manifest>");

std::string read_text_file(const std::filesystem::path& path);

} // namespace firebench
