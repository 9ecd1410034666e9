#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fetal/mask.hpp"

namespace fetal {

enum class TaskType {
  PlaneClassification,
  BrainSubplaneClassification,
  HeadSegmentation,
  AbdomenSegmentation,
  StomachSegmentation,
  AoP,
  HCMeasurement,
  ACMeasurement,
  GAEstimation,
  ImageCaption,
  VideoSummary,
};

// Standard planes, brain sub-planes, and NonKey, the background class used
// only by keyframe scorers. NonKey is never a plane identification result.
enum class PlaneLabel {
  Abdomen,
  Brain,
  Femur,
  Thorax,
  MaternalCervix,
  Other,
  TransThalamic,
  TransVentricular,
  TransCerebellar,
  NonKey,
};

enum class Measure { HC, AC, AoP, GA };
enum class Unit { Millimeters, Degrees, Weeks, Pixels };

std::string_view to_string(TaskType t);
std::string_view to_string(PlaneLabel p);
std::string_view to_string(Measure m);
std::string_view to_string(Unit u);

// Parsers throw ValidationError on unknown names.
TaskType parse_task(std::string_view s);
PlaneLabel parse_plane(std::string_view s);
Measure parse_measure(std::string_view s);
Unit parse_unit(std::string_view s);

const std::vector<TaskType>& all_tasks();
const std::vector<PlaneLabel>& all_planes();

bool is_brain_subplane(PlaneLabel p);
// Sub-planes map to Brain; everything else maps to itself.
PlaneLabel parent_plane(PlaneLabel p);
Unit canonical_unit(Measure m);
// The measure a biometry task produces, if any.
std::optional<Measure> measure_of(TaskType t);

using Date = std::chrono::year_month_day;
// ISO yyyy-mm-dd.
Date parse_date(std::string_view s);
std::string format_date(const Date& d);

struct ImageRef {
  std::string id;
  // Absolute path of the image, or empty when the bytes travel inline.
  std::string path;
  // Base64 PNG bytes when inline.
  std::string inline_png_base64;
  std::uint32_t width = 1;
  std::uint32_t height = 1;
  std::optional<double> pixel_spacing_mm;
  std::optional<PlaneLabel> plane_hint;

  void validate() const;
  bool operator==(const ImageRef&) const = default;
};

struct PatientMetadata {
  std::optional<Date> lmp_date;
  std::optional<Date> exam_date;
  std::optional<std::string> patient_id;

  void validate() const;
  bool operator==(const PatientMetadata&) const = default;
};

struct VideoStream {
  std::string id;
  std::vector<ImageRef> frames;
  double fps = 1.0;
  PatientMetadata metadata;

  void validate() const;
};

struct Query {
  std::string text;
  std::optional<ImageRef> image;
  std::optional<VideoStream> video;

  void validate() const;
};

using Scalar = std::variant<bool, std::int64_t, double, std::string>;
using ParamMap = std::map<std::string, Scalar>;

struct StructuredPrompt {
  TaskType task = TaskType::ImageCaption;
  std::optional<PlaneLabel> plane;
  std::string instructions;
  ParamMap params;

  void validate() const;
  bool operator==(const StructuredPrompt&) const = default;
};

class ClassDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  ClassDistribution() = default;
  // Throws ValidationError if any entry is outside [0,1] or the sum is off by > 1e-9.
  explicit ClassDistribution(std::map<PlaneLabel, double> probs);
  // Scales non-negative weights to sum 1; throws if all are zero.
  static ClassDistribution normalized(const std::map<PlaneLabel, double>& weights);

  [[nodiscard]] const std::map<PlaneLabel, double>& probs() const { return probs_; }
  [[nodiscard]] double prob(PlaneLabel p) const;
  // Highest probability, ties broken by label name.
  [[nodiscard]] PlaneLabel argmax() const;

  bool operator==(const ClassDistribution&) const = default;

 private:
  std::map<PlaneLabel, double> probs_;
};

struct BiometryValue {
  Measure measure = Measure::HC;
  double value = 0.0;
  Unit unit = Unit::Millimeters;
  std::string method;
  double confidence = 1.0;

  void validate() const;
  bool operator==(const BiometryValue&) const = default;
};

// Multi-structure segmentation output, e.g. {"symphysis", "head"} for AoP.
struct MaskSet {
  std::map<std::string, Mask> masks;
  bool operator==(const MaskSet&) const = default;
};

using Payload = std::variant<ClassDistribution, Mask, MaskSet, BiometryValue>;

enum class PayloadKind { ClassDistribution, Mask, MaskSet, Biometry };
PayloadKind kind_of(const Payload& p);
std::string_view to_string(PayloadKind k);
// Payload kinds a tool may return for a task. Biometry tasks also accept
// masks, which the expert converts into measurements.
bool payload_allowed(TaskType task, PayloadKind kind);

struct Status {
  bool ok = true;
  std::string message;

  static Status success() { return {}; }
  static Status error(std::string msg) { return {false, std::move(msg)}; }
  bool operator==(const Status&) const = default;
};

struct ExpertResult {
  std::string tool_id;
  TaskType task = TaskType::PlaneClassification;
  std::optional<Payload> payload;
  double confidence = 1.0;
  std::int64_t latency_ms = 0;
  Status status;

  [[nodiscard]] bool ok() const { return status.ok; }
  static ExpertResult failure(std::string tool_id, TaskType task, std::string message);
  void validate() const;
  bool operator==(const ExpertResult&) const = default;
};

struct FusedResult {
  TaskType task = TaskType::PlaneClassification;
  Payload payload;
  std::vector<std::string> contributors;
  std::string fusion_rule;

  void validate() const;
  bool operator==(const FusedResult&) const = default;
};

// Canonical JSON: sorted keys, no whitespace, shortest round-trip reals.
std::string canonical_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const ImageRef& v);
void from_json(const nlohmann::json& j, ImageRef& v);
void to_json(nlohmann::json& j, const PatientMetadata& v);
void from_json(const nlohmann::json& j, PatientMetadata& v);
void to_json(nlohmann::json& j, const VideoStream& v);
void from_json(const nlohmann::json& j, VideoStream& v);
nlohmann::json scalar_to_json(const Scalar& v);
Scalar scalar_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const StructuredPrompt& v);
void from_json(const nlohmann::json& j, StructuredPrompt& v);
void to_json(nlohmann::json& j, const ClassDistribution& v);
void from_json(const nlohmann::json& j, ClassDistribution& v);
void to_json(nlohmann::json& j, const BiometryValue& v);
void from_json(const nlohmann::json& j, BiometryValue& v);
void to_json(nlohmann::json& j, const MaskSet& v);
void from_json(const nlohmann::json& j, MaskSet& v);
nlohmann::json payload_to_json(const Payload& p);
Payload payload_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const ExpertResult& v);
void from_json(const nlohmann::json& j, ExpertResult& v);
void to_json(nlohmann::json& j, const FusedResult& v);
void from_json(const nlohmann::json& j, FusedResult& v);

}  // namespace fetal
