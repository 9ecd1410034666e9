#include "fetal/domain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <utility>

#include "fetal/errors.hpp"

namespace fetal {

namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<TaskType, 11> kTaskNames{{
    {TaskType::PlaneClassification, "plane_classification"},
    {TaskType::BrainSubplaneClassification, "brain_subplane_classification"},
    {TaskType::HeadSegmentation, "head_segmentation"},
    {TaskType::AbdomenSegmentation, "abdomen_segmentation"},
    {TaskType::StomachSegmentation, "stomach_segmentation"},
    {TaskType::AoP, "aop"},
    {TaskType::HCMeasurement, "hc_measurement"},
    {TaskType::ACMeasurement, "ac_measurement"},
    {TaskType::GAEstimation, "ga_estimation"},
    {TaskType::ImageCaption, "image_caption"},
    {TaskType::VideoSummary, "video_summary"},
}};

constexpr NameTable<PlaneLabel, 10> kPlaneNames{{
    {PlaneLabel::Abdomen, "abdomen"},
    {PlaneLabel::Brain, "brain"},
    {PlaneLabel::Femur, "femur"},
    {PlaneLabel::Thorax, "thorax"},
    {PlaneLabel::MaternalCervix, "maternal_cervix"},
    {PlaneLabel::Other, "other"},
    {PlaneLabel::TransThalamic, "trans_thalamic"},
    {PlaneLabel::TransVentricular, "trans_ventricular"},
    {PlaneLabel::TransCerebellar, "trans_cerebellar"},
    {PlaneLabel::NonKey, "non_key"},
}};

constexpr NameTable<Measure, 4> kMeasureNames{{
    {Measure::HC, "hc"},
    {Measure::AC, "ac"},
    {Measure::AoP, "aop"},
    {Measure::GA, "ga"},
}};

constexpr NameTable<Unit, 4> kUnitNames{{
    {Unit::Millimeters, "mm"},
    {Unit::Degrees, "degrees"},
    {Unit::Weeks, "weeks"},
    {Unit::Pixels, "pixels"},
}};

template <typename E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E v) {
  for (const auto& [e, name] : table)
    if (e == v) return name;
  return "?";
}

template <typename E, std::size_t N>
E parse_name(const NameTable<E, N>& table, std::string_view s, const char* what) {
  for (const auto& [e, name] : table)
    if (name == s) return e;
  throw ValidationError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(TaskType t) { return name_of(kTaskNames, t); }
std::string_view to_string(PlaneLabel p) { return name_of(kPlaneNames, p); }
std::string_view to_string(Measure m) { return name_of(kMeasureNames, m); }
std::string_view to_string(Unit u) { return name_of(kUnitNames, u); }

TaskType parse_task(std::string_view s) { return parse_name(kTaskNames, s, "task type"); }
PlaneLabel parse_plane(std::string_view s) { return parse_name(kPlaneNames, s, "plane label"); }
Measure parse_measure(std::string_view s) { return parse_name(kMeasureNames, s, "measure"); }
Unit parse_unit(std::string_view s) { return parse_name(kUnitNames, s, "unit"); }

const std::vector<TaskType>& all_tasks() {
  static const std::vector<TaskType> tasks = [] {
    std::vector<TaskType> v;
    for (const auto& [t, _] : kTaskNames) v.push_back(t);
    return v;
  }();
  return tasks;
}

const std::vector<PlaneLabel>& all_planes() {
  static const std::vector<PlaneLabel> planes = [] {
    std::vector<PlaneLabel> v;
    for (const auto& [p, _] : kPlaneNames) v.push_back(p);
    return v;
  }();
  return planes;
}

bool is_brain_subplane(PlaneLabel p) {
  return p == PlaneLabel::TransThalamic || p == PlaneLabel::TransVentricular || p == PlaneLabel::TransCerebellar;
}

PlaneLabel parent_plane(PlaneLabel p) { return is_brain_subplane(p) ? PlaneLabel::Brain : p; }

Unit canonical_unit(Measure m) {
  switch (m) {
    case Measure::HC:
    case Measure::AC:
      return Unit::Millimeters;
    case Measure::AoP:
      return Unit::Degrees;
    case Measure::GA:
      return Unit::Weeks;
  }
  return Unit::Millimeters;
}

std::optional<Measure> measure_of(TaskType t) {
  switch (t) {
    case TaskType::HCMeasurement:
      return Measure::HC;
    case TaskType::ACMeasurement:
      return Measure::AC;
    case TaskType::AoP:
      return Measure::AoP;
    case TaskType::GAEstimation:
      return Measure::GA;
    default:
      return std::nullopt;
  }
}

Date parse_date(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  const std::string str(s);
  if (str.size() != 10 || std::sscanf(str.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3)
    throw ValidationError("date must be YYYY-MM-DD, got '" + str + "'");
  const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw ValidationError("invalid calendar date '" + str + "'");
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

void ImageRef::validate() const {
  if (width < 1 || height < 1) throw ValidationError("image '" + id + "' must be at least 1x1");
  if (pixel_spacing_mm && !(*pixel_spacing_mm > 0.0 && std::isfinite(*pixel_spacing_mm)))
    throw ValidationError("image '" + id + "' pixel spacing must be positive");
}

void PatientMetadata::validate() const {
  if (lmp_date && exam_date && std::chrono::sys_days{*exam_date} < std::chrono::sys_days{*lmp_date})
    throw ValidationError("exam date precedes LMP date");
}

void VideoStream::validate() const {
  if (frames.empty()) throw ValidationError("video '" + id + "' has no frames");
  if (!(fps > 0.0)) throw ValidationError("video fps must be positive");
  for (const auto& f : frames) {
    f.validate();
    if (f.width != frames.front().width || f.height != frames.front().height)
      throw ValidationError("video frames must share dimensions (frame '" + f.id + "')");
  }
  metadata.validate();
}

void Query::validate() const {
  if (image.has_value() == video.has_value()) throw ValidationError("query needs exactly one of image or video");
  if (image) image->validate();
  if (video) video->validate();
}

void StructuredPrompt::validate() const {
  if (instructions.empty()) throw ValidationError("prompt instructions must be non-empty");
}

ClassDistribution::ClassDistribution(std::map<PlaneLabel, double> probs) : probs_(std::move(probs)) {
  double sum = 0.0;
  for (const auto& [label, p] : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("class probability outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) throw ValidationError("class probabilities must sum to 1");
}

ClassDistribution ClassDistribution::normalized(const std::map<PlaneLabel, double>& weights) {
  double sum = 0.0;
  for (const auto& [label, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("class weight must be finite and non-negative");
    sum += w;
  }
  if (!(sum > 0.0)) throw ValidationError("class weights sum to zero");
  std::map<PlaneLabel, double> probs;
  for (const auto& [label, w] : weights) probs[label] = w / sum;
  return ClassDistribution(std::move(probs));
}

double ClassDistribution::prob(PlaneLabel p) const {
  auto it = probs_.find(p);
  return it == probs_.end() ? 0.0 : it->second;
}

PlaneLabel ClassDistribution::argmax() const {
  if (probs_.empty()) throw ValidationError("argmax of empty distribution");
  const std::pair<const PlaneLabel, double>* best = nullptr;
  for (const auto& entry : probs_) {
    if (!best || entry.second > best->second ||
        (entry.second == best->second && to_string(entry.first) < to_string(best->first)))
      best = &entry;
  }
  return best->first;
}

void BiometryValue::validate() const {
  if (!std::isfinite(value)) throw ValidationError("biometry value must be finite");
  if (!(confidence >= 0.0 && confidence <= 1.0)) throw ValidationError("biometry confidence outside [0,1]");
  if (measure == Measure::AoP) {
    if (!(value > 0.0 && value < 180.0)) throw ValidationError("AoP must lie in (0, 180) degrees");
  } else if (!(value > 0.0)) {
    throw ValidationError(std::string(to_string(measure)) + " must be positive");
  }
  const bool uncalibrated = unit == Unit::Pixels && (measure == Measure::HC || measure == Measure::AC);
  if (unit != canonical_unit(measure) && !uncalibrated)
    throw ValidationError("unit " + std::string(to_string(unit)) + " does not match measure " +
                          std::string(to_string(measure)));
}

PayloadKind kind_of(const Payload& p) { return static_cast<PayloadKind>(p.index()); }

std::string_view to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::ClassDistribution:
      return "class_distribution";
    case PayloadKind::Mask:
      return "mask";
    case PayloadKind::MaskSet:
      return "mask_set";
    case PayloadKind::Biometry:
      return "biometry";
  }
  return "?";
}

bool payload_allowed(TaskType task, PayloadKind kind) {
  switch (task) {
    case TaskType::PlaneClassification:
    case TaskType::BrainSubplaneClassification:
    case TaskType::VideoSummary:
      return kind == PayloadKind::ClassDistribution;
    case TaskType::HeadSegmentation:
    case TaskType::AbdomenSegmentation:
    case TaskType::StomachSegmentation:
      return kind == PayloadKind::Mask;
    case TaskType::HCMeasurement:
    case TaskType::ACMeasurement:
      return kind == PayloadKind::Biometry || kind == PayloadKind::Mask;
    case TaskType::AoP:
      return kind == PayloadKind::Biometry || kind == PayloadKind::MaskSet;
    case TaskType::GAEstimation:
      return kind == PayloadKind::Biometry;
    case TaskType::ImageCaption:
      return false;
  }
  return false;
}

ExpertResult ExpertResult::failure(std::string tool_id, TaskType task, std::string message) {
  ExpertResult r;
  r.tool_id = std::move(tool_id);
  r.task = task;
  r.confidence = 0.0;
  r.status = Status::error(std::move(message));
  return r;
}

namespace {

void validate_payload(TaskType task, const Payload& payload) {
  if (!payload_allowed(task, kind_of(payload)))
    throw ValidationError("payload kind " + std::string(to_string(kind_of(payload))) + " not valid for task " +
                          std::string(to_string(task)));
  if (const auto* b = std::get_if<BiometryValue>(&payload)) {
    b->validate();
    if (auto m = measure_of(task); m && *m != b->measure)
      throw ValidationError("biometry measure does not match task " + std::string(to_string(task)));
  }
}

}  // namespace

void ExpertResult::validate() const {
  if (tool_id.empty()) throw ValidationError("expert result without tool_id");
  if (!(confidence >= 0.0 && confidence <= 1.0)) throw ValidationError("expert confidence outside [0,1]");
  if (latency_ms < 0) throw ValidationError("negative latency");
  if (status.ok) {
    if (!payload) throw ValidationError("ok result without payload");
    validate_payload(task, *payload);
  }
}

void FusedResult::validate() const {
  if (contributors.empty()) throw ValidationError("fused result without contributors");
  validate_payload(task, payload);
}

std::string canonical_json(const nlohmann::json& j) { return j.dump(); }

// ---- JSON ---------------------------------------------------------------

void to_json(nlohmann::json& j, const ImageRef& v) {
  j = nlohmann::json{{"id", v.id}, {"width", v.width}, {"height", v.height}};
  if (!v.path.empty()) j["path"] = v.path;
  if (!v.inline_png_base64.empty()) j["png_base64"] = v.inline_png_base64;
  if (v.pixel_spacing_mm) j["pixel_spacing_mm"] = *v.pixel_spacing_mm;
  if (v.plane_hint) j["plane_hint"] = to_string(*v.plane_hint);
}

void from_json(const nlohmann::json& j, ImageRef& v) {
  v = ImageRef{};
  v.id = j.at("id").get<std::string>();
  v.width = j.at("width").get<std::uint32_t>();
  v.height = j.at("height").get<std::uint32_t>();
  if (j.contains("path")) v.path = j["path"].get<std::string>();
  if (j.contains("png_base64")) v.inline_png_base64 = j["png_base64"].get<std::string>();
  if (j.contains("pixel_spacing_mm")) {
    const auto& s = j["pixel_spacing_mm"];
    // Anisotropic spacing arrives as a two-element array and is refused.
    if (s.is_array()) throw ValidationError("anisotropic pixel spacing is not supported");
    v.pixel_spacing_mm = s.get<double>();
  }
  if (j.contains("plane_hint")) v.plane_hint = parse_plane(j["plane_hint"].get<std::string>());
  v.validate();
}

void to_json(nlohmann::json& j, const PatientMetadata& v) {
  j = nlohmann::json::object();
  if (v.lmp_date) j["lmp_date"] = format_date(*v.lmp_date);
  if (v.exam_date) j["exam_date"] = format_date(*v.exam_date);
  if (v.patient_id) j["patient_id"] = *v.patient_id;
}

void from_json(const nlohmann::json& j, PatientMetadata& v) {
  v = PatientMetadata{};
  if (j.contains("lmp_date") && !j["lmp_date"].is_null()) v.lmp_date = parse_date(j["lmp_date"].get<std::string>());
  if (j.contains("exam_date") && !j["exam_date"].is_null())
    v.exam_date = parse_date(j["exam_date"].get<std::string>());
  if (j.contains("patient_id") && !j["patient_id"].is_null()) v.patient_id = j["patient_id"].get<std::string>();
  v.validate();
}

void to_json(nlohmann::json& j, const VideoStream& v) {
  j = nlohmann::json{{"id", v.id}, {"fps", v.fps}, {"frames", v.frames}, {"metadata", v.metadata}};
}

void from_json(const nlohmann::json& j, VideoStream& v) {
  v.id = j.at("id").get<std::string>();
  v.fps = j.at("fps").get<double>();
  v.frames = j.at("frames").get<std::vector<ImageRef>>();
  v.metadata = j.value("metadata", nlohmann::json::object()).get<PatientMetadata>();
  v.validate();
}

nlohmann::json scalar_to_json(const Scalar& v) {
  return std::visit([](const auto& x) { return nlohmann::json(x); }, v);
}

Scalar scalar_from_json(const nlohmann::json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw ValidationError("prompt parameters must be scalars");
}

void to_json(nlohmann::json& j, const StructuredPrompt& v) {
  j = nlohmann::json{{"task", to_string(v.task)}, {"instructions", v.instructions}, {"params", nlohmann::json::object()}};
  for (const auto& [k, s] : v.params) j["params"][k] = scalar_to_json(s);
  if (v.plane) j["plane"] = to_string(*v.plane);
}

void from_json(const nlohmann::json& j, StructuredPrompt& v) {
  v = StructuredPrompt{};
  v.task = parse_task(j.at("task").get<std::string>());
  v.instructions = j.at("instructions").get<std::string>();
  if (j.contains("plane")) v.plane = parse_plane(j["plane"].get<std::string>());
  if (j.contains("params"))
    for (const auto& [k, s] : j["params"].items()) v.params[k] = scalar_from_json(s);
  v.validate();
}

void to_json(nlohmann::json& j, const ClassDistribution& v) {
  j = nlohmann::json::object();
  for (const auto& [label, p] : v.probs()) j[std::string(to_string(label))] = p;
}

void from_json(const nlohmann::json& j, ClassDistribution& v) {
  std::map<PlaneLabel, double> probs;
  for (const auto& [k, p] : j.items()) probs[parse_plane(k)] = p.get<double>();
  v = ClassDistribution(std::move(probs));
}

void to_json(nlohmann::json& j, const BiometryValue& v) {
  j = nlohmann::json{{"measure", to_string(v.measure)},
                     {"value", v.value},
                     {"unit", to_string(v.unit)},
                     {"method", v.method},
                     {"confidence", v.confidence}};
}

void from_json(const nlohmann::json& j, BiometryValue& v) {
  v.measure = parse_measure(j.at("measure").get<std::string>());
  v.value = j.at("value").get<double>();
  v.unit = parse_unit(j.at("unit").get<std::string>());
  v.method = j.value("method", std::string{});
  v.confidence = j.value("confidence", 1.0);
  v.validate();
}

void to_json(nlohmann::json& j, const MaskSet& v) {
  j = nlohmann::json::object();
  for (const auto& [name, m] : v.masks) j[name] = m;
}

void from_json(const nlohmann::json& j, MaskSet& v) {
  v.masks.clear();
  for (const auto& [name, m] : j.items()) v.masks.emplace(name, m.get<Mask>());
}

nlohmann::json payload_to_json(const Payload& p) {
  nlohmann::json j;
  switch (kind_of(p)) {
    case PayloadKind::ClassDistribution:
      j = nlohmann::json{{"probs", std::get<ClassDistribution>(p)}};
      break;
    case PayloadKind::Mask:
      j = std::get<Mask>(p);
      break;
    case PayloadKind::MaskSet:
      j = nlohmann::json{{"masks", std::get<MaskSet>(p)}};
      break;
    case PayloadKind::Biometry:
      j = std::get<BiometryValue>(p);
      break;
  }
  j["kind"] = to_string(kind_of(p));
  return j;
}

Payload payload_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "class_distribution") return j.at("probs").get<ClassDistribution>();
  if (kind == "mask") return j.get<Mask>();
  if (kind == "mask_set") return j.at("masks").get<MaskSet>();
  if (kind == "biometry") return j.get<BiometryValue>();
  throw ValidationError("unknown payload kind '" + kind + "'");
}

void to_json(nlohmann::json& j, const ExpertResult& v) {
  j = nlohmann::json{{"tool_id", v.tool_id},
                     {"task", to_string(v.task)},
                     {"confidence", v.confidence},
                     {"latency_ms", v.latency_ms},
                     {"status", v.status.ok ? "ok" : "error"},
                     {"payload", v.payload ? payload_to_json(*v.payload) : nlohmann::json(nullptr)}};
  if (!v.status.ok) j["error"] = v.status.message;
}

void from_json(const nlohmann::json& j, ExpertResult& v) {
  v = ExpertResult{};
  v.tool_id = j.at("tool_id").get<std::string>();
  v.task = parse_task(j.at("task").get<std::string>());
  v.confidence = j.at("confidence").get<double>();
  v.latency_ms = j.value("latency_ms", std::int64_t{0});
  const auto status = j.at("status").get<std::string>();
  if (status == "ok") {
    v.status = Status::success();
  } else if (status == "error") {
    v.status = Status::error(j.value("error", std::string{"unspecified"}));
  } else {
    throw ValidationError("status must be 'ok' or 'error'");
  }
  if (j.contains("payload") && !j["payload"].is_null()) v.payload = payload_from_json(j["payload"]);
  v.validate();
}

void to_json(nlohmann::json& j, const FusedResult& v) {
  j = nlohmann::json{{"task", to_string(v.task)},
                     {"payload", payload_to_json(v.payload)},
                     {"contributors", v.contributors},
                     {"fusion_rule", v.fusion_rule}};
}

void from_json(const nlohmann::json& j, FusedResult& v) {
  v.task = parse_task(j.at("task").get<std::string>());
  v.payload = payload_from_json(j.at("payload"));
  v.contributors = j.at("contributors").get<std::vector<std::string>>();
  v.fusion_rule = j.at("fusion_rule").get<std::string>();
  v.validate();
}

}  // namespace fetal
