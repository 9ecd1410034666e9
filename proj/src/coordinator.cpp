#include "fetal/coordinator.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "fetal/errors.hpp"

namespace fetal {

namespace detail {
extern const char* const kBuiltinLexicon;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string title_of(TaskType t) {
  std::string s(to_string(t));
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

}  // namespace

bool phrase_matches(std::string_view text, std::string_view pattern) {
  const std::string t = lower(text), p = lower(pattern);
  if (p.empty()) return false;
  for (auto pos = t.find(p); pos != std::string::npos; pos = t.find(p, pos + 1)) {
    const bool left = pos == 0 || !is_word_char(t[pos - 1]);
    const bool right = pos + p.size() == t.size() || !is_word_char(t[pos + p.size()]);
    if (left && right) return true;
  }
  return false;
}

Lexicon::Lexicon(std::vector<IntentRule> rules) : rules_(std::move(rules)) {
  for (const auto& r : rules_)
    if (r.pattern.empty()) throw ConfigError("lexicon rule with an empty pattern");
}

Lexicon Lexicon::builtin() { return from_json(nlohmann::json::parse(detail::kBuiltinLexicon)); }

Lexicon Lexicon::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("lexicon must be a JSON array");
  std::vector<IntentRule> rules;
  std::size_t i = 0;
  for (const auto& r : j) {
    try {
      rules.push_back({r.at("pattern").get<std::string>(), parse_task(r.at("task").get<std::string>()),
                       r.at("priority").get<int>()});
    } catch (const std::exception& e) {
      throw ConfigError("lexicon rule " + std::to_string(i) + ": " + e.what());
    }
    ++i;
  }
  return Lexicon(std::move(rules));
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open lexicon '" + path.string() + "'");
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("lexicon '" + path.string() + "' is not valid JSON");
  return from_json(j);
}

const IntentRule* Lexicon::match(std::string_view text) const {
  const IntentRule* best = nullptr;
  for (const auto& r : rules_)
    if ((!best || r.priority > best->priority) && phrase_matches(text, r.pattern)) best = &r;
  return best;
}

bool Lexicon::mentions(std::string_view text, TaskType task) const {
  return std::any_of(rules_.begin(), rules_.end(),
                     [&](const IntentRule& r) { return r.task == task && phrase_matches(text, r.pattern); });
}

TaskType classify_intent(const Query& q, const Lexicon& lexicon) {
  const bool video = q.video.has_value();
  if (const auto* r = lexicon.match(q.text); r && (video || r->task != TaskType::VideoSummary)) return r->task;
  return video ? TaskType::VideoSummary : TaskType::ImageCaption;
}

TaskType ToolIntentParser::classify(const Query& q) {
  const bool video = q.video.has_value();
  auto tasks = nlohmann::json::array();
  for (auto t : all_tasks())
    if (video || t != TaskType::VideoSummary) tasks.push_back(to_string(t));
  const std::string id = "intent-" + std::to_string(++counter_);
  const nlohmann::json req{{"request_id", id}, {"query", q.text}, {"input", video ? "video" : "image"}, {"tasks", tasks}};
  const auto out = client_.exchange(tool_, req, id);
  if (out.status == ExchangeOutcome::Status::Ok) {
    const auto it = out.body.find("task");
    if (it != out.body.end() && it->is_string()) {
      try {
        const TaskType t = parse_task(it->get<std::string>());
        if (video || t != TaskType::VideoSummary) return t;
      } catch (const ValidationError&) {
      }
    }
  }
  ++fallbacks_;
  return classify_intent(q, fallback_);
}

PlaneIdentification identify_plane(const ImageRef& image, const ExpertRegistry& registry, ToolClient& client,
                                   const std::string& request_id, std::size_t parallelism) {
  PlaneIdentification out;
  const ExpertSpec* plane_expert = registry.for_task(TaskType::PlaneClassification);
  if (!plane_expert) {
    if (!image.plane_hint)
      throw PlanError("no expert registered for task plane_classification and the image has no plane hint");
    out.plane = parent_plane(*image.plane_hint);
    out.confidence = 1.0;
    if (is_brain_subplane(*image.plane_hint)) {
      out.subplane = *image.plane_hint;
      out.subplane_confidence = 1.0;
    }
  } else {
    ToolRequest req;
    req.request_id = request_id + "." + plane_expert->expert_id;
    req.task = TaskType::PlaneClassification;
    req.prompt = make_prompt(TaskType::PlaneClassification, std::nullopt, "");
    req.image = image;
    auto res = run_expert(client, *plane_expert, req, parallelism);
    PlaneLabel label = res.label.value_or(PlaneLabel::Other);
    if (label == PlaneLabel::NonKey) label = PlaneLabel::Other;
    out.plane = parent_plane(label);
    out.confidence = res.label_probability;
    if (is_brain_subplane(label)) {
      out.subplane = label;
      out.subplane_confidence = res.label_probability;
    }
    out.fused.push_back(std::move(res.fused));
    out.per_tool = std::move(res.per_tool);
  }
  const ExpertSpec* sub_expert = registry.for_task(TaskType::BrainSubplaneClassification);
  if (out.plane == PlaneLabel::Brain && !out.subplane && sub_expert) {
    ToolRequest req;
    req.request_id = request_id + "." + sub_expert->expert_id;
    req.task = TaskType::BrainSubplaneClassification;
    req.prompt = make_prompt(TaskType::BrainSubplaneClassification, PlaneLabel::Brain, "");
    req.image = image;
    auto res = run_expert(client, *sub_expert, req, parallelism);
    if (res.label && is_brain_subplane(*res.label)) {
      out.subplane = res.label;
      out.subplane_confidence = res.label_probability;
    }
    out.fused.push_back(std::move(res.fused));
    out.per_tool.insert(out.per_tool.end(), res.per_tool.begin(), res.per_tool.end());
  }
  return out;
}

void DispatchPlan::validate(const ExpertRegistry& registry) const {
  if (experts.empty()) throw PlanError("plan names no experts");
  prompt.validate();
  for (const auto& id : experts) (void)registry.get(id);
}

void to_json(nlohmann::json& j, const DispatchPlan& p) {
  j = nlohmann::json{{"task", to_string(p.task)}, {"prompt", p.prompt}, {"experts", p.experts}};
  j["plane"] = p.plane ? nlohmann::json(to_string(*p.plane)) : nlohmann::json(nullptr);
}

std::vector<TaskType> caption_suite(std::optional<PlaneLabel> plane, std::string_view text, const Lexicon& lexicon) {
  const auto parent = plane ? std::optional(parent_plane(*plane)) : std::nullopt;
  if (parent == PlaneLabel::Brain) return {TaskType::HeadSegmentation, TaskType::HCMeasurement, TaskType::GAEstimation};
  if (parent == PlaneLabel::Abdomen)
    return {TaskType::AbdomenSegmentation, TaskType::StomachSegmentation, TaskType::ACMeasurement};
  if ((parent == PlaneLabel::MaternalCervix || parent == PlaneLabel::Other) && lexicon.mentions(text, TaskType::AoP))
    return {TaskType::AoP};
  return {TaskType::PlaneClassification};
}

StructuredPrompt make_prompt(TaskType task, std::optional<PlaneLabel> plane, std::string_view text) {
  StructuredPrompt p;
  p.task = task;
  p.plane = plane;
  p.instructions = "Perform " + title_of(task) + (plane ? " on a " + std::string(to_string(*plane)) + " plane image" : "") +
                   ". Query: " + (text.empty() ? std::string("(none)") : std::string(text));
  return p;
}

DispatchPlan build_plan(const Query& q, TaskType task, std::optional<PlaneLabel> plane, const ExpertRegistry& registry,
                        const Lexicon& lexicon) {
  DispatchPlan plan;
  plan.task = task;
  plan.plane = plane;
  plan.prompt = make_prompt(task, plane, q.text);
  const std::vector<TaskType> tasks = task == TaskType::ImageCaption ? caption_suite(plane, q.text, lexicon)
                                                                     : std::vector<TaskType>{task};
  for (const TaskType t : tasks) {
    const ExpertSpec* e = registry.for_task(t);
    if (!e) throw PlanError("no expert registered for task " + std::string(to_string(t)));
    plan.experts.push_back(e->expert_id);
  }
  return plan;
}

}  // namespace fetal
