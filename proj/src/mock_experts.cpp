#include "fetal/mock_experts.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fetal/errors.hpp"

namespace fetal {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform in [-1, 1) from the top 53 bits.
double symmetric_unit(std::mt19937_64& rng) {
  return 2.0 * std::ldexp(static_cast<double>(rng() >> 11), -53) - 1.0;
}

ExpertResult ok_result(const std::string& tool_id, const ToolRequest& req, Payload payload, double confidence) {
  ExpertResult r;
  r.tool_id = tool_id;
  r.task = req.task;
  r.payload = std::move(payload);
  r.confidence = confidence;
  return r;
}

bool dims_match(const Payload& p, const ImageRef& img) {
  auto fits = [&](const Mask& m) { return m.width() == img.width && m.height() == img.height; };
  if (const auto* m = std::get_if<Mask>(&p)) return fits(*m);
  if (const auto* s = std::get_if<MaskSet>(&p))
    return std::all_of(s->masks.begin(), s->masks.end(), [&](const auto& kv) { return fits(kv.second); });
  return true;
}

Payload perturb(const Payload& base, std::uint64_t seed, double amplitude, const std::string& image_id) {
  std::mt19937_64 rng(seed ^ fnv1a(image_id));
  if (const auto* cd = std::get_if<ClassDistribution>(&base)) {
    std::map<PlaneLabel, double> w;
    for (const auto& [label, p] : cd->probs()) w[label] = std::max(0.0, p * (1.0 + amplitude * symmetric_unit(rng)));
    return ClassDistribution::normalized(w);
  }
  if (const auto* b = std::get_if<BiometryValue>(&base)) {
    BiometryValue v = *b;
    v.value *= 1.0 + amplitude * symmetric_unit(rng);
    v.validate();
    return v;
  }
  throw ValidationError("noisy mocks support class distributions and biometry values only");
}

}  // namespace

Mask render_ellipse(std::uint32_t width, std::uint32_t height, const mock::SyntheticEllipse& e) {
  if (!(e.a > 0) || !(e.b > 0)) throw ValidationError("ellipse semi-axes must be positive");
  const double r = std::max(e.a, e.b);
  const double c = std::cos(e.rotation), s = std::sin(e.rotation);
  const auto lo = [](double v) { return static_cast<std::int64_t>(std::max(0.0, std::ceil(v))); };
  const auto x0 = lo(e.cx - r), y0 = lo(e.cy - r);
  const auto x1 = std::min<std::int64_t>(width - 1, static_cast<std::int64_t>(std::floor(e.cx + r)));
  const auto y1 = std::min<std::int64_t>(height - 1, static_cast<std::int64_t>(std::floor(e.cy + r)));
  std::vector<std::uint64_t> idx;
  for (std::int64_t y = y0; y <= y1; ++y) {
    for (std::int64_t x = x0; x <= x1; ++x) {
      const double dx = static_cast<double>(x) - e.cx, dy = static_cast<double>(y) - e.cy;
      const double u = dx * c + dy * s, v = -dx * s + dy * c;
      if ((u / e.a) * (u / e.a) + (v / e.b) * (v / e.b) <= 1.0)
        idx.push_back(static_cast<std::uint64_t>(y) * width + static_cast<std::uint64_t>(x));
    }
  }
  return Mask::from_indices(width, height, std::move(idx));
}

ExpertResult MockTool::run(const std::string& tool_id, const ToolRequest& req) {
  try {
    const auto finish = [&](Payload p, double confidence) {
      if (!payload_allowed(req.task, kind_of(p)))
        return ExpertResult::failure(tool_id, req.task,
                                     std::string("payload ") + std::string(to_string(kind_of(p))) + " not valid for task " +
                                         std::string(to_string(req.task)));
      if (!dims_match(p, req.image)) return ExpertResult::failure(tool_id, req.task, "mask dimensions do not match image");
      return ok_result(tool_id, req, std::move(p), confidence);
    };
    return std::visit(
        [&](const auto& k) -> ExpertResult {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, mock::Constant>) {
            return finish(k.payload, k.confidence);
          } else if constexpr (std::is_same_v<K, mock::Lookup>) {
            auto it = k.table.find(req.image.id);
            if (it == k.table.end())
              return ExpertResult::failure(tool_id, req.task, "lookup miss for image '" + req.image.id + "'");
            MockTool inner(*it->second);
            return inner.run(tool_id, req);
          } else if constexpr (std::is_same_v<K, mock::Scripted>) {
            std::unique_lock lock(mu_);
            if (cursor_ >= k.sequence.size()) return ExpertResult::failure(tool_id, req.task, "script exhausted");
            Payload p = k.sequence[cursor_++];
            lock.unlock();
            return finish(std::move(p), k.confidence);
          } else if constexpr (std::is_same_v<K, mock::SyntheticEllipse>) {
            return finish(render_ellipse(req.image.width, req.image.height, k), k.confidence);
          } else {
            return finish(perturb(k.base, k.seed, k.amplitude, req.image.id), k.confidence);
          }
        },
        behavior_.kind);
  } catch (const std::exception& e) {
    return ExpertResult::failure(tool_id, req.task, e.what());
  }
}

ExpertResult mock_classifier(MockTool& tool, const std::string& tool_id, const ToolRequest& req) {
  auto r = tool.run(tool_id, req);
  if (r.ok() && !std::holds_alternative<ClassDistribution>(*r.payload))
    return ExpertResult::failure(tool_id, req.task, "classifier mock must yield a class distribution");
  return r;
}

ExpertResult mock_segmenter(MockTool& tool, const std::string& tool_id, const ToolRequest& req) {
  auto r = tool.run(tool_id, req);
  if (r.ok() && !std::holds_alternative<Mask>(*r.payload) && !std::holds_alternative<MaskSet>(*r.payload))
    return ExpertResult::failure(tool_id, req.task, "segmenter mock must yield a mask");
  return r;
}

MockBehavior parse_mock_behavior(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const double confidence = j.value("confidence", 1.0);
  if (!(confidence >= 0 && confidence <= 1)) throw ConfigError("mock confidence must lie in [0,1]");
  if (kind == "constant") return {mock::Constant{payload_from_json(j.at("payload")), confidence}};
  if (kind == "lookup") {
    mock::Lookup l;
    for (const auto& [id, b] : j.at("table").items())
      l.table[id] = std::make_shared<const MockBehavior>(parse_mock_behavior(b));
    return {std::move(l)};
  }
  if (kind == "scripted") {
    mock::Scripted s;
    for (const auto& p : j.at("sequence")) s.sequence.push_back(payload_from_json(p));
    s.confidence = confidence;
    return {std::move(s)};
  }
  if (kind == "synthetic_ellipse") {
    mock::SyntheticEllipse e;
    const auto c = j.at("center").get<std::array<double, 2>>();
    const auto ax = j.at("semi_axes").get<std::array<double, 2>>();
    e.cx = c[0];
    e.cy = c[1];
    e.a = ax[0];
    e.b = ax[1];
    e.rotation = j.value("rotation", 0.0);
    e.confidence = confidence;
    if (!(e.a > 0) || !(e.b > 0)) throw ConfigError("synthetic_ellipse semi-axes must be positive");
    return {e};
  }
  if (kind == "noisy") {
    mock::Noisy n{payload_from_json(j.at("base")), j.at("seed").get<std::uint64_t>(), j.value("amplitude", 0.05),
                  confidence};
    if (!(n.amplitude >= 0 && n.amplitude < 1)) throw ConfigError("noise amplitude must lie in [0,1)");
    return {std::move(n)};
  }
  for (auto k : {PayloadKind::ClassDistribution, PayloadKind::Mask, PayloadKind::MaskSet, PayloadKind::Biometry})
    if (kind == to_string(k)) return {mock::Constant{payload_from_json(j), confidence}};
  throw ConfigError("unknown mock kind '" + kind + "'");
}

MockRegistry::MockRegistry() {
  add("const_brain", MockBehavior{mock::Constant{ClassDistribution({{PlaneLabel::Brain, 1.0}}), 1.0}});
}

void MockRegistry::add(const std::string& name, MockBehavior behavior) {
  mocks_[name] = std::make_unique<MockTool>(std::move(behavior));
}

MockTool& MockRegistry::get(const std::string& name) const {
  auto it = mocks_.find(name);
  if (it == mocks_.end()) throw ConfigError("unknown mock '" + name + "'");
  return *it->second;
}

}  // namespace fetal
