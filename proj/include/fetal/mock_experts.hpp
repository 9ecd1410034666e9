#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fetal/domain.hpp"
#include "fetal/protocol.hpp"

namespace fetal {

struct MockBehavior;

namespace mock {

struct Constant {
  Payload payload;
  double confidence = 1.0;
};

// Per-image behaviors; a miss yields an error-status result.
struct Lookup {
  std::map<std::string, std::shared_ptr<const MockBehavior>> table;
};

struct Scripted {
  std::vector<Payload> sequence;
  double confidence = 1.0;
};

// Filled ellipse rasterized on the request image by pixel-center inclusion.
struct SyntheticEllipse {
  double cx = 0, cy = 0;
  double a = 1, b = 1;
  double rotation = 0;
  double confidence = 1.0;
};

// Multiplicative perturbation of a class distribution or biometry value,
// seeded by (seed, image id).
struct Noisy {
  Payload base;
  std::uint64_t seed = 0;
  double amplitude = 0.05;
  double confidence = 1.0;
};

}  // namespace mock

struct MockBehavior {
  std::variant<mock::Constant, mock::Lookup, mock::Scripted, mock::SyntheticEllipse, mock::Noisy> kind;
};

// A behavior plus the cursor state scripted sequences need.
class MockTool {
 public:
  explicit MockTool(MockBehavior behavior) : behavior_(std::move(behavior)) {}

  // Never throws for behavior-level failures; those become error-status results.
  ExpertResult run(const std::string& tool_id, const ToolRequest& req);

 private:
  MockBehavior behavior_;
  std::mutex mu_;
  std::size_t cursor_ = 0;
};

ExpertResult mock_classifier(MockTool& tool, const std::string& tool_id, const ToolRequest& req);
ExpertResult mock_segmenter(MockTool& tool, const std::string& tool_id, const ToolRequest& req);

Mask render_ellipse(std::uint32_t width, std::uint32_t height, const mock::SyntheticEllipse& e);

// JSON form:
//   {"kind":"constant","payload":P,"confidence":c}
//   {"kind":"lookup","table":{"img":B,...}}     B: behavior or bare payload
//   {"kind":"scripted","sequence":[P,...]}
//   {"kind":"synthetic_ellipse","center":[x,y],"semi_axes":[a,b],"rotation":r}
//   {"kind":"noisy","base":P,"seed":s,"amplitude":a}
// A bare payload (its kind is a payload kind) is read as a constant.
MockBehavior parse_mock_behavior(const nlohmann::json& j);

class MockRegistry {
 public:
  // Registers the built-in presets, e.g. "const_brain".
  MockRegistry();
  void add(const std::string& name, MockBehavior behavior);
  [[nodiscard]] bool contains(const std::string& name) const { return mocks_.contains(name); }
  // Throws ConfigError on an unknown name.
  MockTool& get(const std::string& name) const;

 private:
  std::map<std::string, std::unique_ptr<MockTool>> mocks_;
};

}  // namespace fetal
