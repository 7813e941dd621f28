#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wxaug/backend.hpp"
#include "wxaug/image.hpp"
#include "wxaug/manifest.hpp"

namespace wxaug {

struct EditStep {
  std::string prompt;
  double guidance_scale = 1.0;
  int inference_steps = 1;

  bool operator==(const EditStep&) const = default;
};

// An ordered prompt sequence producing one weather condition.
struct Recipe {
  std::string id;
  Framework framework = Framework::kSimulated;
  WeatherCondition condition = WeatherCondition::kRain;
  std::vector<EditStep> steps;

  bool operator==(const Recipe&) const = default;
};

/// Empty when the recipe is well formed.
std::vector<std::string> recipe_problems(const Recipe& recipe);

/// The prompt recipes used for each framework, in condition order.
std::vector<Recipe> builtin_recipes(Framework framework);

/// Recipe file: JSON list of {"id","framework","condition","steps":[{"prompt",
/// "guidance_scale","inference_steps"}]}. Throws std::runtime_error on invalid recipes.
std::vector<Recipe> parse_recipes(std::string_view json_text);
std::string serialize_recipes(const std::vector<Recipe>& recipes);

class AugmentError : public std::runtime_error {
 public:
  AugmentError(const std::string& message, std::optional<std::size_t> step_index = std::nullopt)
      : std::runtime_error(message), step_index_(step_index) {}
  std::optional<std::size_t> step_index() const { return step_index_; }

 private:
  std::optional<std::size_t> step_index_;
};

/// The backend changed the image dimensions.
class ProtocolError : public AugmentError {
 public:
  using AugmentError::AugmentError;
};

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{250};
};

struct RecipeOutput {
  std::vector<std::uint8_t> image_png;
  std::vector<EditStep> applied_steps;  // in execution order
  std::vector<std::string> backend_info;
};

/// Runs the recipe's steps in order, feeding each output into the next request.
RecipeOutput apply_recipe(const std::vector<std::uint8_t>& image_png, const Recipe& recipe,
                          EditBackend& backend, std::uint64_t seed,
                          const RetryPolicy& retry = {});
RecipeOutput apply_recipe(const Image& image, const Recipe& recipe, EditBackend& backend,
                          std::uint64_t seed, const RetryPolicy& retry = {});

/// Seed for one (source image, recipe) pair.
std::uint64_t augmentation_seed(std::uint64_t global_seed, std::string_view source_id,
                                std::string_view recipe_id);

std::string augmented_id(std::string_view source_id, std::string_view recipe_id);

struct AugmentOptions {
  std::uint64_t seed = 0;
  int max_in_flight = 1;
  std::filesystem::path image_root;  // record image paths resolve against this
  std::filesystem::path output_dir;  // where <source_id>__<recipe_id>.png is written
  std::set<Split> splits;            // source splits to augment; empty means all
  RetryPolicy retry;
};

struct AugmentFailure {
  std::string source_id;
  std::string recipe_id;
  std::string message;
};

struct AugmentResult {
  DatasetManifest manifest;
  std::vector<AugmentFailure> failures;
  std::size_t generated = 0;
  std::size_t skipped_existing = 0;
};

/// Appends one pending augmented record per (default-condition source, recipe).
/// Per-image failures are collected; the run carries on with the remaining images.
AugmentResult run_augmentation(const DatasetManifest& manifest, const std::vector<Recipe>& recipes,
                               EditBackend& backend, const AugmentOptions& options);

}  // namespace wxaug
