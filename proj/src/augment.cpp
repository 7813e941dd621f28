#include "wxaug/augment.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "wxaug/io.hpp"
#include "wxaug/json_codec.hpp"
#include "wxaug/seed.hpp"

namespace wxaug {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::string> recipe_problems(const Recipe& recipe) {
  std::vector<std::string> out;
  if (recipe.id.empty()) out.emplace_back("empty recipe id");
  if (recipe.condition == WeatherCondition::kDefault) {
    out.emplace_back("recipe '" + recipe.id + "' targets the default condition");
  }
  if (!condition_allowed(recipe.framework, recipe.condition)) {
    out.emplace_back("recipe '" + recipe.id + "': " + std::string(to_string(recipe.condition)) +
                     " is not available in the " + std::string(to_string(recipe.framework)) +
                     " framework");
  }
  if (recipe.steps.empty()) out.emplace_back("recipe '" + recipe.id + "' has no steps");
  for (std::size_t i = 0; i < recipe.steps.size(); ++i) {
    const auto& s = recipe.steps[i];
    const std::string where = "recipe '" + recipe.id + "' step " + std::to_string(i);
    if (s.prompt.empty()) out.emplace_back(where + ": empty prompt");
    if (!(s.guidance_scale > 0)) out.emplace_back(where + ": guidance_scale must be positive");
    if (s.inference_steps < 1) out.emplace_back(where + ": inference_steps must be at least 1");
  }
  return out;
}

std::vector<Recipe> builtin_recipes(Framework framework) {
  const std::string rain_heavy = "What would it look if it were raining a lot?";
  const std::string rain_lens = "Add raindrops on the camera lens.";
  const std::string fog = "Add dense fog to the image.";
  const std::string night = "What would it look like at night?";
  const std::string dark = "Add a lot of darkness.";

  if (framework == Framework::kSimulated) {
    return {
        {"sim-rain", framework, WeatherCondition::kRain, {{rain_heavy, 1.45, 100}, {rain_lens, 1.65, 100}}},
        {"sim-fog", framework, WeatherCondition::kFog, {{fog, 1.9, 100}}},
        {"sim-night", framework, WeatherCondition::kNight, {{night, 1.5, 100}, {dark, 1.75, 100}}},
    };
  }
  return {
      {"real-rain", framework, WeatherCondition::kRain, {{rain_heavy, 1.35, 250}, {rain_lens, 2.0, 200}}},
      {"real-fog", framework, WeatherCondition::kFog, {{fog, 1.9, 100}}},
      {"real-night", framework, WeatherCondition::kNight, {{night, 1.5, 100}, {dark, 1.75, 100}}},
      {"real-snow", framework, WeatherCondition::kSnow,
       {{"What would it look like were snowing?", 1.25, 150},
        {"Add snowflakes falling from the sky.", 1.5, 125}}},
  };
}

std::vector<Recipe> parse_recipes(std::string_view json_text) {
  json doc = json::parse(json_text);
  if (!doc.is_array()) throw std::runtime_error("recipe file: expected a list of recipes");
  std::vector<Recipe> out;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& jr = doc[i];
    Recipe r;
    try {
      r.id = codec::string_field(jr, "id");
      r.framework = codec::enum_field(jr, "framework", parse_framework);
      r.condition = codec::enum_field(jr, "condition", parse_condition);
      const json& steps = codec::require(jr, "steps");
      if (!steps.is_array()) throw codec::FieldError("steps", "expected a list");
      for (const auto& js : steps) {
        EditStep s;
        s.prompt = codec::string_field(js, "prompt");
        s.guidance_scale = codec::number_field(js, "guidance_scale");
        const json& n = codec::require(js, "inference_steps");
        if (!n.is_number_integer()) throw codec::FieldError("inference_steps", "expected an integer");
        s.inference_steps = n.get<int>();
        r.steps.push_back(std::move(s));
      }
    } catch (const codec::FieldError& e) {
      throw std::runtime_error("recipe " + std::to_string(i) + ": field '" + e.field() + "': " + e.what());
    }
    if (auto problems = recipe_problems(r); !problems.empty()) {
      throw std::runtime_error("recipe file: " + problems.front());
    }
    if (!ids.insert(r.id).second) throw std::runtime_error("recipe file: duplicate id '" + r.id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

std::string serialize_recipes(const std::vector<Recipe>& recipes) {
  json doc = json::array();
  for (const auto& r : recipes) {
    json steps = json::array();
    for (const auto& s : r.steps) {
      steps.push_back({{"prompt", s.prompt},
                       {"guidance_scale", s.guidance_scale},
                       {"inference_steps", s.inference_steps}});
    }
    doc.push_back({{"id", r.id},
                   {"framework", to_string(r.framework)},
                   {"condition", to_string(r.condition)},
                   {"steps", std::move(steps)}});
  }
  return doc.dump(2) + "\n";
}

namespace {

EditResponse call_with_retry(EditBackend& backend, const EditRequest& request,
                             const RetryPolicy& retry, std::size_t step_index) {
  auto backoff = retry.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return backend.edit(request);
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= retry.max_retries) {
        throw AugmentError("step " + std::to_string(step_index) + " (\"" + request.prompt +
                               "\") failed after " + std::to_string(attempt + 1) +
                               " attempt(s): " + e.what(),
                           step_index);
      }
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace

RecipeOutput apply_recipe(const std::vector<std::uint8_t>& image_png, const Recipe& recipe,
                          EditBackend& backend, std::uint64_t seed, const RetryPolicy& retry) {
  if (auto problems = recipe_problems(recipe); !problems.empty()) {
    throw AugmentError(problems.front());
  }
  const ImageSize size = decode_image(image_png).size();

  RecipeOutput out;
  out.image_png = image_png;
  for (std::size_t i = 0; i < recipe.steps.size(); ++i) {
    const EditStep& step = recipe.steps[i];
    EditRequest request{out.image_png, step.prompt, step.guidance_scale, step.inference_steps, seed};
    EditResponse response = call_with_retry(backend, request, retry, i);

    ImageSize got;
    try {
      got = decode_image(response.image_png).size();
    } catch (const ImageError& e) {
      throw ProtocolError("step " + std::to_string(i) + ": undecodable backend image: " + e.what(), i);
    }
    if (got != size) {
      throw ProtocolError("step " + std::to_string(i) + ": backend changed image size from " +
                              std::to_string(size.width) + "x" + std::to_string(size.height) +
                              " to " + std::to_string(got.width) + "x" + std::to_string(got.height),
                          i);
    }
    out.image_png = std::move(response.image_png);
    out.applied_steps.push_back(step);
    out.backend_info.push_back(std::move(response.backend_info));
  }
  return out;
}

RecipeOutput apply_recipe(const Image& image, const Recipe& recipe, EditBackend& backend,
                          std::uint64_t seed, const RetryPolicy& retry) {
  return apply_recipe(encode_png(image), recipe, backend, seed, retry);
}

std::uint64_t augmentation_seed(std::uint64_t global_seed, std::string_view source_id,
                                std::string_view recipe_id) {
  return derive_seed(global_seed, {"augment", source_id, recipe_id});
}

std::string augmented_id(std::string_view source_id, std::string_view recipe_id) {
  std::string id(source_id);
  id += "__";
  id += recipe_id;
  return id;
}

AugmentResult run_augmentation(const DatasetManifest& manifest, const std::vector<Recipe>& recipes,
                               EditBackend& backend, const AugmentOptions& options) {
  if (recipes.empty()) throw AugmentError("no recipes given");
  std::unordered_set<std::string> recipe_ids;
  for (const auto& r : recipes) {
    if (auto problems = recipe_problems(r); !problems.empty()) throw AugmentError(problems.front());
    if (r.framework != manifest.framework) {
      throw AugmentError("recipe '" + r.id + "' is for the " + std::string(to_string(r.framework)) +
                         " framework but the manifest is " +
                         std::string(to_string(manifest.framework)));
    }
    if (!recipe_ids.insert(r.id).second) throw AugmentError("duplicate recipe id '" + r.id + "'");
  }
  if (options.max_in_flight < 1) throw AugmentError("max_in_flight must be at least 1");

  std::unordered_set<std::string> existing;
  for (const auto& r : manifest.records) existing.insert(r.id);

  struct Job {
    const ImageRecord* source;
    const Recipe* recipe;
  };
  AugmentResult result;
  result.manifest = manifest;

  std::vector<Job> jobs;
  for (const auto& record : manifest.records) {
    if (record.is_augmented() || record.condition != WeatherCondition::kDefault) continue;
    if (!options.splits.empty() && !options.splits.contains(manifest.split_of(record.id))) continue;
    for (const auto& recipe : recipes) {
      if (existing.contains(augmented_id(record.id, recipe.id))) {
        ++result.skipped_existing;
        continue;
      }
      jobs.push_back({&record, &recipe});
    }
  }

  const fs::path root = fs::absolute(options.image_root).lexically_normal();
  const fs::path out_dir = fs::absolute(options.output_dir).lexically_normal();
  fs::create_directories(out_dir);

  // One slot per job; filled independently so the outcome does not depend on scheduling.
  std::vector<std::optional<ImageRecord>> produced(jobs.size());
  std::vector<std::optional<std::string>> errors(jobs.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const std::string id = augmented_id(job.source->id, job.recipe->id);
      try {
        auto source_png = read_binary_file(root / job.source->image_path);
        auto output = apply_recipe(source_png, *job.recipe, backend,
                                   augmentation_seed(options.seed, job.source->id, job.recipe->id),
                                   options.retry);
        const fs::path file = out_dir / (id + ".png");
        write_file(file, output.image_png);

        ImageRecord rec;
        rec.id = id;
        rec.image_path = file.lexically_relative(root).generic_string();
        rec.condition = job.recipe->condition;
        rec.provenance = Provenance::kAugmented;
        rec.source_id = job.source->id;
        rec.recipe_id = job.recipe->id;
        rec.review_state = ReviewState::kPending;
        rec.annotations = job.source->annotations;
        produced[i] = std::move(rec);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const auto n_threads = static_cast<std::size_t>(
      std::min<std::size_t>(static_cast<std::size_t>(options.max_in_flight), jobs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (produced[i]) {
      result.manifest.records.push_back(std::move(*produced[i]));
      ++result.generated;
    } else {
      result.failures.push_back({jobs[i].source->id, jobs[i].recipe->id, errors[i].value_or("unknown error")});
    }
  }
  result.manifest.canonicalize();
  return result;
}

}  // namespace wxaug
