#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "promptweight/augment.hpp"
#include "promptweight/image.hpp"
#include "promptweight/types.hpp"

namespace promptweight {

enum class AnswerClass { Yes, No, Invalid };

/// Lowercases and strips surrounding whitespace and punctuation.
std::string normalize_answer(std::string_view raw);

/// "yes" / "no" after normalization; anything else, including an empty
/// answer or a full sentence, is invalid.
AnswerClass classify_answer(std::string_view raw);

/// Folds one prompt's answers over the variants of an image into a cell
/// oriented by state: a YES to a -1 prompt is a vote for -1.
VqaCell tally_answers(std::span<const AnswerClass> answers, Sign polarity);

/// One augmented variant of a dataset image as seen by a backend. `pixels`
/// is null when the backend does not need image content.
struct VariantRef {
    std::string_view image_id;
    std::size_t variant = 0;
    const RgbImage* pixels = nullptr;
};

/// A source of VQA answers / ITR similarities. Implementations must be safe
/// to call from several threads at once.
class ScoreBackend {
public:
    virtual ~ScoreBackend() = default;

    virtual std::string identifier() const = 0;
    virtual bool supports(Task task) const = 0;
    virtual bool needs_pixels() const { return true; }

    /// One raw answer per prompt, same order.
    virtual std::vector<std::string> answer_vqa(const VariantRef& v,
                                                std::span<const Prompt> prompts) const = 0;
    /// One similarity in [-1, 1] per prompt, same order.
    virtual std::vector<double> score_itr(const VariantRef& v,
                                          std::span<const Prompt> prompts) const = 0;
};

struct BuildOptions {
    int jobs = 4;  // backend requests in flight
    /// Directory that relative image paths in the manifest resolve against.
    std::filesystem::path base_dir;
};

ScoreMatrix build_vqa_matrix(const DatasetManifest& ds, const PromptSet& ps,
                             const ScoreBackend& backend, const AugmentConfig& aug,
                             const BuildOptions& opts = {});
ScoreMatrix build_itr_matrix(const DatasetManifest& ds, const PromptSet& ps,
                             const ScoreBackend& backend, const AugmentConfig& aug,
                             const BuildOptions& opts = {});
ScoreMatrix build_matrix(const DatasetManifest& ds, const PromptSet& ps,
                         const ScoreBackend& backend, const AugmentConfig& aug,
                         const BuildOptions& opts = {});

/// Replays a stored matrix keyed by (image id, prompt id, variant index).
/// VQA cells are replayed as answers in the prompt's own phrasing: the first
/// `yes` variants vote +1, the next `no` vote -1, the rest are unanswerable.
class CachedBackend final : public ScoreBackend {
public:
    explicit CachedBackend(ScoreMatrix matrix);
    static std::unique_ptr<CachedBackend> from_file(const std::filesystem::path& path);

    std::string identifier() const override { return matrix_.provenance.backend; }
    bool supports(Task task) const override { return task == matrix_.task; }
    bool needs_pixels() const override { return false; }

    std::vector<std::string> answer_vqa(const VariantRef& v,
                                        std::span<const Prompt> prompts) const override;
    std::vector<double> score_itr(const VariantRef& v,
                                  std::span<const Prompt> prompts) const override;

    const ScoreMatrix& matrix() const { return matrix_; }

private:
    const Cell& lookup(const VariantRef& v, const Prompt& p) const;

    ScoreMatrix matrix_;
    std::unordered_map<std::string, std::size_t> image_index_;
    std::unordered_map<std::string, std::size_t> prompt_index_;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{100};
};

/// Client for the scoring bridge's HTTP/JSON protocol (/v1/vqa, /v1/itr, /v1/health).
class HttpBackend final : public ScoreBackend {
public:
    explicit HttpBackend(std::string base_url, RetryPolicy retry = {},
                         std::chrono::seconds timeout = std::chrono::seconds(60));

    std::string identifier() const override { return "remote:" + base_url_; }
    bool supports(Task) const override { return true; }

    std::vector<std::string> answer_vqa(const VariantRef& v,
                                        std::span<const Prompt> prompts) const override;
    std::vector<double> score_itr(const VariantRef& v,
                                  std::span<const Prompt> prompts) const override;

    /// Models reported by GET /v1/health.
    std::vector<std::string> health() const;

private:
    std::string post(const std::string& path, const std::string& body) const;
    std::string get(const std::string& path) const;

    std::string base_url_;
    RetryPolicy retry_;
    std::chrono::seconds timeout_;
};

/// `cached:<path>` or an http(s) URL.
std::unique_ptr<ScoreBackend> make_backend(const std::string& spec);

}  // namespace promptweight
