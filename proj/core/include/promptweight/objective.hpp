#pragma once

#include <span>
#include <string>
#include <vector>

#include "promptweight/types.hpp"

namespace promptweight {

/// Correct-response rate of one prompt on one image: the share of valid
/// answers that agree with the label, or 0 when every answer was invalid.
double derive_a(const VqaCell& cell, Sign label);

/// Mean similarity over the stored variants.
double derive_b(const ItrCell& cell);

/// Sum_i w_i x_i / Sum_i w_i. Throws ZeroWeightSumError when Sum_i w_i == 0.
double weighted_rate(std::span<const double> w, std::span<const double> row);

/// Per-(image, prompt) values the objectives consume, derived once from a
/// score matrix and its prompt set.
///
/// VQA rows hold a^j_i (already oriented by the image label).
/// ITR rows hold p_i * b^j_i; the label is applied per image.
class ScoreTable {
public:
    static ScoreTable from(const ScoreMatrix& m, const PromptSet& ps);

    Task task() const { return task_; }
    std::size_t n_images() const { return labels_.size(); }
    std::size_t n_prompts() const { return n_prompts_; }

    std::span<const double> row(std::size_t j) const {
        return {values_.data() + j * n_prompts_, n_prompts_};
    }
    Sign label(std::size_t j) const { return labels_[j]; }
    const std::string& image_id(std::size_t j) const { return image_ids_[j]; }

private:
    Task task_ = Task::Vqa;
    std::size_t n_prompts_ = 0;
    std::vector<double> values_;
    std::vector<Sign> labels_;
    std::vector<std::string> image_ids_;
};

struct ImageScore {
    std::string id;
    double score = 0.0;  // a^j_w (VQA) or b^j_w (ITR)
    bool correct = false;
};

struct ObjectiveReport {
    double total = 0.0;
    int correct_count = 0;
    double soft_term = 0.0;
    std::vector<ImageScore> per_image;
};

/// Sum_i p_i w_i b^j_i for image j of an ITR table (no label, no normalization).
double polarity_sum(std::span<const double> w, const ScoreTable& t, std::size_t j);

/// b^j_w = A^j_D * Sum_i p_i w_i b^j_i / Sum_i w_i.
double weighted_margin(std::span<const double> w, const ScoreTable& t, std::size_t j);

/// Per-image weighted score: a^j_w for VQA, b^j_w for ITR.
double image_score(std::span<const double> w, const ScoreTable& t, std::size_t j);

/// Strict decision thresholds; a score exactly at the threshold is incorrect.
inline constexpr double kVqaThreshold = 0.5;
inline constexpr double kItrThreshold = 0.0;

ObjectiveReport e_vqa(std::span<const double> w, const ScoreTable& t, double alpha);
ObjectiveReport e_itr(std::span<const double> w, const ScoreTable& t, double beta);

/// Dispatches on the table's task.
ObjectiveReport evaluate_objective(std::span<const double> w, const ScoreTable& t, double coeff);

/// E without the per-image breakdown; the GA's fitness path.
double objective_value(std::span<const double> w, const ScoreTable& t, double coeff);

/// correct_count / N_V.
double accuracy(std::span<const double> w, const ScoreTable& t);

/// Formats a rate in [0, 1] as a one-decimal percentage ("98.2").
std::string format_percent(double rate);

}  // namespace promptweight
