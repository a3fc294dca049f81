#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promptweight/augment.hpp"
#include "promptweight/optimizer.hpp"
#include "promptweight/scoring.hpp"
#include "promptweight/types.hpp"

namespace promptweight {

enum class State { Negative = -1, Unknown = 0, Positive = 1 };

std::string to_string(State s);

struct PromptContribution {
    std::string prompt_id;
    double weight = 0.0;
    double contribution = 0.0;  // share of the final score
    bool excluded = false;      // every answer invalid (VQA only)
};

struct Prediction {
    State state = State::Unknown;
    double score = 0.0;  // y_w in [0, 1] for VQA, d in [-1, 1] for ITR
    std::vector<PromptContribution> per_prompt;
};

/// Weight vectors ONE chooses between: one-hot vectors for VQA; for ITR one
/// vector per opposite-polarity pair (explicit pair_ids when any prompt has
/// one, otherwise every cross-polarity pair), ordered by (first, second) index.
std::vector<Genome> one_candidates(const PromptSet& ps);

struct OptFit {
    Recognizer recognizer;
    GARunResult run;
};

/// GA-optimized weights. The initial population is seeded with the all-ones
/// vector, the best ONE candidate and then the remaining ONE candidates.
OptFit fit_opt(const ScoreMatrix& m, const PromptSet& ps, const GAConfig& cfg,
               double coeff = kDefaultCoefficient, const GAOptions& opts = {},
               std::string created = {});

/// The single candidate of one_candidates() with the highest E (first wins ties).
Recognizer fit_one(const ScoreMatrix& m, const PromptSet& ps, double coeff = kDefaultCoefficient);

/// Every prompt weighted 1; needs no data.
Recognizer make_all(const PromptSet& ps, double coeff = kDefaultCoefficient);

/// Decision from stored per-prompt cells (in recognizer prompt order).
Prediction predict_cells(const Recognizer& r, std::span<const Cell> cells);

/// Augments the image, queries the backend and applies predict_cells.
/// `img` may be null when the backend does not need pixels.
Prediction predict(const Recognizer& r, const RgbImage* img, std::string_view image_id,
                   const ScoreBackend& backend, const AugmentConfig& aug);

struct ImageOutcome {
    std::string id;
    Sign label = Sign::Positive;
    State state = State::Unknown;
    double score = 0.0;
    bool correct = false;
};

struct Evaluation {
    double accuracy = 0.0;
    std::vector<ImageOutcome> per_image;
};

/// Offline replay of predict over every image of a matrix.
Evaluation evaluate(const Recognizer& r, const ScoreMatrix& m);

std::string serialize(const Prediction& p);
std::string serialize(const Evaluation& e);

}  // namespace promptweight
