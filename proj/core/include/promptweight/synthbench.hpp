#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "promptweight/model.hpp"
#include "promptweight/optimizer.hpp"
#include "promptweight/types.hpp"

namespace promptweight {

/// Generative quality of one synthetic prompt.
struct PromptProfile {
    /// Probability that a single variant's vote (VQA) or similarity shift
    /// (ITR) favors the image's true state.
    double reliability = 1.0;
    /// Additive similarity offset, ITR only.
    double bias = 0.0;
    /// Probability that a VQA answer is unusable.
    double invalid_rate = 0.0;

    bool operator==(const PromptProfile&) const = default;
};

struct SynthSpec {
    std::string name = "synthetic";
    Task task = Task::Vqa;
    int n_images = 20;
    int n_rand = 5;
    std::uint64_t rng_seed = 0;
    std::vector<PromptProfile> prompts;

    bool operator==(const SynthSpec&) const = default;
};

// ITR similarity model: base + bias +/- signal + N(0, noise^2), clamped to [-1, 1].
inline constexpr double kSynthBaseSimilarity = 0.25;
inline constexpr double kSynthSignal = 0.02;
inline constexpr double kSynthNoise = 0.005;

std::vector<Violation> validate_synth_spec(const SynthSpec& spec);

/// Accepts either an explicit "prompts" list or "groups" of
/// {count, reliability, bias, invalid_rate} expanded in order.
SynthSpec parse_synth_spec(std::string_view text);
SynthSpec load_synth_spec(const std::filesystem::path& path);
std::string serialize(const SynthSpec& spec);

struct SynthOutput {
    ScoreMatrix matrix;
    PromptSet prompts;
};

/// Balanced labels (even-indexed images are +1), alternating prompt
/// polarities starting at +1, deterministic under spec.rng_seed.
SynthOutput generate(const SynthSpec& spec);

/// The same spec re-seeded for a held-out split.
SynthSpec held_out(const SynthSpec& spec);

struct MethodScores {
    double opt = 0.0;
    double one = 0.0;
    double all = 0.0;
};

struct StateResult {
    std::string name;
    MethodScores d_opt;
    MethodScores d_eval;
};

/// Fits OPT and ONE on the optimization matrix, builds ALL, and evaluates
/// all three on both splits.
StateResult run_comparison(std::string name, const ScoreMatrix& opt_matrix,
                           const ScoreMatrix& eval_matrix, const PromptSet& ps,
                           const GAConfig& cfg, double coeff = kDefaultCoefficient,
                           const GAOptions& opts = {});

struct ComparisonTable {
    std::vector<StateResult> states;

    MethodScores average(bool eval_split) const;
    /// Population standard deviation across states.
    MethodScores stddev(bool eval_split) const;
};

/// Aligned plain-text table with per-state rows, then Average and Standard
/// Deviation rows; values are percentages with one decimal.
std::string render_text(const ComparisonTable& table);
std::string render_csv(const ComparisonTable& table);

}  // namespace promptweight
