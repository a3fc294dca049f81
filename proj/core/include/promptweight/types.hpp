#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace promptweight {

enum class Task { Vqa, Itr };

/// Binary state value. Used both for prompt polarity (p_i) and image labels.
enum class Sign : int { Negative = -1, Positive = 1 };

inline int to_int(Sign s) { return static_cast<int>(s); }
inline Sign negate(Sign s) { return s == Sign::Positive ? Sign::Negative : Sign::Positive; }

enum class Method { Opt, One, All };

std::string to_string(Task t);
std::string to_string(Method m);
Task parse_task(const std::string& s);
Method parse_method(const std::string& s);

struct Prompt {
    std::string id;
    std::string text;
    Sign polarity = Sign::Positive;
    std::optional<std::string> pair_id;

    bool operator==(const Prompt&) const = default;
};

struct PromptSet {
    Task task = Task::Vqa;
    std::vector<Prompt> prompts;

    std::size_t size() const { return prompts.size(); }
    bool operator==(const PromptSet&) const = default;
};

struct LabeledImage {
    std::string id;
    std::string path;
    Sign label = Sign::Positive;

    bool operator==(const LabeledImage&) const = default;
};

enum class Split { Opt, Eval };

struct DatasetManifest {
    std::string name;
    Split split = Split::Opt;
    std::vector<LabeledImage> images;
    bool allow_unbalanced = false;

    bool operator==(const DatasetManifest&) const = default;
};

/// Answer counts for one (image, prompt) pair, oriented by state: `yes` counts
/// answers that vote for state +1, `no` counts votes for state -1.
struct VqaCell {
    int yes = 0;
    int no = 0;
    int invalid = 0;

    int total() const { return yes + no + invalid; }
    bool operator==(const VqaCell&) const = default;
};

/// Raw cosine similarities of one prompt against the augmented variants of an image.
struct ItrCell {
    std::vector<double> sims;

    double mean() const;
    bool operator==(const ItrCell&) const = default;
};

using Cell = std::variant<VqaCell, ItrCell>;

struct ImageRecord {
    std::string id;
    Sign label = Sign::Positive;
    std::vector<Cell> cells;  // one per prompt, in ScoreMatrix::prompt_ids order

    bool operator==(const ImageRecord&) const = default;
};

struct MatrixProvenance {
    std::string backend;
    std::uint64_t seed = 0;

    bool operator==(const MatrixProvenance&) const = default;
};

struct ScoreMatrix {
    Task task = Task::Vqa;
    int n_rand = 1;
    std::vector<std::string> prompt_ids;
    std::vector<ImageRecord> images;
    MatrixProvenance provenance;

    std::size_t n_prompts() const { return prompt_ids.size(); }
    std::size_t n_images() const { return images.size(); }
    bool operator==(const ScoreMatrix&) const = default;
};

struct GAConfig {
    int population = 300;
    int generations = 1000;
    double crossover_prob = 0.5;
    double mutation_prob = 0.2;
    // Variance 0.1.
    double mutation_sigma = std::sqrt(0.1);
    double mutation_gene_prob = 0.1;
    double blend_alpha = 0.5;
    int tournament_size = 5;
    std::uint64_t rng_seed = 0;
    bool seed_population = true;

    bool operator==(const GAConfig&) const = default;
};

struct RecognizerProvenance {
    std::optional<GAConfig> ga;
    std::string dataset_hash;
    std::string created;  // empty when not recorded

    bool operator==(const RecognizerProvenance&) const = default;
};

inline constexpr double kDefaultCoefficient = 0.01;

struct Recognizer {
    Task task = Task::Vqa;
    Method method = Method::All;
    double coefficient = kDefaultCoefficient;
    PromptSet prompt_set;
    std::vector<double> weights;
    RecognizerProvenance provenance;

    bool operator==(const Recognizer&) const = default;
};

}  // namespace promptweight
