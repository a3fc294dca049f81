#include <gtest/gtest.h>

#include <random>

#include "promptweight/errors.hpp"
#include "promptweight/model.hpp"
#include "promptweight/objective.hpp"
#include "promptweight/recognizer.hpp"
#include "unit/test_util.hpp"

using namespace promptweight;
using promptweight::testing::alternating_prompts;
using promptweight::testing::random_matrix;
using promptweight::testing::random_weights;

namespace {

/// VQA matrix from per-(image, prompt) vote counts for the image's true state.
ScoreMatrix vqa_from_correct(const PromptSet& ps, const std::vector<std::vector<int>>& correct,
                             int n_rand) {
    ScoreMatrix m;
    m.task = Task::Vqa;
    m.n_rand = n_rand;
    for (const auto& p : ps.prompts) m.prompt_ids.push_back(p.id);
    for (std::size_t j = 0; j < correct.size(); ++j) {
        const Sign label = j % 2 == 0 ? Sign::Positive : Sign::Negative;
        ImageRecord rec{"img" + std::to_string(j), label, {}};
        for (int c : correct[j]) {
            const int wrong = n_rand - c;
            rec.cells.emplace_back(label == Sign::Positive ? VqaCell{c, wrong, 0} : VqaCell{wrong, c, 0});
        }
        m.images.push_back(std::move(rec));
    }
    return m;
}

/// Prompts 0..2 are each wrong on a third of the images but right as a
/// majority; prompts 3..9 lean the wrong way everywhere.
ScoreMatrix reliable_and_adversarial(const PromptSet& ps) {
    std::vector<std::vector<int>> correct(20, std::vector<int>(10));
    for (int j = 0; j < 20; ++j) {
        for (int i = 0; i < 3; ++i) correct[j][i] = j % 3 == i ? 1 : 5;
        for (int i = 3; i < 10; ++i) correct[j][i] = (i + j) % 3;
    }
    return vqa_from_correct(ps, correct, 5);
}

GAConfig quick_ga(std::uint64_t seed = 1) {
    GAConfig cfg;
    cfg.population = 100;
    cfg.generations = 100;
    cfg.rng_seed = seed;
    return cfg;
}

FitnessFn objective_fn(const ScoreTable& t) {
    return [&t](std::span<const double> w) { return objective_value(w, t, kDefaultCoefficient); };
}

Recognizer with_weights(const PromptSet& ps, std::vector<double> w) {
    Recognizer r;
    r.task = ps.task;
    r.method = Method::Opt;
    r.prompt_set = ps;
    r.weights = std::move(w);
    return r;
}

}  // namespace

TEST(FitOpt, ReachesFullAccuracyWhenAttainable) {
    const auto ps = alternating_prompts(Task::Vqa, 10);
    const auto m = reliable_and_adversarial(ps);
    const auto t = ScoreTable::from(m, ps);

    const auto oracle = brute_force_binary(objective_fn(t), 10);
    ASSERT_EQ(e_vqa(oracle.weights, t, kDefaultCoefficient).correct_count, 20);
    EXPECT_EQ(evaluate(make_all(ps), m).accuracy, 0.0);

    const auto fit = fit_opt(m, ps, quick_ga());
    EXPECT_EQ(evaluate(fit.recognizer, m).accuracy, 1.0);
    EXPECT_EQ(fit.recognizer.method, Method::Opt);
    EXPECT_EQ(fit.recognizer.provenance.dataset_hash, content_hash(m));
    ASSERT_TRUE(fit.recognizer.provenance.ga.has_value());
    EXPECT_EQ(fit.recognizer.provenance.ga->population, 100);
    EXPECT_TRUE(validate_recognizer(fit.recognizer).empty());
}

TEST(FitOpt, NeverWorseThanBaselines) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 12; ++trial) {
        const Task task = trial % 2 ? Task::Itr : Task::Vqa;
        const auto ps = alternating_prompts(task, 6);
        const auto m = random_matrix(ps, 10, 3, rng);
        const auto t = ScoreTable::from(m, ps);
        GAConfig cfg = quick_ga(trial);
        cfg.generations = 10;
        const auto opt = fit_opt(m, ps, cfg).recognizer;
        const double e_opt = objective_value(opt.weights, t, kDefaultCoefficient);
        EXPECT_GE(e_opt, objective_value(make_all(ps).weights, t, kDefaultCoefficient));
        EXPECT_GE(e_opt, objective_value(fit_one(m, ps).weights, t, kDefaultCoefficient));
    }
}

TEST(FitOne, PicksTheUniqueBestPrompt) {
    const auto ps = alternating_prompts(Task::Vqa, 8);
    std::vector<std::vector<int>> correct(10, std::vector<int>(8));
    for (int j = 0; j < 10; ++j)
        for (int i = 0; i < 8; ++i) correct[j][i] = i == 4 ? 5 : (j + i) % 2 ? 4 : 2;
    const auto m = vqa_from_correct(ps, correct, 5);
    const auto t = ScoreTable::from(m, ps);

    // Exhaustive re-scan of the one-hot candidates.
    std::size_t argmax = 0;
    double best = -1;
    for (std::size_t i = 0; i < 8; ++i) {
        std::vector<double> w(8, 0.0);
        w[i] = 1.0;
        const double e = objective_value(w, t, kDefaultCoefficient);
        if (e > best) best = e, argmax = i;
    }
    ASSERT_EQ(argmax, 4u);

    const auto one = fit_one(m, ps);
    std::vector<double> want(8, 0.0);
    want[4] = 1.0;
    EXPECT_EQ(one.weights, want);
    EXPECT_EQ(one.method, Method::One);
    EXPECT_EQ(objective_value(one.weights, t, kDefaultCoefficient), best);
}

TEST(FitOne, SingleItrPair) {
    const PromptSet ps{Task::Itr, {{"open", "open door", Sign::Positive, {}},
                                   {"closed", "closed door", Sign::Negative, {}}}};
    std::mt19937_64 rng(4);
    const auto one = fit_one(random_matrix(ps, 4, 2, rng), ps);
    EXPECT_EQ(one.weights, (std::vector<double>{1.0, 1.0}));
    EXPECT_TRUE(validate_recognizer(one).empty());
}

TEST(FitOne, TiesGoToLowerIndex) {
    const auto ps = alternating_prompts(Task::Vqa, 4);
    std::vector<std::vector<int>> correct(6, {4, 1, 4, 1});
    const auto one = fit_one(vqa_from_correct(ps, correct, 5), ps);
    EXPECT_EQ(one.weights, (std::vector<double>{1, 0, 0, 0}));
}

TEST(OneCandidates, ItrPairing) {
    auto ps = alternating_prompts(Task::Itr, 4);
    // No pair ids: every cross-polarity pair, ordered.
    const auto all_pairs = one_candidates(ps);
    ASSERT_EQ(all_pairs.size(), 4u);
    EXPECT_EQ(all_pairs[0], (Genome{1, 1, 0, 0}));
    EXPECT_EQ(all_pairs[1], (Genome{1, 0, 0, 1}));
    EXPECT_EQ(all_pairs[2], (Genome{0, 1, 1, 0}));
    EXPECT_EQ(all_pairs[3], (Genome{0, 0, 1, 1}));

    ps.prompts[0].pair_id = "a";
    ps.prompts[3].pair_id = "a";
    ps.prompts[1].pair_id = "b";
    ps.prompts[2].pair_id = "b";
    const auto explicit_pairs = one_candidates(ps);
    ASSERT_EQ(explicit_pairs.size(), 2u);
    EXPECT_EQ(explicit_pairs[0], (Genome{1, 0, 0, 1}));
    EXPECT_EQ(explicit_pairs[1], (Genome{0, 1, 1, 0}));
}

TEST(MakeAll, EightyPrompts) {
    const auto ps = alternating_prompts(Task::Itr, 80);
    const auto all = make_all(ps);
    EXPECT_EQ(all.weights, std::vector<double>(80, 1.0));
    EXPECT_EQ(all.method, Method::All);
    EXPECT_TRUE(validate_recognizer(all).empty());
    EXPECT_THROW(make_all(alternating_prompts(Task::Vqa, 3)), InvariantError);
}

TEST(PredictCells, VqaVoteAverage) {
    const auto r = with_weights(alternating_prompts(Task::Vqa, 2), {1.0, 1.0});
    const std::vector<Cell> cells{VqaCell{5, 0, 0}, VqaCell{4, 1, 0}};
    const auto p = predict_cells(r, cells);
    EXPECT_DOUBLE_EQ(p.score, 0.9);
    EXPECT_EQ(p.state, State::Positive);
    EXPECT_DOUBLE_EQ(p.per_prompt[0].contribution + p.per_prompt[1].contribution, 0.9);
}

TEST(PredictCells, ItrPairMargin) {
    const auto r = with_weights(alternating_prompts(Task::Itr, 2), {1.0, 1.0});
    const std::vector<Cell> cells{ItrCell{{0.30}}, ItrCell{{0.24}}};
    const auto p = predict_cells(r, cells);
    EXPECT_NEAR(p.score, 0.03, 1e-15);
    EXPECT_EQ(p.state, State::Positive);
}

TEST(PredictCells, ExclusionAndUnknown) {
    const auto r = with_weights(alternating_prompts(Task::Vqa, 2), {1.0, 0.5});
    const std::vector<Cell> none{VqaCell{0, 0, 5}, VqaCell{0, 0, 5}};
    EXPECT_EQ(predict_cells(r, none).state, State::Unknown);

    // The invalid prompt is dropped and the weights renormalized.
    const std::vector<Cell> partial{VqaCell{0, 0, 5}, VqaCell{1, 4, 0}};
    const auto p = predict_cells(r, partial);
    EXPECT_TRUE(p.per_prompt[0].excluded);
    EXPECT_DOUBLE_EQ(p.score, 0.2);
    EXPECT_EQ(p.state, State::Negative);

    const std::vector<Cell> tie{VqaCell{3, 2, 0}, VqaCell{1, 1, 3}};
    const auto even = with_weights(alternating_prompts(Task::Vqa, 2), {0.0, 1.0});
    EXPECT_EQ(predict_cells(even, tie).state, State::Unknown);

    const auto itr = with_weights(alternating_prompts(Task::Itr, 2), {1.0, 1.0});
    const std::vector<Cell> same{ItrCell{{0.25}}, ItrCell{{0.25}}};
    EXPECT_EQ(predict_cells(itr, same).state, State::Unknown);

    const std::vector<Cell> wrong_kind{ItrCell{{0.1}}, ItrCell{{0.1}}};
    EXPECT_THROW(predict_cells(r, wrong_kind), MismatchError);
}

TEST(Predict, ThroughCachedBackend) {
    std::mt19937_64 rng(7);
    for (Task task : {Task::Vqa, Task::Itr}) {
        const auto ps = alternating_prompts(task, 6);
        const auto m = random_matrix(ps, 6, 5, rng);
        const CachedBackend backend(m);
        const auto r = with_weights(ps, random_weights(6, rng));
        for (const auto& img : m.images) {
            const auto direct = predict_cells(r, img.cells);
            const auto replay = predict(r, nullptr, img.id, backend, {5, 0.1, 0});
            EXPECT_EQ(replay.state, direct.state);
            EXPECT_EQ(replay.score, direct.score);
        }
        EXPECT_THROW(predict(r, nullptr, "missing", backend, {5, 0.1, 0}), UnknownKeyError);
    }
}

TEST(Evaluate, MatchesObjectiveAccuracy) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const Task task = trial % 2 ? Task::Itr : Task::Vqa;
        const auto ps = alternating_prompts(task, 6);
        const auto m = random_matrix(ps, 14, 4, rng, false);
        const auto t = ScoreTable::from(m, ps);
        const auto w = random_weights(6, rng);
        const auto ev = evaluate(with_weights(ps, w), m);
        ASSERT_EQ(ev.per_image.size(), 14u);
        EXPECT_EQ(ev.accuracy, accuracy(w, t));
        EXPECT_EQ(evaluate(make_all(ps), m).accuracy, accuracy(std::vector<double>(6, 1.0), t));

        // Per image: state equals the label iff the objective counts it correct.
        const auto report = evaluate_objective(w, t, 0.01);
        for (std::size_t j = 0; j < 14; ++j)
            EXPECT_EQ(ev.per_image[j].correct, report.per_image[j].correct) << trial << " " << j;
    }
}

TEST(Evaluate, MismatchedMatrix) {
    std::mt19937_64 rng(9);
    const auto ps = alternating_prompts(Task::Vqa, 4);
    const auto m = random_matrix(alternating_prompts(Task::Vqa, 6), 2, 2, rng);
    EXPECT_THROW(evaluate(make_all(ps), m), MismatchError);
}

TEST(Predict, StatesAreScaleInvariant) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> scale(0.05, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Task task = trial % 2 ? Task::Itr : Task::Vqa;
        const auto ps = alternating_prompts(task, 4);
        const auto m = random_matrix(ps, 8, 5, rng);
        auto w = random_weights(4, rng);
        const auto a = evaluate(with_weights(ps, w), m);
        const double c = scale(rng);
        for (auto& x : w) x *= c;
        const auto b = evaluate(with_weights(ps, w), m);
        for (std::size_t j = 0; j < a.per_image.size(); ++j)
            EXPECT_EQ(a.per_image[j].state, b.per_image[j].state);
    }
}

TEST(Recognizer, SaveLoadRoundTrip) {
    const auto dir = promptweight::testing::scratch_dir("recognizer_test");
    std::mt19937_64 rng(11);
    const auto ps = alternating_prompts(Task::Itr, 6);
    const auto m = random_matrix(ps, 10, 3, rng);
    GAConfig cfg = quick_ga();
    cfg.generations = 5;
    const auto r = fit_opt(m, ps, cfg, 0.01, {}, "2024-01-01T00:00:00Z").recognizer;
    save(dir / "r.json", r);
    const auto back = load_recognizer(dir / "r.json");
    EXPECT_EQ(back, r);
    EXPECT_EQ(serialize(evaluate(back, m)), serialize(evaluate(r, m)));
}

TEST(Serialize, PredictionJson) {
    Prediction p;
    p.state = State::Unknown;
    p.score = 0.5;
    EXPECT_EQ(serialize(p), "{\"state\":\"unknown\",\"score\":0.5}\n");
    p.state = State::Negative;
    p.score = -0.25;
    EXPECT_EQ(serialize(p), "{\"state\":-1,\"score\":-0.25}\n");
}
