#include <gtest/gtest.h>

#include <random>

#include "promptweight/errors.hpp"
#include "promptweight/model.hpp"
#include "unit/test_util.hpp"

using namespace promptweight;
using promptweight::testing::alternating_prompts;

namespace {

bool has_rule(const std::vector<Violation>& v, const std::string& rule) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.rule == rule; });
}

}  // namespace

TEST(ValidatePromptSet, MinimalSetIsValid) {
    PromptSet ps{Task::Vqa, {{"a", "Is this door open?", Sign::Positive, {}},
                             {"b", "Is this door closed?", Sign::Negative, {}}}};
    EXPECT_TRUE(validate_prompt_set(ps).empty());
}

TEST(ValidatePromptSet, UnbalancedPolarity) {
    PromptSet ps{Task::Vqa, {{"a", "x", Sign::Positive, {}},
                             {"b", "y", Sign::Positive, {}},
                             {"c", "z", Sign::Negative, {}}}};
    const auto v = validate_prompt_set(ps);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].rule, "polarity_balance");
}

TEST(ValidatePromptSet, DoorPromptFilesAreValid) {
    for (const char* f : {"data/prompts/door_vqa.json", "data/prompts/door_itr.json"}) {
        const auto ps = load_prompt_set(promptweight::testing::source(f));
        EXPECT_TRUE(validate_prompt_set(ps).empty()) << f;
        EXPECT_LE(ps.size(), 80u);
    }
}

TEST(ValidatePromptSet, ReportsEachBrokenRule) {
    PromptSet ps{Task::Itr, {{"a", "", Sign::Positive, "p"},
                             {"a", "y", Sign::Negative, {}},
                             {"c", "z", Sign::Positive, "p"},
                             {"d", "w", Sign::Negative, {}}}};
    const auto v = validate_prompt_set(ps);
    EXPECT_TRUE(has_rule(v, "unique_id"));
    EXPECT_TRUE(has_rule(v, "non_empty_text"));
    EXPECT_TRUE(has_rule(v, "pair"));  // both pair members are +1
    EXPECT_TRUE(validate_prompt_set(PromptSet{Task::Vqa, {}}).size() >= 1);
}

TEST(ValidateManifest, BalanceAndOverride) {
    DatasetManifest ds{"d", Split::Opt,
                       {{"1", "a.png", Sign::Positive}, {"2", "b.png", Sign::Positive}}, false};
    EXPECT_TRUE(has_rule(validate_manifest(ds), "label_balance"));
    ds.allow_unbalanced = true;
    EXPECT_TRUE(validate_manifest(ds).empty());
    ds.images.pop_back();
    EXPECT_TRUE(has_rule(validate_manifest(ds), "even_size"));
}

TEST(ValidateMatrix, CellCountsMustSumToNRand) {
    ScoreMatrix m;
    m.task = Task::Vqa;
    m.n_rand = 5;
    m.prompt_ids = {"a"};
    m.images.push_back({"img", Sign::Positive, {VqaCell{3, 1, 0}}});
    EXPECT_TRUE(has_rule(validate_matrix(m), "cell_counts"));
    m.images[0].cells[0] = VqaCell{3, 1, 1};
    EXPECT_TRUE(validate_matrix(m).empty());
    m.images[0].cells[0] = ItrCell{{0.1, 0.1, 0.1, 0.1, 0.1}};
    EXPECT_TRUE(has_rule(validate_matrix(m), "cell_kind"));
}

TEST(ValidateRecognizer, MethodShapes) {
    Recognizer r;
    r.task = Task::Itr;
    r.prompt_set = alternating_prompts(Task::Itr, 4);
    r.method = Method::One;
    r.weights = {1, 0, 1, 0};  // both +1
    EXPECT_TRUE(has_rule(validate_recognizer(r), "one_support"));
    r.weights = {1, 1, 0, 0};
    EXPECT_TRUE(validate_recognizer(r).empty());
    r.method = Method::All;
    EXPECT_TRUE(has_rule(validate_recognizer(r), "all_equal"));
    r.weights = {0, 0, 0, 0};
    r.method = Method::Opt;
    EXPECT_TRUE(has_rule(validate_recognizer(r), "positive_sum"));
}

TEST(Serialization, WeightAboveOneIsRejected) {
    Recognizer r;
    r.task = Task::Vqa;
    r.method = Method::Opt;
    r.prompt_set = alternating_prompts(Task::Vqa, 2);
    r.weights = {0.5, 0.5};
    std::string text = serialize(r);
    const auto pos = text.find("0.5");
    text.replace(pos, 3, "1.2");
    try {
        parse_recognizer(text);
        FAIL() << "expected InvariantError";
    } catch (const InvariantError& e) {
        EXPECT_NE(std::string(e.what()).find("w_0 = 1.2"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("0 <= w_i <= 1"), std::string::npos);
    }
}

TEST(Serialization, UnknownVersion) {
    EXPECT_THROW(parse_prompt_set(R"({"version":"99","task":"vqa","prompts":[]})"), VersionError);
    EXPECT_THROW(parse_matrix(R"({"version":"99"})"), VersionError);
}

TEST(Serialization, MalformedInput) {
    EXPECT_THROW(parse_prompt_set("{not json"), ParseError);
    EXPECT_THROW(parse_prompt_set(R"({"version":"1","task":"vqa"})"), ParseError);
    EXPECT_THROW(parse_prompt_set(R"({"version":"1","task":"sound","prompts":[]})"), ParseError);
    EXPECT_THROW(parse_manifest(R"({"version":"1","name":"x","split":"opt","images":[{"id":"a","path":"p","label":0}]})"),
                 InvariantError);
}

TEST(Serialization, GaConfigDefaultsFromEmptyObject) {
    const GAConfig cfg = parse_ga_config("{}");
    EXPECT_EQ(cfg.population, 300);
    EXPECT_EQ(cfg.generations, 1000);
    EXPECT_EQ(cfg.tournament_size, 5);
    EXPECT_DOUBLE_EQ(cfg.mutation_sigma * cfg.mutation_sigma, 0.1);
    EXPECT_THROW(parse_ga_config(R"({"population":3})"), InvariantError);
}

// Round-trip identity over randomly generated values, including reals that
// need all 17 significant digits.
TEST(Serialization, RoundTripIsIdentity) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 * (1 + trial % 5);
        const Task task = trial % 2 ? Task::Itr : Task::Vqa;
        PromptSet ps = alternating_prompts(task, n);
        if (trial % 3 == 0) {
            for (std::size_t i = 0; i < n; ++i) ps.prompts[i].pair_id = "pair" + std::to_string(i / 2);
        }
        EXPECT_EQ(parse_prompt_set(serialize(ps)), ps);

        const ScoreMatrix m = promptweight::testing::random_matrix(ps, 4, 1 + trial % 6, rng);
        EXPECT_EQ(parse_matrix(serialize(m)), m);

        Recognizer r;
        r.task = task;
        r.method = Method::Opt;
        r.coefficient = u(rng);
        r.prompt_set = ps;
        for (std::size_t i = 0; i < n; ++i) r.weights.push_back(u(rng));
        GAConfig cfg;
        cfg.rng_seed = rng();
        cfg.mutation_sigma = u(rng) + 1e-3;
        r.provenance = {cfg, content_hash(m), trial % 2 ? "2024-08-01T00:00:00Z" : ""};
        EXPECT_EQ(parse_recognizer(serialize(r)), r);

        DatasetManifest ds{"set" + std::to_string(trial), trial % 2 ? Split::Eval : Split::Opt,
                           {{"a", "a.png", Sign::Positive}, {"b", "b.ppm", Sign::Negative}}, false};
        EXPECT_EQ(parse_manifest(serialize(ds)), ds);
    }
}

TEST(Serialization, FileRoundTripAndHash) {
    const auto dir = promptweight::testing::scratch_dir("model_test");
    std::mt19937_64 rng(1);
    const auto ps = alternating_prompts(Task::Itr, 4);
    const auto m = promptweight::testing::random_matrix(ps, 6, 3, rng);
    save(dir / "m.json", m);
    save(dir / "p.json", ps);
    EXPECT_EQ(load_matrix(dir / "m.json"), m);
    EXPECT_EQ(load_prompt_set(dir / "p.json"), ps);
    EXPECT_EQ(content_hash(m), content_hash(load_matrix(dir / "m.json")));
    EXPECT_EQ(content_hash(m).size(), 64u);
    EXPECT_THROW(load_matrix(dir / "missing.json"), ParseError);
}

TEST(RequireConsistent, DetectsMismatch) {
    std::mt19937_64 rng(3);
    const auto ps = alternating_prompts(Task::Vqa, 4);
    auto m = promptweight::testing::random_matrix(ps, 2, 5, rng);
    EXPECT_NO_THROW(require_consistent(m, ps));
    m.prompt_ids[1] = "other";
    EXPECT_THROW(require_consistent(m, ps), MismatchError);
    EXPECT_THROW(require_consistent(m, alternating_prompts(Task::Itr, 4)), MismatchError);
}
