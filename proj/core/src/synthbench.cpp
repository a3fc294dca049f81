#include "promptweight/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "promptweight/errors.hpp"
#include "promptweight/numeric.hpp"
#include "promptweight/objective.hpp"
#include "promptweight/recognizer.hpp"
#include "promptweight/rng.hpp"

namespace promptweight {

using json = nlohmann::ordered_json;

std::vector<Violation> validate_synth_spec(const SynthSpec& s) {
    std::vector<Violation> out;
    if (s.n_images < 2 || s.n_images % 2 != 0)
        out.push_back({"n_images", "even_size", "n_images must be even and >= 2"});
    if (s.n_rand < 1) out.push_back({"n_rand", "positive", "n_rand must be >= 1"});
    if (s.prompts.size() < 2 || s.prompts.size() % 2 != 0)
        out.push_back({"prompts", "even_size", "prompt count must be even and >= 2"});
    for (std::size_t i = 0; i < s.prompts.size(); ++i) {
        const auto& p = s.prompts[i];
        const std::string subject = "prompts[" + std::to_string(i) + "]";
        if (!(p.reliability >= 0.0 && p.reliability <= 1.0))
            out.push_back({subject, "reliability", "reliability must lie in [0, 1]"});
        if (!(p.invalid_rate >= 0.0 && p.invalid_rate <= 1.0))
            out.push_back({subject, "invalid_rate", "invalid_rate must lie in [0, 1]"});
        if (!std::isfinite(p.bias)) out.push_back({subject, "bias", "bias must be finite"});
    }
    return out;
}

namespace {

PromptProfile profile_from(const json& j) {
    PromptProfile p;
    p.reliability = j.at("reliability").get<double>();
    p.bias = j.value("bias", 0.0);
    p.invalid_rate = j.value("invalid_rate", 0.0);
    return p;
}

}  // namespace

SynthSpec parse_synth_spec(std::string_view text) {
    SynthSpec s;
    try {
        const json j = json::parse(text.begin(), text.end());
        if (j.value("version", std::string(kFormatVersion)) != kFormatVersion)
            throw VersionError("unsupported synth spec version");
        s.name = j.value("name", s.name);
        s.task = parse_task(j.at("task").get<std::string>());
        s.n_images = j.value("n_images", s.n_images);
        s.n_rand = j.value("n_rand", s.n_rand);
        s.rng_seed = j.value("rng_seed", s.rng_seed);
        if (j.contains("prompts"))
            for (const auto& p : j.at("prompts")) s.prompts.push_back(profile_from(p));
        if (j.contains("groups")) {
            for (const auto& g : j.at("groups")) {
                const int count = g.at("count").get<int>();
                const PromptProfile p = profile_from(g);
                for (int c = 0; c < count; ++c) s.prompts.push_back(p);
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("synth spec: ") + e.what());
    }
    require_valid(validate_synth_spec(s), "synth spec");
    return s;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
    return parse_synth_spec(read_file(path));
}

std::string serialize(const SynthSpec& s) {
    json o;
    o["version"] = kFormatVersion;
    o["name"] = s.name;
    o["task"] = to_string(s.task);
    o["n_images"] = s.n_images;
    o["n_rand"] = s.n_rand;
    o["rng_seed"] = s.rng_seed;
    auto& arr = o["prompts"] = json::array();
    for (const auto& p : s.prompts)
        arr.push_back({{"reliability", p.reliability}, {"bias", p.bias}, {"invalid_rate", p.invalid_rate}});
    return o.dump(2) + "\n";
}

SynthOutput generate(const SynthSpec& spec) {
    require_valid(validate_synth_spec(spec), "synth spec");
    Rng rng(spec.rng_seed);
    SynthOutput out;

    out.prompts.task = spec.task;
    for (std::size_t i = 0; i < spec.prompts.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "q%02zu", i);
        const Sign polarity = i % 2 == 0 ? Sign::Positive : Sign::Negative;
        out.prompts.prompts.push_back(
            {id, "synthetic prompt " + std::to_string(i) + (polarity == Sign::Positive ? " (+)" : " (-)"),
             polarity, std::nullopt});
    }

    auto& m = out.matrix;
    m.task = spec.task;
    m.n_rand = spec.n_rand;
    for (const auto& p : out.prompts.prompts) m.prompt_ids.push_back(p.id);
    m.provenance = {"synthetic", spec.rng_seed};

    for (int j = 0; j < spec.n_images; ++j) {
        char id[32];
        std::snprintf(id, sizeof id, "img%03d", j);
        const Sign label = j % 2 == 0 ? Sign::Positive : Sign::Negative;
        ImageRecord rec{id, label, {}};
        for (std::size_t i = 0; i < spec.prompts.size(); ++i) {
            const auto& prof = spec.prompts[i];
            if (spec.task == Task::Vqa) {
                VqaCell cell;
                for (int k = 0; k < spec.n_rand; ++k) {
                    if (rng.bernoulli(prof.invalid_rate)) {
                        ++cell.invalid;
                        continue;
                    }
                    const bool favors_truth = rng.bernoulli(prof.reliability);
                    const bool votes_positive = favors_truth == (label == Sign::Positive);
                    ++(votes_positive ? cell.yes : cell.no);
                }
                rec.cells.emplace_back(cell);
            } else {
                const double aligned = to_int(label) * to_int(out.prompts.prompts[i].polarity);
                ItrCell cell;
                for (int k = 0; k < spec.n_rand; ++k) {
                    const double direction = rng.bernoulli(prof.reliability) ? 1.0 : -1.0;
                    const double s = kSynthBaseSimilarity + prof.bias +
                                     direction * aligned * kSynthSignal + rng.normal(0.0, kSynthNoise);
                    cell.sims.push_back(std::clamp(s, -1.0, 1.0));
                }
                rec.cells.emplace_back(std::move(cell));
            }
        }
        m.images.push_back(std::move(rec));
    }
    return out;
}

SynthSpec held_out(const SynthSpec& spec) {
    SynthSpec s = spec;
    s.rng_seed = mix_seed(spec.rng_seed, 1);
    return s;
}

StateResult run_comparison(std::string name, const ScoreMatrix& opt_matrix,
                           const ScoreMatrix& eval_matrix, const PromptSet& ps,
                           const GAConfig& cfg, double coeff, const GAOptions& opts) {
    require_consistent(opt_matrix, ps);
    require_consistent(eval_matrix, ps);
    const Recognizer opt = fit_opt(opt_matrix, ps, cfg, coeff, opts).recognizer;
    const Recognizer one = fit_one(opt_matrix, ps, coeff);
    const Recognizer all = make_all(ps, coeff);

    StateResult r;
    r.name = std::move(name);
    for (auto [matrix, scores] : {std::pair{&opt_matrix, &r.d_opt}, std::pair{&eval_matrix, &r.d_eval}}) {
        scores->opt = evaluate(opt, *matrix).accuracy;
        scores->one = evaluate(one, *matrix).accuracy;
        scores->all = evaluate(all, *matrix).accuracy;
    }
    return r;
}

namespace {

template <typename Get>
double mean_over(const std::vector<StateResult>& states, Get get) {
    CompensatedSum s;
    for (const auto& st : states) s.add(get(st));
    return states.empty() ? 0.0 : s.value() / static_cast<double>(states.size());
}

template <typename Get>
double pstd_over(const std::vector<StateResult>& states, Get get) {
    if (states.empty()) return 0.0;
    const double mu = mean_over(states, get);
    CompensatedSum s;
    for (const auto& st : states) {
        const double d = get(st) - mu;
        s.add(d * d);
    }
    return std::sqrt(s.value() / static_cast<double>(states.size()));
}

const MethodScores& split_of(const StateResult& s, bool eval_split) {
    return eval_split ? s.d_eval : s.d_opt;
}

std::string pct(double rate) { return format_percent(rate); }

}  // namespace

MethodScores ComparisonTable::average(bool eval_split) const {
    return {mean_over(states, [&](const StateResult& s) { return split_of(s, eval_split).opt; }),
            mean_over(states, [&](const StateResult& s) { return split_of(s, eval_split).one; }),
            mean_over(states, [&](const StateResult& s) { return split_of(s, eval_split).all; })};
}

MethodScores ComparisonTable::stddev(bool eval_split) const {
    return {pstd_over(states, [&](const StateResult& s) { return split_of(s, eval_split).opt; }),
            pstd_over(states, [&](const StateResult& s) { return split_of(s, eval_split).one; }),
            pstd_over(states, [&](const StateResult& s) { return split_of(s, eval_split).all; })};
}

std::string render_text(const ComparisonTable& t) {
    std::size_t width = std::string("Standard Deviation").size();
    for (const auto& s : t.states) width = std::max(width, s.name.size());

    std::ostringstream os;
    char line[256];
    auto row = [&](const std::string& label, const char* split, const MethodScores& m) {
        std::snprintf(line, sizeof line, "%-*s  %-6s  %6s  %6s  %6s\n", static_cast<int>(width),
                      label.c_str(), split, pct(m.opt).c_str(), pct(m.one).c_str(), pct(m.all).c_str());
        os << line;
    };
    std::snprintf(line, sizeof line, "%-*s  %-6s  %6s  %6s  %6s\n", static_cast<int>(width), "State",
                  "Split", "OPT", "ONE", "ALL");
    os << line << std::string(width + 32, '-') << "\n";
    for (const auto& s : t.states) {
        row(s.name, "D_opt", s.d_opt);
        row("", "D_eval", s.d_eval);
    }
    os << std::string(width + 32, '-') << "\n";
    row("Average", "D_opt", t.average(false));
    row("", "D_eval", t.average(true));
    row("Standard Deviation", "D_opt", t.stddev(false));
    row("", "D_eval", t.stddev(true));
    return os.str();
}

std::string render_csv(const ComparisonTable& t) {
    std::ostringstream os;
    os << "state,split,opt,one,all\n";
    auto row = [&](const std::string& label, const char* split, const MethodScores& m) {
        os << label << "," << split << "," << pct(m.opt) << "," << pct(m.one) << "," << pct(m.all) << "\n";
    };
    for (const auto& s : t.states) {
        row(s.name, "D_opt", s.d_opt);
        row(s.name, "D_eval", s.d_eval);
    }
    row("Average", "D_opt", t.average(false));
    row("Average", "D_eval", t.average(true));
    row("Standard Deviation", "D_opt", t.stddev(false));
    row("Standard Deviation", "D_eval", t.stddev(true));
    return os.str();
}

}  // namespace promptweight
