#include "promptweight/recognizer.hpp"

#include <algorithm>
#include <map>

#include "json.hpp"
#include "promptweight/errors.hpp"
#include "promptweight/model.hpp"
#include "promptweight/numeric.hpp"
#include "promptweight/objective.hpp"

namespace promptweight {

std::string to_string(State s) {
    switch (s) {
        case State::Positive: return "+1";
        case State::Negative: return "-1";
        case State::Unknown: return "unknown";
    }
    return "?";
}

std::vector<Genome> one_candidates(const PromptSet& ps) {
    const std::size_t n = ps.size();
    std::vector<Genome> out;
    if (ps.task == Task::Vqa) {
        for (std::size_t i = 0; i < n; ++i) {
            Genome w(n, 0.0);
            w[i] = 1.0;
            out.push_back(std::move(w));
        }
        return out;
    }

    auto pair_vector = [n](std::size_t a, std::size_t b) {
        Genome w(n, 0.0);
        w[a] = w[b] = 1.0;
        return w;
    };
    const bool explicit_pairs =
        std::any_of(ps.prompts.begin(), ps.prompts.end(), [](const Prompt& p) { return p.pair_id.has_value(); });
    if (explicit_pairs) {
        std::map<std::string, std::size_t> first;
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& pid = ps.prompts[i].pair_id;
            if (!pid) continue;
            auto [it, inserted] = first.emplace(*pid, i);
            if (!inserted && ps.prompts[it->second].polarity != ps.prompts[i].polarity)
                pairs.emplace_back(it->second, i);
        }
        std::sort(pairs.begin(), pairs.end());
        for (auto [a, b] : pairs) out.push_back(pair_vector(a, b));
    } else {
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (ps.prompts[a].polarity != ps.prompts[b].polarity) out.push_back(pair_vector(a, b));
    }
    if (out.empty()) throw InvariantError("ITR prompt set has no opposite-polarity pair");
    return out;
}

namespace {

/// Fitness of the zero vector, strictly below any attainable E.
double infeasible_fitness(const ScoreTable& t, double coeff) {
    return -static_cast<double>(t.n_images()) * (1.0 + std::abs(coeff)) - 1.0;
}

std::size_t best_candidate(const std::vector<Genome>& candidates, const ScoreTable& t, double coeff) {
    std::size_t best = 0;
    double best_e = objective_value(candidates[0], t, coeff);
    for (std::size_t c = 1; c < candidates.size(); ++c) {
        const double e = objective_value(candidates[c], t, coeff);
        if (e > best_e) {
            best_e = e;
            best = c;
        }
    }
    return best;
}

Recognizer base_recognizer(const PromptSet& ps, Method method, double coeff) {
    Recognizer r;
    r.task = ps.task;
    r.method = method;
    r.coefficient = coeff;
    r.prompt_set = ps;
    return r;
}

}  // namespace

OptFit fit_opt(const ScoreMatrix& m, const PromptSet& ps, const GAConfig& cfg, double coeff,
               const GAOptions& opts, std::string created) {
    const ScoreTable table = ScoreTable::from(m, ps);
    const double infeasible = infeasible_fitness(table, coeff);
    FitnessFn fitness = [&table, coeff, infeasible](std::span<const double> w) {
        for (double x : w)
            if (x > 0.0) return objective_value(w, table, coeff);
        return infeasible;
    };

    auto candidates = one_candidates(ps);
    const std::size_t best_one = best_candidate(candidates, table, coeff);
    std::vector<Genome> seeds;
    seeds.emplace_back(ps.size(), 1.0);
    seeds.push_back(candidates[best_one]);
    for (std::size_t c = 0; c < candidates.size(); ++c)
        if (c != best_one) seeds.push_back(candidates[c]);

    OptFit out;
    out.run = run_ga(fitness, ps.size(), cfg, seeds, opts);
    out.recognizer = base_recognizer(ps, Method::Opt, coeff);
    out.recognizer.weights = out.run.best_weights;
    out.recognizer.provenance = {cfg, content_hash(m), std::move(created)};
    return out;
}

Recognizer fit_one(const ScoreMatrix& m, const PromptSet& ps, double coeff) {
    const ScoreTable table = ScoreTable::from(m, ps);
    const auto candidates = one_candidates(ps);
    Recognizer r = base_recognizer(ps, Method::One, coeff);
    r.weights = candidates[best_candidate(candidates, table, coeff)];
    r.provenance.dataset_hash = content_hash(m);
    return r;
}

Recognizer make_all(const PromptSet& ps, double coeff) {
    require_valid(validate_prompt_set(ps), "prompt set");
    Recognizer r = base_recognizer(ps, Method::All, coeff);
    r.weights.assign(ps.size(), 1.0);
    return r;
}

Prediction predict_cells(const Recognizer& r, std::span<const Cell> cells) {
    const std::size_t n = r.prompt_set.size();
    if (cells.size() != n || r.weights.size() != n)
        throw MismatchError("expected " + std::to_string(n) + " cells, got " +
                            std::to_string(cells.size()));
    Prediction p;
    p.per_prompt.resize(n);
    std::vector<double> value(n, 0.0);
    CompensatedSum wsum;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& prompt = r.prompt_set.prompts[i];
        auto& pc = p.per_prompt[i];
        pc.prompt_id = prompt.id;
        pc.weight = r.weights[i];
        if (r.task == Task::Vqa) {
            const auto* cell = std::get_if<VqaCell>(&cells[i]);
            if (!cell) throw MismatchError("VQA recognizer given a non-VQA cell");
            const int valid = cell->yes + cell->no;
            if (valid == 0) {
                pc.excluded = true;
                continue;
            }
            value[i] = static_cast<double>(cell->yes) / valid;
        } else {
            const auto* cell = std::get_if<ItrCell>(&cells[i]);
            if (!cell) throw MismatchError("ITR recognizer given a non-ITR cell");
            value[i] = to_int(prompt.polarity) * derive_b(*cell);
        }
        wsum.add(r.weights[i]);
    }

    if (!(wsum.value() > 0.0)) {
        if (r.task == Task::Itr) throw ZeroWeightSumError();
        // Every weighted prompt was excluded.
        p.state = State::Unknown;
        p.score = kVqaThreshold;
        return p;
    }

    CompensatedSum num;
    for (std::size_t i = 0; i < n; ++i) {
        if (p.per_prompt[i].excluded) continue;
        num.add(r.weights[i] * value[i]);
        p.per_prompt[i].contribution = r.weights[i] * value[i] / wsum.value();
    }
    p.score = num.value() / wsum.value();
    const double threshold = r.task == Task::Vqa ? kVqaThreshold : kItrThreshold;
    p.state = p.score > threshold   ? State::Positive
              : p.score < threshold ? State::Negative
                                    : State::Unknown;
    return p;
}

Prediction predict(const Recognizer& r, const RgbImage* img, std::string_view image_id,
                   const ScoreBackend& backend, const AugmentConfig& aug) {
    if (!backend.supports(r.task))
        throw BackendError("backend " + backend.identifier() + " does not support " +
                           to_string(r.task));
    if (backend.needs_pixels() && !img) throw InvariantError("backend needs image pixels");
    std::vector<RgbImage> variants;
    if (backend.needs_pixels()) variants = make_variants(*img, aug);

    const std::size_t n = r.prompt_set.size();
    const std::size_t n_rand = static_cast<std::size_t>(aug.n_rand);
    std::vector<std::vector<AnswerClass>> answers(n);
    std::vector<Cell> cells;
    std::vector<ItrCell> itr(n);
    for (std::size_t k = 0; k < n_rand; ++k) {
        VariantRef ref{image_id, k, backend.needs_pixels() ? &variants[k] : nullptr};
        if (r.task == Task::Vqa) {
            const auto raw = backend.answer_vqa(ref, r.prompt_set.prompts);
            if (raw.size() != n) throw BackendError("backend answer count differs from prompts");
            for (std::size_t i = 0; i < n; ++i) answers[i].push_back(classify_answer(raw[i]));
        } else {
            const auto sims = backend.score_itr(ref, r.prompt_set.prompts);
            if (sims.size() != n) throw BackendError("backend similarity count differs from prompts");
            for (std::size_t i = 0; i < n; ++i) {
                if (!(sims[i] >= -1.0 && sims[i] <= 1.0))
                    throw BackendError("backend similarity outside [-1, 1]");
                itr[i].sims.push_back(sims[i]);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (r.task == Task::Vqa)
            cells.emplace_back(tally_answers(answers[i], r.prompt_set.prompts[i].polarity));
        else
            cells.emplace_back(std::move(itr[i]));
    }
    return predict_cells(r, cells);
}

Evaluation evaluate(const Recognizer& r, const ScoreMatrix& m) {
    require_consistent(m, r.prompt_set);
    Evaluation e;
    int correct = 0;
    for (const auto& img : m.images) {
        const Prediction p = predict_cells(r, img.cells);
        const bool ok = static_cast<int>(p.state) == to_int(img.label);
        correct += ok ? 1 : 0;
        e.per_image.push_back({img.id, img.label, p.state, p.score, ok});
    }
    e.accuracy = m.images.empty() ? 0.0 : static_cast<double>(correct) / m.images.size();
    return e;
}

std::string serialize(const Prediction& p) {
    nlohmann::ordered_json o;
    o["state"] = p.state == State::Unknown ? nlohmann::ordered_json("unknown")
                                           : nlohmann::ordered_json(static_cast<int>(p.state));
    o["score"] = p.score;
    return o.dump() + "\n";
}

std::string serialize(const Evaluation& e) {
    nlohmann::ordered_json o;
    o["accuracy"] = e.accuracy;
    o["accuracy_percent"] = format_percent(e.accuracy);
    auto& rows = o["per_image"] = nlohmann::ordered_json::array();
    for (const auto& img : e.per_image) {
        rows.push_back({{"id", img.id},
                        {"label", to_int(img.label)},
                        {"state", img.state == State::Unknown
                                      ? nlohmann::ordered_json("unknown")
                                      : nlohmann::ordered_json(static_cast<int>(img.state))},
                        {"score", img.score},
                        {"correct", img.correct}});
    }
    return o.dump(2) + "\n";
}

}  // namespace promptweight
